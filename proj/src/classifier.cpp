#include "docre/classifier.hpp"

#include <cmath>

#include "docre/encoder.hpp"
#include "docre/error.hpp"

namespace docre {

ProjectionHeads make_projection_heads(std::size_t input_dim, std::size_t dim, Rng& rng) {
  ProjectionHeads heads;
  heads.head_w0 = Var::parameter(glorot_uniform(input_dim, dim, rng));
  heads.head_w1 = Var::parameter(glorot_uniform(dim, dim, rng));
  heads.tail_w0 = Var::parameter(glorot_uniform(input_dim, dim, rng));
  heads.tail_w1 = Var::parameter(glorot_uniform(dim, dim, rng));
  return heads;
}

Var make_biaffine(std::size_t dim, std::size_t relations, Rng& rng) {
  if (relations < 2) {
    throw Error(ErrorKind::Config, "bi-affine scorer needs at least 2 relation categories");
  }
  const double limit = std::sqrt(6.0 / static_cast<double>(2 * dim));
  Tensor r(Shape{dim, relations, dim});
  for (auto& v : r.values()) v = rng.uniform(-limit, limit);
  return Var::parameter(std::move(r));
}

namespace {

Var two_layer(Tape& tape, const Var& x, const Var& w0, const Var& w1, double p, Rng& rng, bool train) {
  Var hidden = relu(tape, matmul(tape, x, w0));
  hidden = dropout(tape, hidden, p, rng, train);
  return matmul(tape, hidden, w1);
}

}  // namespace

Var project_head(Tape& tape, const Var& x, const ProjectionHeads& heads, double dropout, Rng& rng,
                 bool train) {
  return two_layer(tape, x, heads.head_w0, heads.head_w1, dropout, rng, train);
}

Var project_tail(Tape& tape, const Var& x, const ProjectionHeads& heads, double dropout, Rng& rng,
                 bool train) {
  return two_layer(tape, x, heads.tail_w0, heads.tail_w1, dropout, rng, train);
}

std::pair<Var, Var> project(Tape& tape, const Var& x, const ProjectionHeads& heads, double dropout,
                            Rng& rng, bool train) {
  Var h = project_head(tape, x, heads, dropout, rng, train);
  Var t = project_tail(tape, x, heads, dropout, rng, train);
  return {std::move(h), std::move(t)};
}

Var entity_pair_scores(Tape& tape, const Var& head_rows, const Var& tail_rows, const Var& biaffine) {
  const Shape& rs = biaffine.shape();
  if (rs.size() != 3 || rs[0] != rs[2]) {
    throw Error(ErrorKind::Dimension, "bi-affine tensor must be d x r x d, got " + shape_string(rs));
  }
  const std::size_t d = rs[0];
  const std::size_t r = rs[1];
  const std::size_t h = head_rows.value().rows();
  const std::size_t t = tail_rows.value().rows();
  if (head_rows.value().cols() != d || tail_rows.value().cols() != d) {
    throw Error(ErrorKind::Dimension, "bi-affine scoring of " + shape_string(head_rows.shape()) +
                                          " and " + shape_string(tail_rows.shape()) +
                                          " against " + shape_string(rs));
  }
  // (h x d)(d x rd) -> rows i*r+c hold head_i R[:,c,:]
  const Var hr = reshape(tape, matmul(tape, head_rows, reshape(tape, biaffine, {d, r * d})), {h * r, d});
  // (hr x d)(d x t) -> [i*r+c, j]
  const Var raw = matmul(tape, hr, transpose(tape, tail_rows));
  // regroup so each relation's h*t raw scores form one row
  const Var by_relation = reshape(tape, transpose(tape, reshape(tape, raw, {h, r * t})), {r, t * h});
  return logsumexp(tape, by_relation, 1);
}

std::size_t argmax(const Tensor& scores) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  return best;
}

Prediction loss_and_predict(Tape& tape, const Var& scores, std::size_t gold) {
  if (scores.value().size() < 2) {
    throw Error(ErrorKind::Dimension, "need at least 2 relation scores");
  }
  Prediction out;
  out.loss = cross_entropy(tape, scores, gold);
  out.predicted = argmax(scores.value());
  return out;
}

}  // namespace docre
