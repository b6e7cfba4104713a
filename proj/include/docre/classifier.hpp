#pragma once

// Head/tail projections, bi-affine mention-pair scoring with logsumexp
// aggregation over all mention pairs, and the classification loss.

#include <cstddef>
#include <utility>

#include "docre/tensor.hpp"

namespace docre {

struct ProjectionHeads {
  Var head_w0;  // d_g x d
  Var head_w1;  // d x d
  Var tail_w0;
  Var tail_w1;
};

ProjectionHeads make_projection_heads(std::size_t input_dim, std::size_t dim, Rng& rng);

// d x r x d tensor, Glorot-uniform over (d, d).
Var make_biaffine(std::size_t dim, std::size_t relations, Rng& rng);

// W1 * relu(W0 * x) for each row of x; dropout on the hidden layer.
Var project_head(Tape& tape, const Var& x, const ProjectionHeads& heads, double dropout, Rng& rng,
                 bool train);
Var project_tail(Tape& tape, const Var& x, const ProjectionHeads& heads, double dropout, Rng& rng,
                 bool train);
std::pair<Var, Var> project(Tape& tape, const Var& x, const ProjectionHeads& heads, double dropout,
                            Rng& rng, bool train);

// score_c = log sum_{i,j} exp(head_i . R[:,c,:] . tail_j) over every row pair.
// Returns a rank-1 tensor of r scores.
Var entity_pair_scores(Tape& tape, const Var& head_rows, const Var& tail_rows, const Var& biaffine);

struct Prediction {
  Var loss;
  std::size_t predicted = 0;
};

// Softmax cross-entropy against `gold`; the prediction is the arg-max with
// ties going to the lowest index.
Prediction loss_and_predict(Tape& tape, const Var& scores, std::size_t gold);
std::size_t argmax(const Tensor& scores);

}  // namespace docre
