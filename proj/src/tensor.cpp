#include "docre/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "docre/error.hpp"

namespace docre {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

ConstMatMap as_matrix(const Tensor& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}
MatMap as_matrix(Tensor& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

void check_finite(const Tensor& t, const char* op) {
  if (!all_finite(t.values())) {
    throw Error(ErrorKind::Numeric, std::string("non-finite value produced by ") + op);
  }
}

bool any_requires(std::initializer_list<const Var*> vars) {
  return std::any_of(vars.begin(), vars.end(), [](const Var* v) { return v->requires_grad(); });
}

void add_into(Tensor& dst, const Tensor& src) {
  double* d = dst.data();
  const double* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

enum class Broadcast { Same, Scalar, Row, Column };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::Same;
  if (b.size() == 1) return Broadcast::Scalar;
  if (a.rank() == 2) {
    const bool row = (b.rank() == 1 && b.size() == a.cols()) ||
                     (b.rank() == 2 && b.shape()[0] == 1 && b.shape()[1] == a.cols());
    if (row) return Broadcast::Row;
    if (b.rank() == 2 && b.shape()[1] == 1 && b.shape()[0] == a.rows()) return Broadcast::Column;
  }
  throw Error(ErrorKind::Dimension, std::string(op) + ": cannot broadcast " +
                                        shape_string(b.shape()) + " onto " +
                                        shape_string(a.shape()));
}

// Index of b's element paired with a's flat index i.
inline std::size_t b_index(Broadcast kind, std::size_t i, std::size_t cols) {
  switch (kind) {
    case Broadcast::Same: return i;
    case Broadcast::Scalar: return 0;
    case Broadcast::Row: return i % cols;
    case Broadcast::Column: return i / cols;
  }
  return 0;
}

template <typename Fn>
Tensor map_values(const Tensor& x, Fn fn) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fn(x[i]);
  return out;
}

}  // namespace

// ---- Tensor ----------------------------------------------------------------

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (auto extent : shape_) {
    if (extent == 0) throw Error(ErrorKind::Dimension, "zero extent in " + shape_string(shape_));
  }
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (shape_size(shape_) != data_.size()) {
    throw Error(ErrorKind::Dimension, "shape " + shape_string(shape_) + " needs " +
                                          std::to_string(shape_size(shape_)) + " values, got " +
                                          std::to_string(data_.size()));
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor(Shape{values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n_rows = rows.size();
  const std::size_t n_cols = n_rows ? rows.begin()->size() : 0;
  std::vector<double> values;
  values.reserve(n_rows * n_cols);
  for (const auto& row : rows) {
    if (row.size() != n_cols) throw Error(ErrorKind::Dimension, "ragged matrix literal");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor(Shape{n_rows, n_cols}, std::move(values));
}

std::size_t Tensor::rows() const noexcept { return rank() == 2 ? shape_[0] : 1; }

std::size_t Tensor::cols() const noexcept {
  if (rank() == 2) return shape_[1];
  if (rank() == 1) return shape_[0];
  return data_.size();
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw Error(ErrorKind::Dimension, "item() on tensor of shape " + shape_string(shape_));
  }
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw Error(ErrorKind::Dimension,
                "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

// ---- Rng -------------------------------------------------------------------

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw Error(ErrorKind::Precondition, "Rng::below(0)");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return static_cast<std::size_t>(v % n);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  // splitmix64 finaliser over the combined state
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// ---- Node / Var / Tape -----------------------------------------------------

Tensor& Node::grad_buffer() {
  if (grad.empty()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Var Var::constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var Var::parameter(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

Tensor Var::grad() const {
  if (node_->grad.empty()) return Tensor(node_->value.shape(), 0.0);
  return node_->grad;
}

Var Tape::record(Tensor value, bool requires_grad, std::function<void(const Tensor&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (requires_grad) {
    node->requires_grad = true;
    node->backward = std::move(backward);
    nodes_.push_back(node);
  }
  return Var(std::move(node));
}

void Tape::backward(const Var& loss) {
  if (loss.value().size() != 1) {
    throw Error(ErrorKind::Dimension,
                "backward needs a scalar loss, got " + shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;  // nothing upstream is trainable
  const auto it = std::find(nodes_.rbegin(), nodes_.rend(), loss.shared());
  if (it == nodes_.rend()) {
    throw Error(ErrorKind::Invariant, "backward: loss was not recorded on this tape");
  }
  loss.node()->grad_buffer()[0] += 1.0;
  for (auto cur = it; cur != nodes_.rend(); ++cur) {
    Node& node = **cur;
    if (node.grad.empty() || !node.backward) continue;
    node.backward(node.grad);
  }
}

// ---- linear algebra ----------------------------------------------------------

Var matmul(Tape& tape, const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows()) {
    throw Error(ErrorKind::Dimension, "matmul: " + shape_string(av.shape()) + " x " +
                                          shape_string(bv.shape()));
  }
  Tensor out(Shape{av.rows(), bv.cols()});
  as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv);
  check_finite(out, "matmul");
  return tape.record(std::move(out), any_requires({&a, &b}), [a, b](const Tensor& g) {
    if (a.requires_grad()) {
      as_matrix(a.node()->grad_buffer()).noalias() += as_matrix(g) * as_matrix(b.value()).transpose();
    }
    if (b.requires_grad()) {
      as_matrix(b.node()->grad_buffer()).noalias() += as_matrix(a.value()).transpose() * as_matrix(g);
    }
  });
}

namespace {

// Reduces a full-shape gradient onto the broadcast operand's shape.
void accumulate_broadcast(Tensor& dst, const Tensor& g, Broadcast kind, double sign) {
  const std::size_t cols = g.cols();
  for (std::size_t i = 0; i < g.size(); ++i) dst[b_index(kind, i, cols)] += sign * g[i];
}

}  // namespace

Var add(Tape& tape, const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast kind = broadcast_kind(av, bv, "add");
  Tensor out(av.shape());
  const std::size_t cols = av.cols();
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[b_index(kind, i, cols)];
  check_finite(out, "add");
  return tape.record(std::move(out), any_requires({&a, &b}), [a, b, kind](const Tensor& g) {
    if (a.requires_grad()) add_into(a.node()->grad_buffer(), g);
    if (b.requires_grad()) accumulate_broadcast(b.node()->grad_buffer(), g, kind, 1.0);
  });
}

Var sub(Tape& tape, const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast kind = broadcast_kind(av, bv, "sub");
  Tensor out(av.shape());
  const std::size_t cols = av.cols();
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[b_index(kind, i, cols)];
  check_finite(out, "sub");
  return tape.record(std::move(out), any_requires({&a, &b}), [a, b, kind](const Tensor& g) {
    if (a.requires_grad()) add_into(a.node()->grad_buffer(), g);
    if (b.requires_grad()) accumulate_broadcast(b.node()->grad_buffer(), g, kind, -1.0);
  });
}

Var mul(Tape& tape, const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast kind = broadcast_kind(av, bv, "mul");
  Tensor out(av.shape());
  const std::size_t cols = av.cols();
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[b_index(kind, i, cols)];
  check_finite(out, "mul");
  return tape.record(std::move(out), any_requires({&a, &b}), [a, b, kind](const Tensor& g) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const std::size_t cols = g.cols();
    if (a.requires_grad()) {
      Tensor& ga = a.node()->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[b_index(kind, i, cols)];
    }
    if (b.requires_grad()) {
      Tensor& gb = b.node()->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gb[b_index(kind, i, cols)] += g[i] * av[i];
    }
  });
}

Var scale(Tape& tape, const Var& a, double factor) {
  Tensor out = map_values(a.value(), [factor](double v) { return v * factor; });
  check_finite(out, "scale");
  return tape.record(std::move(out), a.requires_grad(), [a, factor](const Tensor& g) {
    Tensor& ga = a.node()->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
  });
}

Var add_n(Tape& tape, std::span<const Var> terms) {
  if (terms.empty()) throw Error(ErrorKind::Precondition, "add_n of zero terms");
  Tensor out = terms[0].value();
  bool needs = terms[0].requires_grad();
  for (std::size_t k = 1; k < terms.size(); ++k) {
    if (terms[k].shape() != out.shape()) {
      throw Error(ErrorKind::Dimension, "add_n: " + shape_string(out.shape()) + " vs " +
                                            shape_string(terms[k].shape()));
    }
    add_into(out, terms[k].value());
    needs = needs || terms[k].requires_grad();
  }
  check_finite(out, "add_n");
  std::vector<Var> parents(terms.begin(), terms.end());
  return tape.record(std::move(out), needs, [parents = std::move(parents)](const Tensor& g) {
    for (const Var& p : parents) {
      if (p.requires_grad()) add_into(p.node()->grad_buffer(), g);
    }
  });
}

// ---- activations -------------------------------------------------------------

Var relu(Tape& tape, const Var& x) {
  Tensor out = map_values(x.value(), [](double v) { return v > 0.0 ? v : 0.0; });
  return tape.record(std::move(out), x.requires_grad(), [x](const Tensor& g) {
    const Tensor& xv = x.value();
    Tensor& gx = x.node()->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xv[i] > 0.0) gx[i] += g[i];
    }
  });
}

Var sigmoid(Tape& tape, const Var& x) {
  Tensor out = map_values(x.value(), [](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
  auto node_value = std::make_shared<Tensor>(out);
  return tape.record(std::move(out), x.requires_grad(), [x, node_value](const Tensor& g) {
    const Tensor& y = *node_value;
    Tensor& gx = x.node()->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var tanh(Tape& tape, const Var& x) {
  Tensor out = map_values(x.value(), [](double v) { return std::tanh(v); });
  auto node_value = std::make_shared<Tensor>(out);
  return tape.record(std::move(out), x.requires_grad(), [x, node_value](const Tensor& g) {
    const Tensor& y = *node_value;
    Tensor& gx = x.node()->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var dropout(Tape& tape, const Var& x, double p, Rng& rng, bool train) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw Error(ErrorKind::Config, "dropout rate " + std::to_string(p) + " outside [0, 1)");
  }
  if (!train || p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  auto mask = std::make_shared<Tensor>(x.shape());
  for (std::size_t i = 0; i < mask->size(); ++i) {
    (*mask)[i] = rng.uniform() >= p ? keep_scale : 0.0;
  }
  Tensor out(x.shape());
  const Tensor& xv = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * (*mask)[i];
  return tape.record(std::move(out), x.requires_grad(), [x, mask](const Tensor& g) {
    Tensor& gx = x.node()->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (*mask)[i];
  });
}

// ---- reductions --------------------------------------------------------------

Var sum(Tape& tape, const Var& x) {
  const auto vals = x.value().values();
  double total = std::accumulate(vals.begin(), vals.end(), 0.0);
  Tensor out = Tensor::scalar(total);
  check_finite(out, "sum");
  return tape.record(std::move(out), x.requires_grad(), [x](const Tensor& g) {
    Tensor& gx = x.node()->grad_buffer();
    const double gv = g[0];
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gv;
  });
}

double logsumexp_value(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::Invariant, "logsumexp over an empty axis");
  const double m = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - m);
  return m + std::log(acc);
}

Var logsumexp(Tape& tape, const Var& x, int axis) {
  const Tensor& xv = x.value();
  if (xv.empty()) throw Error(ErrorKind::Invariant, "logsumexp over an empty axis");
  if (axis >= 0 && (static_cast<std::size_t>(axis) >= std::max<std::size_t>(xv.rank(), 1) ||
                    xv.rank() > 2)) {
    throw Error(ErrorKind::Dimension, "logsumexp: axis " + std::to_string(axis) +
                                          " invalid for " + shape_string(xv.shape()));
  }
  // Normalise to reducing across the columns of an (outer x inner) grid with
  // a stride; axis -1 or rank<=1 is a single group over all elements.
  std::size_t groups = 1, length = xv.size(), stride = 1, group_step = 0;
  Shape out_shape{};
  if (axis >= 0 && xv.rank() == 2) {
    if (axis == 0) {
      groups = xv.cols(); length = xv.rows(); stride = xv.cols(); group_step = 1;
      out_shape = {xv.cols()};
    } else {
      groups = xv.rows(); length = xv.cols(); stride = 1; group_step = xv.cols();
      out_shape = {xv.rows()};
    }
  }
  Tensor out(out_shape);
  auto softmax = std::make_shared<Tensor>(xv.shape());
  std::vector<double> buf(length);
  for (std::size_t gi = 0; gi < groups; ++gi) {
    const std::size_t base = gi * group_step;
    for (std::size_t k = 0; k < length; ++k) buf[k] = xv[base + k * stride];
    const double lse = logsumexp_value(buf);
    out[gi] = lse;
    for (std::size_t k = 0; k < length; ++k) {
      (*softmax)[base + k * stride] = std::exp(buf[k] - lse);
    }
  }
  check_finite(out, "logsumexp");
  return tape.record(std::move(out), x.requires_grad(),
                     [x, softmax, groups, length, stride, group_step](const Tensor& g) {
                       Tensor& gx = x.node()->grad_buffer();
                       for (std::size_t gi = 0; gi < groups; ++gi) {
                         const std::size_t base = gi * group_step;
                         for (std::size_t k = 0; k < length; ++k) {
                           const std::size_t idx = base + k * stride;
                           gx[idx] += g[gi] * (*softmax)[idx];
                         }
                       }
                     });
}

Var cross_entropy(Tape& tape, const Var& logits, std::size_t gold) {
  const Tensor& lv = logits.value();
  if (lv.rank() != 1) {
    throw Error(ErrorKind::Dimension, "cross_entropy expects rank-1 logits, got " +
                                          shape_string(lv.shape()));
  }
  if (gold >= lv.size()) {
    throw Error(ErrorKind::Label, "gold class " + std::to_string(gold) + " outside [0, " +
                                      std::to_string(lv.size()) + ")");
  }
  const double lse = logsumexp_value(lv.values());
  Tensor out = Tensor::scalar(lse - lv[gold]);
  check_finite(out, "cross_entropy");
  return tape.record(std::move(out), logits.requires_grad(), [logits, gold, lse](const Tensor& g) {
    const Tensor& lv = logits.value();
    Tensor& gl = logits.node()->grad_buffer();
    for (std::size_t c = 0; c < lv.size(); ++c) {
      const double p = std::exp(lv[c] - lse);
      gl[c] += g[0] * (p - (c == gold ? 1.0 : 0.0));
    }
  });
}

// ---- structural ----------------------------------------------------------------

Var reshape(Tape& tape, const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return tape.record(std::move(out), x.requires_grad(), [x](const Tensor& g) {
    add_into(x.node()->grad_buffer(), g);
  });
}

Var transpose(Tape& tape, const Var& x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2) {
    throw Error(ErrorKind::Dimension, "transpose needs rank 2, got " + shape_string(xv.shape()));
  }
  Tensor out(Shape{xv.cols(), xv.rows()});
  as_matrix(out) = as_matrix(xv).transpose();
  return tape.record(std::move(out), x.requires_grad(), [x](const Tensor& g) {
    as_matrix(x.node()->grad_buffer()) += as_matrix(g).transpose();
  });
}

Var gather_rows(Tape& tape, const Var& x, std::span<const std::size_t> rows) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2) {
    throw Error(ErrorKind::Dimension, "gather_rows needs rank 2, got " + shape_string(xv.shape()));
  }
  if (rows.empty()) throw Error(ErrorKind::Precondition, "gather_rows with no indices");
  const std::size_t cols = xv.cols();
  Tensor out(Shape{rows.size(), cols});
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= xv.rows()) {
      throw Error(ErrorKind::Dimension, "gather_rows: row " + std::to_string(rows[k]) +
                                            " outside " + shape_string(xv.shape()));
    }
    std::copy_n(xv.data() + rows[k] * cols, cols, out.data() + k * cols);
  }
  auto index = std::make_shared<std::vector<std::size_t>>(rows.begin(), rows.end());
  return tape.record(std::move(out), x.requires_grad(), [x, index, cols](const Tensor& g) {
    Tensor& gx = x.node()->grad_buffer();
    for (std::size_t k = 0; k < index->size(); ++k) {
      double* dst = gx.data() + (*index)[k] * cols;
      const double* src = g.data() + k * cols;
      for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
    }
  });
}

Var scatter_add_rows(Tape& tape, const Var& x, std::span<const std::size_t> rows,
                     std::size_t n_rows) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || xv.rows() != rows.size()) {
    throw Error(ErrorKind::Dimension, "scatter_add_rows: " + shape_string(xv.shape()) +
                                          " with " + std::to_string(rows.size()) + " indices");
  }
  const std::size_t cols = xv.cols();
  Tensor out(Shape{n_rows, cols});
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= n_rows) {
      throw Error(ErrorKind::Dimension, "scatter_add_rows: row " + std::to_string(rows[k]) +
                                            " outside " + std::to_string(n_rows));
    }
    double* dst = out.data() + rows[k] * cols;
    const double* src = xv.data() + k * cols;
    for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
  }
  auto index = std::make_shared<std::vector<std::size_t>>(rows.begin(), rows.end());
  return tape.record(std::move(out), x.requires_grad(), [x, index, cols](const Tensor& g) {
    Tensor& gx = x.node()->grad_buffer();
    for (std::size_t k = 0; k < index->size(); ++k) {
      const double* src = g.data() + (*index)[k] * cols;
      double* dst = gx.data() + k * cols;
      for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
    }
  });
}

Var concat_cols(Tape& tape, std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorKind::Precondition, "concat_cols of zero parts");
  const std::size_t rows = parts[0].value().rows();
  std::size_t total_cols = 0;
  bool needs = false;
  for (const Var& p : parts) {
    if (p.value().rank() != 2 || p.value().rows() != rows) {
      throw Error(ErrorKind::Dimension, "concat_cols: " + shape_string(parts[0].shape()) +
                                            " vs " + shape_string(p.shape()));
    }
    total_cols += p.value().cols();
    needs = needs || p.requires_grad();
  }
  Tensor out(Shape{rows, total_cols});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(pv.data() + r * pv.cols(), pv.cols(), out.data() + r * total_cols + offset);
    }
    offset += pv.cols();
  }
  std::vector<Var> parents(parts.begin(), parts.end());
  return tape.record(std::move(out), needs,
                     [parents = std::move(parents), rows, total_cols](const Tensor& g) {
                       std::size_t offset = 0;
                       for (const Var& p : parents) {
                         const std::size_t cols = p.value().cols();
                         if (p.requires_grad()) {
                           Tensor& gp = p.node()->grad_buffer();
                           for (std::size_t r = 0; r < rows; ++r) {
                             const double* src = g.data() + r * total_cols + offset;
                             double* dst = gp.data() + r * cols;
                             for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
                           }
                         }
                         offset += cols;
                       }
                     });
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace docre
