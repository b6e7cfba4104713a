#pragma once

// Dense 64-bit tensors with a reverse-mode tape.
//
// A `Tensor` is a plain value (shape + row-major data). A `Var` is a handle
// to a node that may sit on a `Tape`; ops on Vars compute forward values
// eagerly and, when any input requires a gradient, record a backward closure
// on the tape. Parameters are long-lived leaf Vars that live outside any tape
// and accumulate gradients across as many tapes as touch them.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace docre {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }
  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  // Matrix view: rank-2 is rows x cols, rank-1 is a single row, rank-0 is 1x1.
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  // Value of a single-element tensor.
  double item() const;

  Tensor reshaped(Shape shape) const;
  void fill(double v);

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Counter-based generator used by every stochastic op. Uses only the engine's
// raw output so draws are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::size_t below(std::size_t n);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Mixes a base seed with a stream index; used to derive independent streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

struct Node {
  Tensor value;
  Tensor grad;  // empty until the first accumulation
  bool requires_grad = false;
  std::function<void(const Tensor& grad_out)> backward;

  // Gradient storage shaped like `value`, zero-initialised on first use.
  Tensor& grad_buffer();
};

class Var {
 public:
  Var() = default;

  static Var constant(Tensor value);
  static Var parameter(Tensor value);

  const Tensor& value() const { return node_->value; }
  // Direct access for optimizers and checkpoint loading.
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }

  // Accumulated gradient; zeros when the node never received one.
  Tensor grad() const;
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad() { node_->grad = Tensor(); }

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  friend class Tape;

  std::shared_ptr<Node> node_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Records an op output. When `requires_grad` is false the value is returned
  // as a constant and nothing is stored.
  Var record(Tensor value, bool requires_grad, std::function<void(const Tensor&)> backward);

  // Seeds d(loss)/d(loss) = 1 and runs every recorded closure once, newest
  // first. `loss` must be a single-element tensor recorded on this tape.
  void backward(const Var& loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  std::vector<std::shared_ptr<Node>> nodes_;
};

// ---- ops -------------------------------------------------------------------
//
// Binary elementwise ops broadcast the second argument when it is a scalar, a
// row ([c] or [1,c] against [m,c]) or a column ([m,1] against [m,c]).

Var matmul(Tape& tape, const Var& a, const Var& b);
Var add(Tape& tape, const Var& a, const Var& b);
Var sub(Tape& tape, const Var& a, const Var& b);
Var mul(Tape& tape, const Var& a, const Var& b);
Var scale(Tape& tape, const Var& a, double factor);
Var add_n(Tape& tape, std::span<const Var> terms);

Var relu(Tape& tape, const Var& x);
Var sigmoid(Tape& tape, const Var& x);
Var tanh(Tape& tape, const Var& x);
// Inverted dropout: survivors are scaled by 1/(1-p) when training, identity
// otherwise. p must lie in [0, 1).
Var dropout(Tape& tape, const Var& x, double p, Rng& rng, bool train);

Var sum(Tape& tape, const Var& x);
// axis < 0 reduces over every element; otherwise over the given axis of a
// rank-1 or rank-2 tensor.
Var logsumexp(Tape& tape, const Var& x, int axis = -1);
// Softmax cross-entropy of rank-1 logits against a class index.
Var cross_entropy(Tape& tape, const Var& logits, std::size_t gold);

Var reshape(Tape& tape, const Var& x, Shape shape);
Var transpose(Tape& tape, const Var& x);
Var gather_rows(Tape& tape, const Var& x, std::span<const std::size_t> rows);
Var scatter_add_rows(Tape& tape, const Var& x, std::span<const std::size_t> rows,
                     std::size_t n_rows);
Var concat_cols(Tape& tape, std::span<const Var> parts);

// Plain-value helpers used outside the tape.
double logsumexp_value(std::span<const double> values);
bool all_finite(std::span<const double> values);

}  // namespace docre
