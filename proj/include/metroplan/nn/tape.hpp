#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metroplan/nn/matrix.hpp"

namespace metroplan::nn {

// A named, learnable matrix.
struct Parameter {
  std::string name;
  Matrix value;
};

// Ordered parameter collection; the order is the checkpoint and gradient
// order.
class ParameterSet {
 public:
  std::size_t add(std::string name, Matrix value);
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  // Throws InvalidArgument for an unknown name.
  std::size_t index(std::string_view name) const;
  bool contains(std::string_view name) const;

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  Matrix& value(std::string_view name) { return params_[index(name)].value; }
  const Matrix& value(std::string_view name) const { return params_[index(name)].value; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  bool operator==(const ParameterSet&) const;

 private:
  std::vector<Parameter> params_;
};

class Tape;

// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double scalar() const { return value()[0]; }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode recording. Nodes are stored in creation order, which is a
// topological order; backward walks it in reverse exactly once. Single
// threaded.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self, const Matrix& grad_out)>;

  Var constant(Matrix value);
  // Leaf bound to params[index]; its gradient is reported by
  // parameter_gradients.
  Var parameter(const ParameterSet& params, std::size_t index);
  // Binds every parameter once, in order.
  std::vector<Var> parameters(const ParameterSet& params);

  // Records an op result. Throws NumericError if value is not finite.
  Var record(std::string_view op, Matrix value, std::vector<std::size_t> parents, BackwardFn backward);

  // Throws InvalidArgument unless loss is a 1 x 1 value on this tape.
  void backward(Var loss);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Gradient of the last backward; zero matrix for nodes it did not reach.
  Matrix grad(Var v) const;
  // One matrix per parameter in set order; exactly zero for parameters not
  // bound or not reached.
  std::vector<Matrix> parameter_gradients(const ParameterSet& params) const;

  // Adds g into the gradient buffer of node id (used by backward functions).
  void accumulate(std::size_t id, const Matrix& g);
  Matrix& grad_buffer(std::size_t id);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    long param_index = -1;
    std::vector<std::size_t> parents;
    BackwardFn backward;
  };
  std::deque<Node> nodes_;  // stable addresses while recording
};

// Primitives. Shape mismatches throw InvalidArgument naming the op and
// shapes; non-finite results throw NumericError.
Var matmul(Var a, Var b);                 // (m x k)(k x n)
Var matmul_transposed(Var a, Var b);      // a * b^T, (m x k)(n x k)^T
Var add(Var a, Var b);                    // same shape
Var add_row(Var a, Var row);              // row (1 x n) added to every row
Var sub(Var a, Var b);
Var mul(Var a, Var b);                    // elementwise
Var scale(Var a, double s);
Var tanh(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var minimum(Var a, Var b);                // elementwise; ties route to a
Var clamp(Var a, double lo, double hi);
Var concat_cols(std::span<const Var> parts);
Var concat_cols(Var a, Var b);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var transpose(Var a);
Var gather_rows(Var a, std::span<const int> rows);
// out[dst[e]] += a[src[e]] for every e; out has num_rows rows.
Var segment_sum(Var a, std::span<const int> src, std::span<const int> dst, std::size_t num_rows);
Var mean_pool(Var a);                     // column means, 1 x n
Var sum(Var a);                           // 1 x 1
Var mean(Var a);                          // 1 x 1
Var pick(Var a, std::size_t r, std::size_t c);  // 1 x 1
Var softmax_rows(Var a);
// Row-wise softmax with masked columns receiving a -1e30 additive logit, so
// their probability is exactly 0. mask has one entry per column.
Var masked_softmax(Var a, std::span<const std::uint8_t> mask);
Var masked_log_softmax(Var a, std::span<const std::uint8_t> mask);

inline constexpr double kMaskedLogit = -1e30;

}  // namespace metroplan::nn
