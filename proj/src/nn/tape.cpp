#include "metroplan/nn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "metroplan/error.hpp"

namespace metroplan::nn {

// ---------------------------------------------------------------------------
// ParameterSet

std::size_t ParameterSet::add(std::string name, Matrix value) {
  if (contains(name)) throw InvalidArgument("duplicate parameter name " + name);
  params_.push_back({std::move(name), std::move(value)});
  return params_.size() - 1;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.value.size();
  return n;
}

std::size_t ParameterSet::index(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  throw InvalidArgument("unknown parameter " + std::string(name));
}

bool ParameterSet::contains(std::string_view name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const Parameter& p) { return p.name == name; });
}

bool ParameterSet::operator==(const ParameterSet& o) const {
  if (params_.size() != o.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name != o.params_[i].name || !(params_[i].value == o.params_[i].value)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Tape

const Matrix& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::parameter(const ParameterSet& params, std::size_t index) {
  Node n;
  n.value = params[index].value;
  n.requires_grad = true;
  n.param_index = static_cast<long>(index);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

std::vector<Var> Tape::parameters(const ParameterSet& params) {
  std::vector<Var> out;
  out.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) out.push_back(parameter(params, i));
  return out;
}

Var Tape::record(std::string_view op, Matrix value, std::vector<std::size_t> parents, BackwardFn backward) {
  if (!value.all_finite()) throw NumericError(std::string(op) + " produced a non-finite value " + value.shape());
  Node n;
  n.value = std::move(value);
  n.requires_grad = std::any_of(parents.begin(), parents.end(), [&](std::size_t p) { return nodes_[p].requires_grad; });
  if (n.requires_grad) {
    n.parents = std::move(parents);
    n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Matrix& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Matrix(n.value.rows(), n.value.cols(), 0.0);
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
  if (!nodes_[id].requires_grad) return;
  grad_buffer(id) += g;
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw InvalidArgument("backward: loss was recorded on another tape");
  if (loss.value().rows() != 1 || loss.value().cols() != 1)
    throw InvalidArgument("backward: loss must be scalar, got shape " + loss.value().shape());
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Matrix();
  }
  grad_buffer(loss.id())[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, id, n.grad);
  }
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  return n.has_grad ? n.grad : Matrix(n.value.rows(), n.value.cols(), 0.0);
}

std::vector<Matrix> Tape::parameter_gradients(const ParameterSet& params) const {
  std::vector<Matrix> out;
  out.reserve(params.size());
  for (const Parameter& p : params) out.emplace_back(p.value.rows(), p.value.cols(), 0.0);
  for (const Node& n : nodes_) {
    if (n.param_index < 0 || !n.has_grad) continue;
    const auto idx = static_cast<std::size_t>(n.param_index);
    if (idx < out.size() && out[idx].same_shape(n.grad)) out[idx] += n.grad;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Primitives

namespace {

[[noreturn]] void shape_error(std::string_view op, const Matrix& a, const Matrix& b) {
  throw InvalidArgument(std::string(op) + ": incompatible shapes " + a.shape() + " and " + b.shape());
}

Tape& tape_of(Var a) {
  if (a.tape() == nullptr) throw InvalidArgument("operation on an unrecorded Var");
  return *a.tape();
}

void check_same_tape(std::string_view op, Var a, Var b) {
  if (a.tape() != b.tape()) throw InvalidArgument(std::string(op) + ": operands recorded on different tapes");
}

template <typename Fn>
Var unary(std::string_view op, Var a, Fn&& f, Tape::BackwardFn back) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return tape_of(a).record(op, std::move(out), {a.id()}, std::move(back));
}

// C(m x n) += A(m x k) * B(k x n)
void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a(i, p);
      if (av == 0.0) continue;
      const double* brow = &b.data()[p * n];
      double* crow = &c.data()[i * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
}

// C(m x n) += A(m x k) * B(n x k)^T
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      const double* arow = &a.data()[i * k];
      const double* brow = &b.data()[j * k];
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      c(i, j) += s;
    }
}

// C(k x n) += A(m x k)^T * B(m x n)
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a(i, p);
      if (av == 0.0) continue;
      const double* brow = &b.data()[i * n];
      double* crow = &c.data()[p * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
}

}  // namespace

Var matmul(Var a, Var b) {
  check_same_tape("matmul", a, b);
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  if (x.cols() != y.rows()) shape_error("matmul", x, y);
  Matrix out(x.rows(), y.cols(), 0.0);
  gemm_nn(x, y, out);
  const std::size_t ia = a.id(), ib = b.id();
  return tape_of(a).record("matmul", std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t, const Matrix& g) {
    if (t.requires_grad(ia)) gemm_nt(g, t.value(ib), t.grad_buffer(ia));
    if (t.requires_grad(ib)) gemm_tn(t.value(ia), g, t.grad_buffer(ib));
  });
}

Var matmul_transposed(Var a, Var b) {
  check_same_tape("matmul_transposed", a, b);
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  if (x.cols() != y.cols()) shape_error("matmul_transposed", x, y);
  Matrix out(x.rows(), y.rows(), 0.0);
  gemm_nt(x, y, out);
  const std::size_t ia = a.id(), ib = b.id();
  return tape_of(a).record("matmul_transposed", std::move(out), {ia, ib},
                           [ia, ib](Tape& t, std::size_t, const Matrix& g) {
                             // out = A B^T: dA = G B, dB = G^T A
                             if (t.requires_grad(ia)) gemm_nn(g, t.value(ib), t.grad_buffer(ia));
                             if (t.requires_grad(ib)) gemm_tn(g, t.value(ia), t.grad_buffer(ib));
                           });
}

Var add(Var a, Var b) {
  check_same_tape("add", a, b);
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  if (!x.same_shape(y)) shape_error("add", x, y);
  Matrix out = x;
  out += y;
  const std::size_t ia = a.id(), ib = b.id();
  return tape_of(a).record("add", std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t, const Matrix& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var add_row(Var a, Var row) {
  check_same_tape("add_row", a, row);
  const Matrix& x = a.value();
  const Matrix& r = row.value();
  if (r.rows() != 1 || r.cols() != x.cols()) shape_error("add_row", x, r);
  Matrix out = x;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) += r[j];
  const std::size_t ia = a.id(), ir = row.id();
  return tape_of(a).record("add_row", std::move(out), {ia, ir}, [ia, ir](Tape& t, std::size_t, const Matrix& g) {
    t.accumulate(ia, g);
    if (!t.requires_grad(ir)) return;
    Matrix& gr = t.grad_buffer(ir);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) gr[j] += g(i, j);
  });
}

Var sub(Var a, Var b) {
  check_same_tape("sub", a, b);
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  if (!x.same_shape(y)) shape_error("sub", x, y);
  Matrix out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  const std::size_t ia = a.id(), ib = b.id();
  return tape_of(a).record("sub", std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t, const Matrix& g) {
    t.accumulate(ia, g);
    if (!t.requires_grad(ib)) return;
    Matrix& gb = t.grad_buffer(ib);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
  });
}

Var mul(Var a, Var b) {
  check_same_tape("mul", a, b);
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  if (!x.same_shape(y)) shape_error("mul", x, y);
  Matrix out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  const std::size_t ia = a.id(), ib = b.id();
  return tape_of(a).record("mul", std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t, const Matrix& g) {
    if (t.requires_grad(ia)) {
      Matrix& ga = t.grad_buffer(ia);
      const Matrix& yv = t.value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * yv[i];
    }
    if (t.requires_grad(ib)) {
      Matrix& gb = t.grad_buffer(ib);
      const Matrix& xv = t.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * xv[i];
    }
  });
}

Var scale(Var a, double s) {
  const std::size_t ia = a.id();
  return unary("scale", a, [s](double v) { return v * s; }, [ia, s](Tape& t, std::size_t, const Matrix& g) {
    Matrix& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
  });
}

Var tanh(Var a) {
  const std::size_t ia = a.id();
  return unary("tanh", a, [](double v) { return std::tanh(v); }, [ia](Tape& t, std::size_t self, const Matrix& g) {
    Matrix& ga = t.grad_buffer(ia);
    const Matrix& y = t.value(self);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var exp(Var a) {
  const std::size_t ia = a.id();
  return unary("exp", a, [](double v) { return std::exp(v); }, [ia](Tape& t, std::size_t self, const Matrix& g) {
    Matrix& ga = t.grad_buffer(ia);
    const Matrix& y = t.value(self);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
  });
}

Var log(Var a) {
  const std::size_t ia = a.id();
  return unary("log", a, [](double v) { return std::log(v); }, [ia](Tape& t, std::size_t, const Matrix& g) {
    Matrix& ga = t.grad_buffer(ia);
    const Matrix& x = t.value(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / x[i];
  });
}

Var square(Var a) {
  const std::size_t ia = a.id();
  return unary("square", a, [](double v) { return v * v; }, [ia](Tape& t, std::size_t, const Matrix& g) {
    Matrix& ga = t.grad_buffer(ia);
    const Matrix& x = t.value(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * g[i] * x[i];
  });
}

Var minimum(Var a, Var b) {
  check_same_tape("minimum", a, b);
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  if (!x.same_shape(y)) shape_error("minimum", x, y);
  Matrix out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(x[i], y[i]);
  const std::size_t ia = a.id(), ib = b.id();
  return tape_of(a).record("minimum", std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t, const Matrix& g) {
    const Matrix& xv = t.value(ia);
    const Matrix& yv = t.value(ib);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const std::size_t target = xv[i] <= yv[i] ? ia : ib;
      if (t.requires_grad(target)) t.grad_buffer(target)[i] += g[i];
    }
  });
}

Var clamp(Var a, double lo, double hi) {
  const std::size_t ia = a.id();
  return unary("clamp", a, [lo, hi](double v) { return std::clamp(v, lo, hi); },
               [ia, lo, hi](Tape& t, std::size_t, const Matrix& g) {
                 Matrix& ga = t.grad_buffer(ia);
                 const Matrix& x = t.value(ia);
                 for (std::size_t i = 0; i < g.size(); ++i)
                   if (x[i] >= lo && x[i] <= hi) ga[i] += g[i];
               });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw InvalidArgument("concat_cols: no operands");
  const std::size_t rows = parts[0].value().rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    check_same_tape("concat_cols", parts[0], p);
    if (p.value().rows() != rows) shape_error("concat_cols", parts[0].value(), p.value());
    cols += p.value().cols();
    ids.push_back(p.id());
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    const Matrix& v = p.value();
    offsets.push_back(offset);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < v.cols(); ++j) out(i, offset + j) = v(i, j);
    offset += v.cols();
  }
  return tape_of(parts[0]).record("concat_cols", std::move(out), ids,
                                  [ids, offsets](Tape& t, std::size_t, const Matrix& g) {
                                    for (std::size_t p = 0; p < ids.size(); ++p) {
                                      if (!t.requires_grad(ids[p])) continue;
                                      Matrix& gp = t.grad_buffer(ids[p]);
                                      for (std::size_t i = 0; i < gp.rows(); ++i)
                                        for (std::size_t j = 0; j < gp.cols(); ++j) gp(i, j) += g(i, offsets[p] + j);
                                    }
                                  });
}

Var concat_cols(Var a, Var b) {
  const Var parts[] = {a, b};
  return concat_cols(parts);
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Matrix& x = a.value();
  if (begin > end || end > x.cols())
    throw InvalidArgument("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                          ") outside " + x.shape());
  Matrix out(x.rows(), end - begin);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = begin; j < end; ++j) out(i, j - begin) = x(i, j);
  const std::size_t ia = a.id();
  return tape_of(a).record("slice_cols", std::move(out), {ia}, [ia, begin](Tape& t, std::size_t, const Matrix& g) {
    Matrix& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) ga(i, begin + j) += g(i, j);
  });
}

Var transpose(Var a) {
  const Matrix& x = a.value();
  Matrix out(x.cols(), x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(j, i) = x(i, j);
  const std::size_t ia = a.id();
  return tape_of(a).record("transpose", std::move(out), {ia}, [ia](Tape& t, std::size_t, const Matrix& g) {
    Matrix& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) ga(j, i) += g(i, j);
  });
}

Var gather_rows(Var a, std::span<const int> rows) {
  const Matrix& x = a.value();
  Matrix out(rows.size(), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || static_cast<std::size_t>(rows[r]) >= x.rows())
      throw InvalidArgument("gather_rows: index " + std::to_string(rows[r]) + " outside " + x.shape());
    for (std::size_t j = 0; j < x.cols(); ++j) out(r, j) = x(static_cast<std::size_t>(rows[r]), j);
  }
  const std::size_t ia = a.id();
  std::vector<int> idx(rows.begin(), rows.end());
  return tape_of(a).record("gather_rows", std::move(out), {ia}, [ia, idx](Tape& t, std::size_t, const Matrix& g) {
    Matrix& ga = t.grad_buffer(ia);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < g.cols(); ++j) ga(static_cast<std::size_t>(idx[r]), j) += g(r, j);
  });
}

Var segment_sum(Var a, std::span<const int> src, std::span<const int> dst, std::size_t num_rows) {
  const Matrix& x = a.value();
  if (src.size() != dst.size())
    throw InvalidArgument("segment_sum: " + std::to_string(src.size()) + " sources vs " + std::to_string(dst.size()) +
                          " destinations");
  Matrix out(num_rows, x.cols(), 0.0);
  for (std::size_t e = 0; e < src.size(); ++e) {
    if (src[e] < 0 || static_cast<std::size_t>(src[e]) >= x.rows() || dst[e] < 0 ||
        static_cast<std::size_t>(dst[e]) >= num_rows)
      throw InvalidArgument("segment_sum: edge " + std::to_string(e) + " out of range for " + x.shape());
    const auto s = static_cast<std::size_t>(src[e]);
    const auto d = static_cast<std::size_t>(dst[e]);
    for (std::size_t j = 0; j < x.cols(); ++j) out(d, j) += x(s, j);
  }
  const std::size_t ia = a.id();
  std::vector<int> s(src.begin(), src.end()), d(dst.begin(), dst.end());
  return tape_of(a).record("segment_sum", std::move(out), {ia}, [ia, s, d](Tape& t, std::size_t, const Matrix& g) {
    Matrix& ga = t.grad_buffer(ia);
    for (std::size_t e = 0; e < s.size(); ++e)
      for (std::size_t j = 0; j < g.cols(); ++j)
        ga(static_cast<std::size_t>(s[e]), j) += g(static_cast<std::size_t>(d[e]), j);
  });
}

Var mean_pool(Var a) {
  const Matrix& x = a.value();
  if (x.rows() == 0) throw InvalidArgument("mean_pool: no rows");
  Matrix out(1, x.cols(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out[j] += x(i, j);
  const double inv = 1.0 / static_cast<double>(x.rows());
  for (std::size_t j = 0; j < x.cols(); ++j) out[j] *= inv;
  const std::size_t ia = a.id();
  return tape_of(a).record("mean_pool", std::move(out), {ia}, [ia, inv](Tape& t, std::size_t, const Matrix& g) {
    Matrix& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g[j] * inv;
  });
}

Var sum(Var a) {
  const Matrix& x = a.value();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i];
  const std::size_t ia = a.id();
  return tape_of(a).record("sum", Matrix(1, 1, s), {ia}, [ia](Tape& t, std::size_t, const Matrix& g) {
    Matrix& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw InvalidArgument("mean: empty operand");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var pick(Var a, std::size_t r, std::size_t c) {
  const Matrix& x = a.value();
  if (r >= x.rows() || c >= x.cols())
    throw InvalidArgument("pick: (" + std::to_string(r) + "," + std::to_string(c) + ") outside " + x.shape());
  const std::size_t ia = a.id();
  return tape_of(a).record("pick", Matrix(1, 1, x(r, c)), {ia}, [ia, r, c](Tape& t, std::size_t, const Matrix& g) {
    t.grad_buffer(ia)(r, c) += g[0];
  });
}

namespace {

// Row-wise log-softmax of x with masked columns pushed to kMaskedLogit.
Matrix log_softmax_values(const Matrix& x, std::span<const std::uint8_t> mask) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const double z = x(i, j) + (mask.empty() || mask[j] ? 0.0 : kMaskedLogit);
      out(i, j) = z;
      hi = std::max(hi, z);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) total += std::exp(out(i, j) - hi);
    const double lse = hi + std::log(total);
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) -= lse;
  }
  return out;
}

void check_mask(std::string_view op, const Matrix& x, std::span<const std::uint8_t> mask) {
  if (!mask.empty() && mask.size() != x.cols())
    throw InvalidArgument(std::string(op) + ": mask of " + std::to_string(mask.size()) + " entries for " + x.shape());
  if (!mask.empty() && std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; }))
    throw InvalidArgument(std::string(op) + ": mask excludes every column");
}

Var softmax_impl(std::string_view op, Var a, std::span<const std::uint8_t> mask) {
  const Matrix& x = a.value();
  check_mask(op, x, mask);
  Matrix p = log_softmax_values(x, mask);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(p[i]);
  const std::size_t ia = a.id();
  std::vector<std::uint8_t> m(mask.begin(), mask.end());
  return tape_of(a).record(op, std::move(p), {ia}, [ia, m](Tape& t, std::size_t self, const Matrix& g) {
    const Matrix& y = t.value(self);
    Matrix& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j)
        if (m.empty() || m[j]) ga(i, j) += y(i, j) * (g(i, j) - dot);
    }
  });
}

}  // namespace

Var softmax_rows(Var a) { return softmax_impl("softmax_rows", a, {}); }

Var masked_softmax(Var a, std::span<const std::uint8_t> mask) { return softmax_impl("masked_softmax", a, mask); }

Var masked_log_softmax(Var a, std::span<const std::uint8_t> mask) {
  const Matrix& x = a.value();
  check_mask("masked_log_softmax", x, mask);
  Matrix out = log_softmax_values(x, mask);
  const std::size_t ia = a.id();
  std::vector<std::uint8_t> m(mask.begin(), mask.end());
  return tape_of(a).record("masked_log_softmax", std::move(out), {ia}, [ia, m](Tape& t, std::size_t self, const Matrix& g) {
    const Matrix& y = t.value(self);
    Matrix& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j)
        if (m.empty() || m[j]) total += g(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j)
        if (m.empty() || m[j]) ga(i, j) += g(i, j) - std::exp(y(i, j)) * total;
    }
  });
}

}  // namespace metroplan::nn
