#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>

#include "metroplan/error.hpp"
#include "metroplan/gradcheck.hpp"
#include "metroplan/nn/adam.hpp"
#include "metroplan/nn/checkpoint.hpp"
#include "metroplan/nn/tape.hpp"

using namespace metroplan;
using namespace metroplan::nn;

namespace {

using Forward = std::function<Var(Tape&, const std::vector<Var>&)>;

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (auto& v : m.data()) v = u(rng);
  return m;
}

// Max relative error between tape gradients and central differences of a
// scalar-valued forward function.
double primitive_error(const ParameterSet& params, const Forward& f) {
  Tape tape;
  const auto vars = tape.parameters(params);
  tape.backward(f(tape, vars));
  const auto analytic = tape.parameter_gradients(params);
  auto loss = [&](const ParameterSet& p) {
    Tape t;
    return f(t, t.parameters(p)).scalar();
  };
  return check_gradients(loss, params, analytic, 1e-6).max_rel_error;
}

// Contracts a matrix-valued output to a scalar with fixed random weights so
// every output entry gets a distinct upstream gradient.
Var contract(Tape& tape, Var out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sum(mul(out, tape.constant(random_matrix(out.rows(), out.cols(), rng))));
}

}  // namespace

TEST_CASE("tanh of zero") {
  Tape t;
  CHECK(tanh(t.constant(Matrix(1, 1, 0.0))).scalar() == 0.0);
}

TEST_CASE("masked softmax example") {
  Tape t;
  const std::vector<std::uint8_t> mask{1, 1, 0};
  const Var p = masked_softmax(t.constant(Matrix(1, 3, 0.0)), mask);
  CHECK(p.value()[0] == 0.5);
  CHECK(p.value()[1] == 0.5);
  CHECK(p.value()[2] == 0.0);
}

TEST_CASE("masked softmax rows sum to one with exact zeros") {
  std::mt19937_64 rng(1);
  Tape t;
  const std::vector<std::uint8_t> mask{0, 1, 1, 0, 1};
  const Var p = masked_softmax(t.constant(random_matrix(4, 5, rng, -5, 5)), mask);
  for (std::size_t r = 0; r < 4; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 5; ++c) s += p.value()(r, c);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(p.value()(r, 0) == 0.0);
    CHECK(p.value()(r, 3) == 0.0);
  }
}

TEST_CASE("segment sum adds rows into their destination") {
  Tape t;
  const Var a = t.constant(Matrix(2, 2, {1, 2, 3, 4}));
  const std::vector<int> src{0, 1}, dst{0, 0};
  const Var s = segment_sum(a, src, dst, 3);
  CHECK(s.value() == Matrix(3, 2, {4, 6, 0, 0, 0, 0}));
}

TEST_CASE("derivative of x*x at 3 is 6") {
  ParameterSet p;
  p.add("x", Matrix(1, 1, 3.0));
  Tape t;
  const Var x = t.parameter(p, 0);
  t.backward(mul(x, x));
  CHECK(t.parameter_gradients(p)[0][0] == 6.0);
}

TEST_CASE("mean pool gradient is 1/n") {
  ParameterSet p;
  p.add("a", Matrix(4, 3, 1.0));
  Tape t;
  const Var a = t.parameter(p, 0);
  t.backward(sum(mean_pool(a)));
  const Matrix g = t.parameter_gradients(p)[0];
  for (double x : g.data()) CHECK(x == 0.25);
}

TEST_CASE("disconnected parameters get exactly zero gradient") {
  ParameterSet p;
  p.add("used", Matrix(2, 2, 0.5));
  p.add("unused", Matrix(3, 1, 0.5));
  Tape t;
  const auto v = t.parameters(p);
  t.backward(sum(tanh(v[0])));
  const auto g = t.parameter_gradients(p);
  for (double x : g[1].data()) CHECK(x == 0.0);
  CHECK(g[1].rows() == 3);
}

TEST_CASE("backward requires a scalar loss") {
  Tape t;
  const Var a = t.constant(Matrix(2, 1, 1.0));
  CHECK_THROWS_AS(t.backward(a), InvalidArgument);
}

TEST_CASE("shape mismatches name the op") {
  Tape t;
  const Var a = t.constant(Matrix(2, 3));
  const Var b = t.constant(Matrix(2, 3));
  try {
    matmul(a, b);
    FAIL("expected a shape error");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("matmul") != std::string::npos);
    CHECK(std::string(e.what()).find("2x3") != std::string::npos);
  }
  CHECK_THROWS_AS(add(a, t.constant(Matrix(3, 2))), InvalidArgument);
}

TEST_CASE("non-finite results raise numeric errors") {
  Tape t;
  CHECK_THROWS_AS(log(t.constant(Matrix(1, 1, 0.0))), NumericError);
  CHECK_THROWS_AS(exp(t.constant(Matrix(1, 1, 1000.0))), NumericError);
}

TEST_CASE("primitive gradients match finite differences") {
  std::mt19937_64 rng(7);
  ParameterSet p;
  p.add("a", random_matrix(3, 4, rng));
  p.add("b", random_matrix(4, 2, rng));
  p.add("c", random_matrix(3, 4, rng));
  p.add("row", random_matrix(1, 4, rng));
  p.add("pos", random_matrix(3, 4, rng, 0.5, 2.0));
  const std::vector<int> src{0, 1, 2, 2, 1}, dst{1, 0, 0, 3, 3};
  const std::vector<int> rows{2, 0, 2};
  const std::vector<std::uint8_t> mask{1, 0, 1, 1};

  const std::vector<std::pair<const char*, Forward>> cases = {
      {"matmul", [](Tape& t, const std::vector<Var>& v) { return contract(t, matmul(v[0], v[1]), 1); }},
      {"matmul_transposed", [](Tape& t, const std::vector<Var>& v) { return contract(t, matmul_transposed(v[0], v[2]), 2); }},
      {"add", [](Tape& t, const std::vector<Var>& v) { return contract(t, add(v[0], v[2]), 3); }},
      {"add_row", [](Tape& t, const std::vector<Var>& v) { return contract(t, add_row(v[0], v[3]), 4); }},
      {"sub", [](Tape& t, const std::vector<Var>& v) { return contract(t, sub(v[0], v[2]), 5); }},
      {"mul", [](Tape& t, const std::vector<Var>& v) { return contract(t, mul(v[0], v[2]), 6); }},
      {"scale", [](Tape& t, const std::vector<Var>& v) { return contract(t, scale(v[0], -2.5), 7); }},
      {"tanh", [](Tape& t, const std::vector<Var>& v) { return contract(t, tanh(v[0]), 8); }},
      {"exp", [](Tape& t, const std::vector<Var>& v) { return contract(t, exp(v[0]), 9); }},
      {"log", [](Tape& t, const std::vector<Var>& v) { return contract(t, log(v[4]), 10); }},
      {"square", [](Tape& t, const std::vector<Var>& v) { return contract(t, square(v[0]), 11); }},
      {"minimum", [](Tape& t, const std::vector<Var>& v) { return contract(t, minimum(v[0], v[2]), 12); }},
      {"clamp", [](Tape& t, const std::vector<Var>& v) { return contract(t, clamp(v[0], -0.3, 0.4), 13); }},
      {"concat_cols",
       [](Tape& t, const std::vector<Var>& v) { return contract(t, concat_cols(v[0], matmul(v[0], v[1])), 14); }},
      {"slice_cols", [](Tape& t, const std::vector<Var>& v) { return contract(t, slice_cols(v[0], 1, 3), 15); }},
      {"transpose", [](Tape& t, const std::vector<Var>& v) { return contract(t, transpose(v[0]), 16); }},
      {"gather_rows", [&](Tape& t, const std::vector<Var>& v) { return contract(t, gather_rows(v[0], rows), 17); }},
      {"segment_sum",
       [&](Tape& t, const std::vector<Var>& v) { return contract(t, segment_sum(transpose(v[0]), src, dst, 5), 18); }},
      {"mean_pool", [](Tape& t, const std::vector<Var>& v) { return contract(t, mean_pool(v[0]), 19); }},
      {"mean", [](Tape&, const std::vector<Var>& v) { return scale(mean(square(v[0])), 3.0); }},
      {"pick", [](Tape&, const std::vector<Var>& v) { return square(pick(v[0], 2, 1)); }},
      {"softmax_rows", [](Tape& t, const std::vector<Var>& v) { return contract(t, softmax_rows(v[0]), 20); }},
      {"masked_softmax", [&](Tape& t, const std::vector<Var>& v) { return contract(t, masked_softmax(v[0], mask), 21); }},
      {"masked_log_softmax",
       [&](Tape&, const std::vector<Var>& v) {
         const Var lp = masked_log_softmax(v[0], mask);
         return sum(mul(exp(lp), lp));
       }},
  };
  for (const auto& [name, f] : cases) {
    const double err = primitive_error(p, f);
    CHECK_MESSAGE(err < 1e-6, name << " relative error " << err);
  }
}

TEST_CASE("masked entries carry no gradient") {
  std::mt19937_64 rng(3);
  ParameterSet p;
  p.add("s", random_matrix(1, 5, rng));
  const std::vector<std::uint8_t> mask{1, 0, 1, 0, 1};
  Tape t;
  const Var s = t.parameter(p, 0);
  t.backward(pick(masked_log_softmax(s, mask), 0, 2));
  const Matrix g = t.parameter_gradients(p)[0];
  CHECK(g[1] == 0.0);
  CHECK(g[3] == 0.0);
  CHECK(g[2] != 0.0);
}

TEST_CASE("gradient relative error formula") {
  CHECK(gradient_rel_error(1.0, 1.0) == 0.0);
  CHECK(gradient_rel_error(2.0, 1.0) == 0.5);
  CHECK(gradient_rel_error(0.0, 1e-9) == doctest::Approx(1e-3));
}

TEST_CASE("adam leaves parameters alone under a zero gradient") {
  ParameterSet p;
  p.add("w", Matrix(2, 2, {1, -2, 3, -4}));
  const ParameterSet before = p;
  AdamState s;
  for (int i = 0; i < 5; ++i) adam_step(p, {Matrix(2, 2, 0.0)}, s, AdamConfig{});
  CHECK(p == before);
}

TEST_CASE("adam first step moves each coordinate by lr against the gradient sign") {
  ParameterSet p;
  p.add("w", Matrix(1, 4, {0.5, 0.5, 0.5, 0.5}));
  AdamState s;
  const AdamConfig cfg;
  adam_step(p, {Matrix(1, 4, {3.0, -0.01, 200.0, -7.0})}, s, cfg);
  const Matrix& w = p.value("w");
  CHECK(w[0] == doctest::Approx(0.5 - cfg.lr).epsilon(1e-6));
  CHECK(w[1] == doctest::Approx(0.5 + cfg.lr).epsilon(1e-6));
  CHECK(w[2] == doctest::Approx(0.5 - cfg.lr).epsilon(1e-6));
  CHECK(w[3] == doctest::Approx(0.5 + cfg.lr).epsilon(1e-6));
  CHECK(s.step == 1);
}

TEST_CASE("adam descends a quadratic bowl") {
  ParameterSet p;
  p.add("w", Matrix(1, 3, {1.0, -2.0, 0.5}));
  AdamState s;
  AdamConfig cfg;
  cfg.lr = 0.01;
  auto loss = [](const Matrix& w) { return w[0] * w[0] + 4 * w[1] * w[1] + 0.5 * w[2] * w[2]; };
  std::vector<double> history;
  for (int i = 0; i < 100; ++i) {
    const Matrix& w = p.value("w");
    history.push_back(loss(w));
    adam_step(p, {Matrix(1, 3, {2 * w[0], 8 * w[1], w[2]})}, s, cfg);
  }
  for (std::size_t i = 6; i < history.size(); ++i) CHECK(history[i] < history[i - 1]);
  CHECK(history.back() < 0.5 * history.front());
}

TEST_CASE("adam rejects mismatched gradients") {
  ParameterSet p;
  p.add("w", Matrix(2, 2));
  AdamState s;
  CHECK_THROWS_AS(adam_step(p, {Matrix(2, 3)}, s, AdamConfig{}), InvalidArgument);
  CHECK_THROWS_AS(adam_step(p, {}, s, AdamConfig{}), InvalidArgument);
}

TEST_CASE("checkpoint round trip is exact") {
  std::mt19937_64 rng(9);
  Checkpoint c;
  c.parameters.add("a.weight", random_matrix(3, 2, rng));
  c.parameters.add("a.bias", random_matrix(1, 2, rng, -1e-300, 1e300));
  c.adam = AdamState::zeros_like(c.parameters);
  c.adam.step = 12;
  c.adam.m[0](1, 1) = 0.1 + 0.2;
  c.metadata = R"({"iteration":3})";
  const auto path = std::filesystem::temp_directory_path() / "metroplan_ckpt_roundtrip.json";
  save_checkpoint(c, path);
  const Checkpoint back = load_checkpoint(path);
  std::filesystem::remove(path);
  CHECK(back.parameters == c.parameters);
  CHECK(back.adam == c.adam);
  CHECK(back.metadata == c.metadata);
  CHECK(checkpoint_to_json(back) == checkpoint_to_json(c));
}

TEST_CASE("malformed checkpoints are parse errors") {
  CHECK_THROWS_AS(checkpoint_from_json("{"), ParseError);
  CHECK_THROWS_AS(checkpoint_from_json(R"({"format": 2, "parameters": []})"), ParseError);
  CHECK_THROWS_AS(
      checkpoint_from_json(R"({"format": 1, "parameters": [{"name": "w", "shape": [2, 2], "data": [1, 2, 3]}]})"),
      ParseError);
}
