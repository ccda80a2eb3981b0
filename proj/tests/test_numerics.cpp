// Copyright 2026 The mavil-desk Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "mavil/grad_check.hpp"
#include "mavil/optim.hpp"
#include "mavil/params.hpp"
#include "support.hpp"

using namespace mavil;
using mavil::testing::fd_max_rel_error;
using mavil::testing::random_tensor;

namespace {

Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor c(Shape{a.rows(), b.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a.at(i, k) * b.at(k, j);
      c.at(i, j) = s;
    }
  return c;
}

}  // namespace

TEST_CASE("tensor construction and shape checks") {
  Tensor s;
  CHECK(s.rank() == 0);
  CHECK(s.size() == 1);
  CHECK(Tensor::scalar(2.5).item() == 2.5);
  Tensor m = Tensor(Shape{2, 3}, 1.0);
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
  CHECK(shape_str(Shape{3, 4}) == "[3x4]");
  CHECK(max_abs_diff(m, Tensor(Shape{2, 3}, 1.5)) == doctest::Approx(0.5));
}

TEST_CASE("matmul with identity returns the operand") {
  Tensor eye(Shape{3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
  const Tensor x = random_tensor(Shape{3, 5}, 1);
  CHECK(bitwise_equal(matmul(eye, x), x));
  const Tensor a = random_tensor(Shape{4, 3}, 2);
  CHECK(max_abs_diff(matmul(a, x), naive_matmul(a, x)) < 1e-12);
}

TEST_CASE("softmax of zeros is uniform") {
  Tape tape;
  Var y = ops::softmax_rows(tape.constant(Tensor(Shape{1, 4})));
  for (double v : y.value().vec()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("softmax and log-softmax are stable for large logits") {
  Tape tape;
  Var x = tape.constant(Tensor(Shape{1, 3}, std::vector<double>{1000.0, 1000.0, 0.0}));
  const auto p = ops::softmax_rows(x).value().vec();
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[2] == doctest::Approx(0.0));
  const auto lp = ops::log_softmax_rows(x).value().vec();
  CHECK(std::isfinite(lp[2]));
  CHECK(lp[2] == doctest::Approx(-1000.0 - std::log(2.0)));
}

TEST_CASE("layer norm of a constant row is zero before the affine") {
  Tape tape;
  Var y = ops::layer_norm(tape.constant(Tensor(Shape{2, 5}, 3.0)));
  for (double v : y.value().vec()) CHECK(v == 0.0);
  Var z = ops::layer_norm(tape.constant(random_tensor(Shape{3, 16}, 3)));
  for (std::size_t r = 0; r < 3; ++r) {
    double mean = 0.0, var = 0.0;
    for (std::size_t c = 0; c < 16; ++c) mean += z.value().at(r, c) / 16.0;
    for (std::size_t c = 0; c < 16; ++c) var += std::pow(z.value().at(r, c) - mean, 2) / 16.0;
    CHECK(std::abs(mean) < 1e-12);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("gelu uses the exact erf form") {
  Tape tape;
  Var y = ops::gelu(tape.constant(Tensor(Shape{1, 3}, std::vector<double>{-1.0, 0.0, 1.0})));
  CHECK(y.value().vec()[0] == doctest::Approx(-0.15865525393145707).epsilon(1e-14));
  CHECK(y.value().vec()[1] == 0.0);
  CHECK(y.value().vec()[2] == doctest::Approx(0.8413447460685429).epsilon(1e-14));
}

TEST_CASE("backward of simple closed forms") {
  {
    Tape tape;
    Var x = tape.leaf(Tensor(Shape{1, 2}, std::vector<double>{1.0, 2.0}));
    Var loss = ops::sum(ops::mul(x, x));
    const Var wrt[] = {x};
    const auto g = tape.backward(loss, wrt);
    CHECK(g[0].vec() == std::vector<double>{2.0, 4.0});
  }
  {
    Tape tape;
    const Tensor t = random_tensor(Shape{3, 4}, 4);
    Var x = tape.leaf(t);
    Var loss = ops::mse(x, tape.constant(t));
    const Var wrt[] = {x};
    const auto g = tape.backward(loss, wrt);
    for (double v : g[0].vec()) CHECK(v == 0.0);
  }
}

TEST_CASE("backward rejects a non-scalar loss") {
  Tape tape;
  Var x = tape.leaf(Tensor(Shape{2, 2}, 1.0));
  const Var wrt[] = {x};
  CHECK_THROWS_AS(tape.backward(ops::scale(x, 2.0), wrt), std::invalid_argument);
}

TEST_CASE("shape errors name the op and shapes") {
  Tape tape;
  Var a = tape.constant(Tensor(Shape{2, 3}));
  Var b = tape.constant(Tensor(Shape{2, 3}));
  try {
    ops::matmul(a, b);
    FAIL("expected a shape error");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("[2x3]") != std::string::npos);
  }
}

TEST_CASE("op gradients match central differences") {
  using V = std::vector<Var>;
  const Tensor a = random_tensor(Shape{3, 4}, 10);
  const Tensor b = random_tensor(Shape{4, 2}, 11);
  const Tensor c = random_tensor(Shape{3, 4}, 12);
  const Tensor row = random_tensor(Shape{1, 4}, 13);
  const Tensor w = random_tensor(Shape{3, 2}, 14);
  const double tol = 1e-6;

  SUBCASE("matmul") {
    CHECK(fd_max_rel_error([&](Tape& t, const V& x) {
            return ops::sum(ops::mul(ops::matmul(x[0], x[1]), t.constant(w)));
          }, {a, b}) < tol);
  }
  SUBCASE("add sub mul with broadcast") {
    CHECK(fd_max_rel_error([&](Tape&, const V& x) {
            return ops::sum(ops::mul(ops::sub(ops::add(x[0], x[2]), x[1]), ops::mul(x[0], x[2])));
          }, {a, c, row}) < tol);
  }
  SUBCASE("transpose concat slice gather") {
    const std::vector<std::size_t> idx{2, 0, 2, 5};
    CHECK(fd_max_rel_error([&](Tape& t, const V& x) {
            Var cat = ops::concat({x[0], x[1]}, 0);
            Var g = ops::gather_rows(cat, idx);
            Var s = ops::slice(ops::transpose(g), 0, 1, 2);
            Var h = ops::concat({s, s}, 1);
            return ops::sum(ops::mul(h, t.constant(random_tensor(h.shape(), 99))));
          }, {a, c}) < tol);
  }
  SUBCASE("layer norm with affine") {
    const Tensor g = random_tensor(Shape{1, 4}, 15);
    CHECK(fd_max_rel_error([&](Tape& t, const V& x) {
            return ops::sum(ops::mul(ops::layer_norm(x[0], x[1], x[2]), t.constant(c)));
          }, {a, g, row}) < tol);
  }
  SUBCASE("gelu softmax log_softmax") {
    CHECK(fd_max_rel_error([&](Tape& t, const V& x) {
            Var y = ops::add(ops::gelu(x[0]), ops::softmax_rows(x[0]));
            return ops::sum(ops::mul(ops::add(y, ops::log_softmax_rows(x[0])), t.constant(c)));
          }, {a}) < tol);
  }
  SUBCASE("mse mean mean_rows scale") {
    CHECK(fd_max_rel_error([&](Tape&, const V& x) {
            return ops::add(ops::mse(x[0], x[1]),
                            ops::scale(ops::sum(ops::mul(ops::mean_rows(x[0]), x[2])), 3.0));
          }, {a, c, row}) < tol);
  }
  SUBCASE("l2 normalize and cross entropy") {
    const std::vector<std::size_t> labels{1, 0, 3};
    CHECK(fd_max_rel_error([&](Tape&, const V& x) {
            return ops::cross_entropy(ops::scale(ops::l2_normalize_rows(x[0]), 5.0), labels);
          }, {a}) < tol);
  }
  SUBCASE("bce with logits") {
    Tensor targets(Shape{3, 4});
    targets.at(0, 1) = targets.at(2, 3) = 1.0;
    CHECK(fd_max_rel_error([&](Tape&, const V& x) { return ops::bce_with_logits(x[0], targets); },
                           {a}) < tol);
  }
}

TEST_CASE("bce with zero logits is ln 2") {
  Tape tape;
  Tensor targets(Shape{1, 4});
  targets.at(0, 2) = 1.0;
  Var loss = ops::bce_with_logits(tape.constant(Tensor(Shape{1, 4})), targets);
  CHECK(loss.value().item() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("float32 precision rounds op outputs") {
  Tape tape(Precision::F32);
  Var x = tape.leaf(random_tensor(Shape{2, 3}, 20));
  Var y = ops::gelu(ops::scale(x, 1.0 / 3.0));
  for (double v : y.value().vec()) CHECK(static_cast<double>(static_cast<float>(v)) == v);
}

TEST_CASE("rng streams are reproducible and independent") {
  Rng a(7, {1, 2}), b(7, {1, 2}), c(7, {1, 3});
  for (int i = 0; i < 8; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
  }
  Rng r(3);
  double mean = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    mean += z / n;
    sq += z * z / n;
  }
  CHECK(std::abs(mean) < 0.01);
  CHECK(sq == doctest::Approx(1.0).epsilon(0.01));
  auto perm = Rng(5).permutation(50);
  std::vector<std::size_t> sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> iota(50);
  std::iota(iota.begin(), iota.end(), std::size_t{0});
  CHECK(sorted == iota);
}

TEST_CASE("adamw first step has unit magnitude") {
  ParamStore params;
  params.add("p", Tensor::scalar(0.0));
  OptimizerState state;
  state.config.weight_decay = 0.0;
  GradMap g{{"p", Tensor::scalar(1.0)}};
  adamw_step(params, g, state, 0.1);
  CHECK(params.at("p").item() == doctest::Approx(-0.1).epsilon(1e-9));
}

TEST_CASE("adamw with zero gradient and no decay leaves parameters unchanged") {
  ParamStore params;
  params.add("w", random_tensor(Shape{3, 3}, 30));
  const ParamStore before = params;
  OptimizerState state;
  state.config.weight_decay = 0.0;
  adamw_step(params, GradMap{{"w", Tensor(Shape{3, 3})}}, state, 0.01);
  CHECK(params == before);
}

TEST_CASE("adamw matches a scalar reference over several steps") {
  const double b1 = 0.9, b2 = 0.95, eps = 1e-8, wd = 1e-2, lr = 0.05;
  ParamStore params;
  params.add("x", Tensor::scalar(0.7));
  OptimizerState state;
  state.config.weight_decay = wd;
  double p = 0.7, m = 0.0, v = 0.0;
  for (int t = 1; t <= 5; ++t) {
    const double g = std::sin(static_cast<double>(t)) + p;
    adamw_step(params, GradMap{{"x", Tensor::scalar(g)}}, state, lr);
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
    p = p - lr * (mh / (std::sqrt(vh) + eps) + wd * p);
    CHECK(params.at("x").item() == doctest::Approx(p).epsilon(1e-14));
  }
}

TEST_CASE("adamw rejects non-finite gradients") {
  ParamStore params;
  params.add("enc.w", Tensor::scalar(1.0));
  OptimizerState state;
  try {
    adamw_step(params, GradMap{{"enc.w", Tensor::scalar(std::nan(""))}}, state, 0.1);
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("enc.w") != std::string::npos);
  }
}

TEST_CASE("adamw runs are deterministic") {
  auto run = [] {
    ParamStore params;
    params.add("w", random_tensor(Shape{4, 4}, 40));
    OptimizerState state;
    for (int i = 0; i < 3; ++i)
      adamw_step(params, GradMap{{"w", random_tensor(Shape{4, 4}, 41 + i)}}, state, 1e-2);
    return std::make_pair(params, state);
  };
  const auto a = run(), b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("lr schedule warm-up, peak and cosine midpoint") {
  LrSchedule s;
  s.base_lr = 1e-3;
  s.batch_size = 512;
  s.warmup_epochs = 2;
  s.total_epochs = 10;
  s.min_lr = 1e-6;
  s.steps_per_epoch = 50;
  const double peak = 1e-3 * 512.0 / 256.0;
  CHECK(lr_at(s, 0) == 0.0);
  CHECK(lr_at(s, 50) == doctest::Approx(peak / 2));
  CHECK(lr_at(s, 100) == doctest::Approx(peak).epsilon(1e-15));
  CHECK(lr_at(s, 300) == doctest::Approx(1e-6 + (peak - 1e-6) / 2).epsilon(1e-12));
  CHECK(lr_at(s, 500) == doctest::Approx(1e-6).epsilon(1e-12));
  for (std::size_t t = 101; t < 500; ++t) CHECK(lr_at(s, t) <= lr_at(s, t - 1));
}

TEST_CASE("grad check on a quadratic bowl") {
  ParamStore params;
  params.add("x", random_tensor(Shape{2, 3}, 50));
  params.add("y", random_tensor(Shape{1, 3}, 51));
  const Tensor center = random_tensor(Shape{2, 3}, 52);
  const auto loss = [&](BoundParams& bp) {
    Tape& t = bp.tape();
    Var d = ops::sub(bp.get("x"), t.constant(center));
    return ops::add(ops::sum(ops::mul(d, d)), ops::sum(ops::mul(bp.get("y"), bp.get("y"))));
  };
  const GradCheckReport r = grad_check(loss, params, 1e-3);
  CHECK(r.coordinates == 9);
  CHECK(r.max_rel_error < 1e-8);
}

TEST_CASE("bound params return zero gradients for untouched parameters") {
  ParamStore params;
  params.add("used", Tensor(Shape{1, 2}, 1.0));
  params.add("unused", Tensor(Shape{2, 2}, 1.0));
  Tape tape;
  BoundParams bp(tape, params);
  const GradMap g = bp.backward(ops::sum(bp.get("used")));
  CHECK(g.at("used").vec() == std::vector<double>{1.0, 1.0});
  CHECK(g.at("unused").vec() == std::vector<double>(4, 0.0));
}

TEST_CASE("xavier uniform stays within its bound") {
  Rng rng(60);
  const Tensor w = xavier_uniform(64, 32, rng);
  const double bound = std::sqrt(6.0 / 96.0);
  for (double v : w.vec()) CHECK(std::abs(v) <= bound);
}
