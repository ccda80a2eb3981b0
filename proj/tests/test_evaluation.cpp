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

#include "mavil/evaluation.hpp"
#include "support.hpp"

using namespace mavil;
using mavil::testing::random_tensor;

namespace {

// Rank of instance i among all instances of one column, counted directly.
std::size_t rank_of(const Tensor& s, std::size_t col, std::size_t i) {
  std::size_t r = 1;
  for (std::size_t j = 0; j < s.rows(); ++j)
    if (s.at(j, col) > s.at(i, col) || (s.at(j, col) == s.at(i, col) && j < i)) ++r;
  return r;
}

double ref_map(const Tensor& s, const LabelSets& labels) {
  double total = 0.0;
  std::size_t classes = 0;
  for (std::size_t c = 0; c < s.cols(); ++c) {
    std::vector<std::size_t> pos;
    for (std::size_t i = 0; i < s.rows(); ++i)
      if (std::find(labels[i].begin(), labels[i].end(), c) != labels[i].end()) pos.push_back(i);
    if (pos.empty()) continue;
    double ap = 0.0;
    for (std::size_t i : pos) {
      const std::size_t r = rank_of(s, c, i);
      std::size_t hits = 0;
      for (std::size_t j : pos) hits += rank_of(s, c, j) <= r;
      ap += static_cast<double>(hits) / static_cast<double>(r);
    }
    total += ap / static_cast<double>(pos.size());
    ++classes;
  }
  return total / static_cast<double>(classes);
}

double cosine(const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
  double d = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) {
    d += a.at(i, c) * b.at(j, c);
    na += a.at(i, c) * a.at(i, c);
    nb += b.at(j, c) * b.at(j, c);
  }
  return d / std::sqrt(na * nb);
}

double ref_recall(const Tensor& q, const Tensor& g, std::size_t k) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < q.rows(); ++i) {
    const double own = cosine(q, i, g, i);
    std::size_t ahead = 0;
    for (std::size_t j = 0; j < g.rows(); ++j) {
      const double s = cosine(q, i, g, j);
      if (s > own || (s == own && j < i)) ++ahead;
    }
    hits += ahead < k;
  }
  return static_cast<double>(hits) / static_cast<double>(q.rows());
}

Tensor map_scores(const Tensor& s, double (*f)(double)) {
  Tensor out(s.shape());
  for (std::size_t i = 0; i < s.size(); ++i) out.vec()[i] = f(s.vec()[i]);
  return out;
}

bool allclose(const Tensor& a, const Tensor& b, double tol) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a.vec()[i] - b.vec()[i]) > tol) return false;
  return true;
}

double cube_plus(double x) { return x * x * x + 2.0 * x - 7.0; }
double squash(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("average precision hand cases") {
  CHECK(average_precision({0.9, 0.1}, {true, false}) == 1.0);
  CHECK(average_precision({0.9, 0.1}, {false, true}) == 0.5);
  CHECK(average_precision({0.3, 0.2, 0.1}, {true, false, true}) == doctest::Approx((1.0 + 2.0 / 3.0) / 2));
  Tensor perfect(Shape{3, 2});
  perfect.at(0, 0) = perfect.at(1, 1) = perfect.at(2, 1) = 1.0;
  CHECK(mean_average_precision(perfect, {{0}, {1}, {1}}) == 1.0);
}

TEST_CASE("mAP matches the exhaustive rank oracle") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor s = random_tensor(Shape{5, 3}, rng);
    if (trial % 5 == 0) s.at(3, 1) = s.at(1, 1);  // ties
    LabelSets labels(5);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t c = 0; c < 3; ++c)
        if (rng.uniform() < 0.4) labels[i].push_back(c);
    labels[0].push_back(0);
    CHECK(mean_average_precision(s, labels) == doctest::Approx(ref_map(s, labels)).epsilon(1e-12));
    CHECK(mean_average_precision(map_scores(s, cube_plus), labels) ==
          doctest::Approx(mean_average_precision(s, labels)).epsilon(1e-12));
  }
}

TEST_CASE("mAP skips empty classes and rejects all-empty") {
  Tensor s(Shape{2, 3});
  s.at(0, 0) = 1.0;
  CHECK(mean_average_precision(s, {{0}, {}}) == 1.0);
  CHECK_THROWS_AS(mean_average_precision(s, {{}, {}}), std::invalid_argument);
}

TEST_CASE("top-1 accuracy") {
  Tensor s(Shape{3, 4});
  s.at(0, 1) = s.at(1, 2) = s.at(2, 3) = 1.0;
  CHECK(accuracy_top1(s, {1, 2, 3}) == 1.0);
  CHECK(accuracy_top1(Tensor(Shape{3, 4}, 0.5), {1, 2, 3}) == 0.0);
  CHECK(argmax_row(Tensor(Shape{1, 4}, 0.5), 0) == 0);

  Rng rng(9);
  const Tensor r = random_tensor(Shape{40, 5}, rng);
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < 40; ++i) labels.push_back(rng.below(5));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < 40; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < 5; ++c)
      if (r.at(i, c) > r.at(i, best)) best = c;
    hits += best == labels[i];
  }
  CHECK(accuracy_top1(r, labels) == doctest::Approx(hits / 40.0));
  CHECK(accuracy_top1(map_scores(r, squash), labels) == accuracy_top1(r, labels));
}

TEST_CASE("recall@k") {
  Rng rng(4);
  const Tensor g = random_tensor(Shape{12, 6}, rng);
  CHECK(recall_at_k(g, g, 1) == 1.0);

  Tensor eye(Shape{4, 4});
  for (std::size_t i = 0; i < 4; ++i) eye.at(i, i) = 1.0;
  Tensor q(Shape{4, 4});
  q.at(0, 2) = 1.0;
  for (std::size_t i = 1; i < 4; ++i) q.at(i, i) = 3.0;
  CHECK(recall_at_k(q, eye, 1) == 0.75);

  const Tensor qs = random_tensor(Shape{12, 6}, rng);
  double prev = 0.0;
  for (std::size_t k = 1; k <= 12; ++k) {
    const double r = recall_at_k(qs, g, k);
    CHECK(r == doctest::Approx(ref_recall(qs, g, k)));
    CHECK(r >= prev);
    prev = r;
  }
  CHECK(prev == 1.0);
  CHECK_THROWS_AS(recall_at_k(qs, g, 13), std::invalid_argument);
  CHECK_THROWS_AS(recall_at_k(qs, g, 0), std::invalid_argument);
}

TEST_CASE("recall@1 of random embeddings is chance") {
  Rng rng(31);
  const std::size_t gallery = 10, trials = 3000;
  double sum = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const Tensor q = random_tensor(Shape{gallery, 8}, rng);
    const Tensor g = random_tensor(Shape{gallery, 8}, rng);
    sum += recall_at_k(q, g, 1);
  }
  const double n = static_cast<double>(trials * gallery);
  const double p = 1.0 / gallery;
  CHECK(std::abs(sum / trials - p) < 3.0 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("multi-clip aggregation") {
  Rng rng(6);
  const Tensor clips = random_tensor(Shape{10, 5}, rng);
  const Tensor mean = multiclip_aggregate(clips);
  REQUIRE(mean.shape() == Shape{5});
  for (std::size_t c = 0; c < 5; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < 10; ++i) s += clips.at(i, c);
    CHECK(mean.vec()[c] == doctest::Approx(s / 10));
  }
  auto agg = [](const Tensor& x, ClipAverage m = ClipAverage::Logits) {
    return multiclip_aggregate(x, m).reshaped(Shape{1, x.cols()});
  };

  Tensor one(Shape{1, 5});
  for (std::size_t c = 0; c < 5; ++c) one.at(0, c) = clips.at(0, c);
  CHECK(agg(one) == one);
  CHECK(allclose(agg(one, ClipAverage::Probabilities), one, 1e-12));

  Tensor same(Shape{4, 5});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 5; ++c) same.at(i, c) = clips.at(0, c);
  CHECK(allclose(agg(same), one, 1e-12));

  // A linear head commutes with logit averaging.
  const Tensor w = random_tensor(Shape{5, 3}, rng);
  const Tensor b = random_tensor(Shape{1, 3}, rng);
  auto head = [&](const Tensor& x) {
    Tensor y(Shape{x.rows(), 3});
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t k = 0; k < 3; ++k) {
        double s = b.at(0, k);
        for (std::size_t c = 0; c < 5; ++c) s += x.at(i, c) * w.at(c, k);
        y.at(i, k) = s;
      }
    return y;
  };
  CHECK(allclose(head(agg(clips)), agg(head(clips)), 1e-12));
  CHECK_THROWS_AS(multiclip_aggregate(Tensor(Shape{0, 5})), std::invalid_argument);
}

TEST_CASE("prediction and report validation") {
  PredictionSet p{{"a", "b"}, Tensor(Shape{2, 3}), {{0}, {1}}};
  CHECK_NOTHROW(p.validate());
  p.labels.pop_back();
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  MetricReport m{"mAP", 0.4, 10, "eval", "abc"};
  CHECK_NOTHROW(m.validate());
  m.value = 1.2;
  CHECK_THROWS_AS(m.validate(), std::out_of_range);
}

TEST_CASE("linear probe separates gaussian blobs") {
  Rng rng(12);
  const std::size_t per = 30, classes = 3, dim = 6;
  Tensor x(Shape{per * classes, dim});
  std::vector<std::size_t> y;
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t i = 0; i < per; ++i) {
      const std::size_t r = c * per + i;
      for (std::size_t d = 0; d < dim; ++d) x.at(r, d) = 10.0 + 0.5 * rng.normal() + (d == c ? 3.0 : 0.0);
      y.push_back(c);
    }
  const LinearProbe probe = fit_linear_probe(x, y, classes);
  CHECK(accuracy_top1(probe.predict(x), y) >= 0.95);
  CHECK(probe.w.shape() == Shape{dim, classes});
}
