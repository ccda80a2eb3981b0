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

#include "mavil/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "mavil/autodiff.hpp"

namespace mavil {
namespace {

std::vector<std::size_t> rank_desc(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

double row_norm(const Tensor& t, std::size_t r) {
  double s = 0.0;
  for (std::size_t c = 0; c < t.cols(); ++c) s += t.at(r, c) * t.at(r, c);
  return std::sqrt(s);
}

}  // namespace

double average_precision(const std::vector<double>& scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size())
    throw std::invalid_argument("average_precision: score/label length mismatch");
  const auto order = rank_desc(scores);
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (!positive[order[r]]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  if (hits == 0) throw std::invalid_argument("average_precision: no positives");
  return sum / static_cast<double>(hits);
}

double mean_average_precision(const Tensor& scores, const LabelSets& labels) {
  const std::size_t n = scores.rows(), k = scores.cols();
  if (labels.size() != n) {
    throw std::invalid_argument("mean_average_precision: " + std::to_string(n) +
                                " score rows vs " + std::to_string(labels.size()) + " label sets");
  }
  double total = 0.0;
  std::size_t classes = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> col(n);
    std::vector<bool> pos(n, false);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      col[i] = scores.at(i, c);
      pos[i] = std::find(labels[i].begin(), labels[i].end(), c) != labels[i].end();
      any = any || pos[i];
    }
    if (!any) continue;
    total += average_precision(col, pos);
    ++classes;
  }
  if (classes == 0) throw std::invalid_argument("mean_average_precision: no class has a positive");
  return total / static_cast<double>(classes);
}

std::size_t argmax_row(const Tensor& scores, std::size_t row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < scores.cols(); ++c)
    if (scores.at(row, c) > scores.at(row, best)) best = c;
  return best;
}

double accuracy_top1(const Tensor& scores, const std::vector<std::size_t>& labels) {
  if (labels.size() != scores.rows())
    throw std::invalid_argument("accuracy_top1: score rows and labels differ in count");
  if (labels.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += argmax_row(scores, i) == labels[i];
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double recall_at_k(const Tensor& queries, const Tensor& gallery, std::size_t k) {
  const std::size_t n = queries.rows(), g = gallery.rows();
  if (k == 0 || k > g) {
    throw std::invalid_argument("recall_at_k: k=" + std::to_string(k) + " outside [1, " +
                                std::to_string(g) + "]");
  }
  if (queries.cols() != gallery.cols())
    throw std::invalid_argument("recall_at_k: query and gallery widths differ");
  if (n > g) throw std::invalid_argument("recall_at_k: more queries than gallery items");
  std::vector<double> gnorm(g);
  for (std::size_t j = 0; j < g; ++j) gnorm[j] = row_norm(gallery, j);
  std::size_t hits = 0;
  std::vector<double> sim(g);
  for (std::size_t i = 0; i < n; ++i) {
    const double qn = row_norm(queries, i);
    for (std::size_t j = 0; j < g; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < queries.cols(); ++c) dot += queries.at(i, c) * gallery.at(j, c);
      const double denom = qn * gnorm[j];
      sim[j] = denom > 0.0 ? dot / denom : 0.0;
    }
    // rank of the true match = items strictly better, plus ties at lower index
    std::size_t better = 0;
    for (std::size_t j = 0; j < g; ++j)
      if (sim[j] > sim[i] || (sim[j] == sim[i] && j < i)) ++better;
    hits += better < k;
  }
  return n == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(n);
}

Tensor multiclip_aggregate(const Tensor& per_clip_logits, ClipAverage mode) {
  const std::size_t clips = per_clip_logits.rows(), c = per_clip_logits.cols();
  if (clips == 0) throw std::invalid_argument("multiclip_aggregate: no clips");
  Tensor out(Shape{c});
  auto& o = out.vec();
  for (std::size_t r = 0; r < clips; ++r) {
    for (std::size_t j = 0; j < c; ++j) {
      const double x = per_clip_logits.at(r, j);
      o[j] += mode == ClipAverage::Logits ? x : 1.0 / (1.0 + std::exp(-x));
    }
  }
  for (double& v : o) {
    v /= static_cast<double>(clips);
    if (mode == ClipAverage::Probabilities) v = std::log(v) - std::log1p(-v);
  }
  return out;
}

void PredictionSet::validate() const {
  if (ids.size() != scores.rows() || (!labels.empty() && labels.size() != ids.size())) {
    throw std::invalid_argument("PredictionSet: " + std::to_string(ids.size()) + " ids, " +
                                std::to_string(scores.rows()) + " score rows, " +
                                std::to_string(labels.size()) + " label sets");
  }
}

void MetricReport::validate() const {
  if (!(value >= 0.0 && value <= 1.0))
    throw std::out_of_range("metric " + metric + " = " + std::to_string(value) + " outside [0, 1]");
}

Tensor LinearProbe::predict(const Tensor& features) const {
  Tensor x = features;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j)
      x.at(i, j) = (x.at(i, j) - mean.vec()[j]) / scale.vec()[j];
  Tensor logits = matmul(x, w);
  for (std::size_t i = 0; i < logits.rows(); ++i)
    for (std::size_t j = 0; j < logits.cols(); ++j) logits.at(i, j) += b.vec()[j];
  return logits;
}

LinearProbe fit_linear_probe(const Tensor& features, const std::vector<std::size_t>& labels,
                             std::size_t num_classes, const ProbeOptions& opts) {
  const std::size_t n = features.rows(), d = features.cols();
  if (n == 0 || labels.size() != n) throw std::invalid_argument("fit_linear_probe: bad inputs");
  LinearProbe p;
  p.mean = Tensor(Shape{1, d});
  p.scale = Tensor(Shape{1, d}, 1.0);
  for (std::size_t j = 0; j < d; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += features.at(i, j);
    m /= static_cast<double>(n);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) v += (features.at(i, j) - m) * (features.at(i, j) - m);
    p.mean.vec()[j] = m;
    p.scale.vec()[j] = std::sqrt(v / static_cast<double>(n)) + 1e-8;
  }
  Tensor x = features;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) x.at(i, j) = (x.at(i, j) - p.mean.vec()[j]) / p.scale.vec()[j];
  p.w = Tensor(Shape{d, num_classes});
  p.b = Tensor(Shape{1, num_classes});
  for (std::size_t it = 0; it < opts.iterations; ++it) {
    Tape tape;
    Var w = tape.leaf(p.w, true), b = tape.leaf(p.b, true);
    Var logits = ops::add(ops::matmul(tape.constant(x), w), b);
    Var loss = ops::add(ops::cross_entropy(logits, labels),
                        ops::scale(ops::sum(ops::mul(w, w)), 0.5 * opts.l2));
    const Var wrt[] = {w, b};
    const auto g = tape.backward(loss, wrt);
    for (std::size_t k = 0; k < p.w.size(); ++k) p.w.vec()[k] -= opts.lr * g[0].vec()[k];
    for (std::size_t k = 0; k < p.b.size(); ++k) p.b.vec()[k] -= opts.lr * g[1].vec()[k];
  }
  return p;
}

}  // namespace mavil
