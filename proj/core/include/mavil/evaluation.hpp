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

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mavil/tensor.hpp"

namespace mavil {

using LabelSets = std::vector<std::vector<std::size_t>>;

// Rank-based AP (precision at each positive, no interpolation), averaged over
// classes that have at least one positive. Ties rank the lower index first.
double mean_average_precision(const Tensor& scores, const LabelSets& labels);
double average_precision(const std::vector<double>& scores, const std::vector<bool>& positive);

// Argmax with ties broken toward the lowest class index.
std::size_t argmax_row(const Tensor& scores, std::size_t row);
double accuracy_top1(const Tensor& scores, const std::vector<std::size_t>& labels);

// Query i's true match is gallery row i. Cosine ranking; ties rank the lower
// gallery index first.
double recall_at_k(const Tensor& queries, const Tensor& gallery, std::size_t k);

enum class ClipAverage { Logits, Probabilities };

// Mean over clips (rows). Probabilities mode averages sigmoids and maps the
// mean back through the logit so the result stays on the logit scale.
Tensor multiclip_aggregate(const Tensor& per_clip_logits, ClipAverage mode = ClipAverage::Logits);

struct PredictionSet {
  std::vector<std::string> ids;
  Tensor scores;  // instances x classes, or instances x H for embeddings
  LabelSets labels;
  void validate() const;
};

struct MetricReport {
  std::string metric;
  double value = 0.0;
  std::size_t count = 0;
  std::string split;
  std::string fingerprint;
  void validate() const;  // value within [0, 1]
};

// Multinomial logistic regression on frozen features, full-batch gradient
// descent from zero weights. Features are standardized with train statistics.
struct LinearProbe {
  Tensor mean;   // [1, D]
  Tensor scale;  // [1, D]
  Tensor w;      // D x C
  Tensor b;      // [1, C]
  Tensor predict(const Tensor& features) const;
};

struct ProbeOptions {
  std::size_t iterations = 300;
  double lr = 0.5;
  double l2 = 1e-4;
};

LinearProbe fit_linear_probe(const Tensor& features, const std::vector<std::size_t>& labels,
                             std::size_t num_classes, const ProbeOptions& opts = {});

}  // namespace mavil
