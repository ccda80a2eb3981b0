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
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "mavil/data_synth.hpp"
#include "mavil/training.hpp"

namespace mavil::io {

namespace fs = std::filesystem;

inline constexpr int kFormatVersion = 1;

// ------------------------------------------------------------ tensor files
//
// Layout: "MVTN", u8 version, u8 element size (4 or 8), u32 rank, rank x u64
// dims, row-major little-endian IEEE-754 payload.

enum class DType : std::uint8_t { F32 = 4, F64 = 8 };

std::string encode_tensor(const Tensor& t, DType dtype = DType::F64);
Tensor decode_tensor(std::string_view bytes, const std::string& what = "tensor");
void save_tensor(const fs::path& path, const Tensor& t, DType dtype = DType::F64);
Tensor load_tensor(const fs::path& path);

// Writes to a sibling temp file and renames over `path`.
void write_file_atomic(const fs::path& path, std::string_view contents);
std::string read_file(const fs::path& path);

// ---------------------------------------------------------------- manifests

struct ManifestRecord {
  std::string id;
  std::vector<std::size_t> labels;
  std::string audio;  // path relative to the dataset directory
  std::string video;
  double duration_s = 0.0;
  double phase = 0.0;
  bool operator==(const ManifestRecord&) const = default;
};

std::string manifest_line(const ManifestRecord& r);
ManifestRecord parse_manifest_line(std::string_view line);
void write_manifest(const fs::path& path, const std::vector<ManifestRecord>& records);
// Rejects duplicate ids and records whose tensor files are missing under `root`.
std::vector<ManifestRecord> read_manifest(const fs::path& path, const fs::path& root);

// Dataset directory: dataset.json, manifest.jsonl, train.jsonl, eval.jsonl,
// tensors/<id>.audio.mvtn, tensors/<id>.video.mvtn.
void write_dataset(const fs::path& dir, const Dataset& data, const SynthConfig& cfg,
                   const Split& split);
Dataset read_dataset(const fs::path& dir, const std::string& which = "manifest");

// -------------------------------------------------------------- checkpoints

struct Checkpoint {
  TrainState state;
  TrainConfig train;
  MaskConfig mask;
  ContrastConfig contrast;
  std::string fingerprint;  // filled by save/load
};

// Fingerprint over the header fields and parameter names/shapes.
std::string checkpoint_fingerprint(const Checkpoint& ckpt);

// Directory with header.json, params/<name>.mvtn, optim/<name>.{m,v}.mvtn.
// Written to a temp directory and renamed into place.
std::string save_checkpoint(const fs::path& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const fs::path& dir);

// Throws when a checkpoint cannot continue under the given configuration.
void check_resume(const Checkpoint& ckpt, const ModelConfig& model, const TrainConfig& train);

std::string save_classifier(const fs::path& dir, const ClassifierModel& model,
                            const FinetuneConfig& cfg);
ClassifierModel load_classifier(const fs::path& dir);

// Lineage manifest for self-training: one record per checkpoint.
struct LineageRecord {
  std::string checkpoint;  // directory name relative to the run directory
  Stage stage = Stage::Stage1;
  std::size_t iteration = 0;
  std::string fingerprint;
  std::string parent_fingerprint;
};
void write_lineage(const fs::path& path, const std::vector<LineageRecord>& records);
std::vector<LineageRecord> read_lineage(const fs::path& path);

// ------------------------------------------------------------------ metrics

using MetricValue = std::variant<std::int64_t, double, std::string, bool>;
using MetricFields = std::vector<std::pair<std::string, MetricValue>>;

std::string metric_line(const MetricFields& fields);

// Line-delimited records written to `<path>.tmp` and renamed on close().
class MetricsWriter {
 public:
  explicit MetricsWriter(fs::path path);
  ~MetricsWriter();
  MetricsWriter(const MetricsWriter&) = delete;
  MetricsWriter& operator=(const MetricsWriter&) = delete;

  void write(const MetricFields& fields);
  void write_raw(const std::string& line);
  void close();

 private:
  fs::path path_;
  fs::path tmp_;
  std::ofstream out_;
};

MetricFields step_fields(const StepRecord& r);
MetricFields finetune_fields(const FinetuneRecord& r);

}  // namespace mavil::io
