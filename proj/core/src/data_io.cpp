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

#include "mavil/data_io.hpp"

#include <bit>
#include <cstring>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unistd.h>

#include "json.hpp"
#include "mavil/hash.hpp"

namespace mavil::io {
namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

constexpr char kMagic[4] = {'M', 'V', 'T', 'N'};

void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(std::string_view in, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

std::string tmp_name(const fs::path& path) {
  return path.string() + ".tmp-" + std::to_string(::getpid());
}

// ------------------------------------------------------------ config json

json to_json(const ModelConfig& c) {
  return json{{"width", c.width},
              {"uni_depth", c.uni_depth},
              {"uni_heads", c.uni_heads},
              {"fusion_depth", c.fusion_depth},
              {"fusion", fusion_name(c.fusion_variant)},
              {"mbt_tokens", c.mbt_tokens},
              {"mbt_exchange", c.mbt_exchange},
              {"decoder_width", c.decoder_width},
              {"decoder_depth", c.decoder_depth},
              {"decoder_heads", c.decoder_heads},
              {"mlp_ratio", c.mlp_ratio},
              {"use_cls", c.use_cls},
              {"target", target_name(c.target_kind)},
              {"audio", {c.audio.time_frames, c.audio.freq_bins, c.audio.patch_time, c.audio.patch_freq}},
              {"video",
               {c.video.frames, c.video.channels, c.video.height, c.video.width,
                c.video.tubelet_time, c.video.patch_h, c.video.patch_w}}};
}

ModelConfig model_from_json(const json& j) {
  ModelConfig c;
  c.width = j.at("width");
  c.uni_depth = j.at("uni_depth");
  c.uni_heads = j.at("uni_heads");
  c.fusion_depth = j.at("fusion_depth");
  c.fusion_variant = parse_fusion(j.at("fusion"));
  c.mbt_tokens = j.at("mbt_tokens");
  c.mbt_exchange = j.at("mbt_exchange");
  c.decoder_width = j.at("decoder_width");
  c.decoder_depth = j.at("decoder_depth");
  c.decoder_heads = j.at("decoder_heads");
  c.mlp_ratio = j.at("mlp_ratio");
  c.use_cls = j.at("use_cls");
  c.target_kind = parse_target(j.at("target"));
  const auto& a = j.at("audio");
  c.audio = AudioGeometry{a.at(0), a.at(1), a.at(2), a.at(3)};
  const auto& v = j.at("video");
  c.video = VideoGeometry{v.at(0), v.at(1), v.at(2), v.at(3), v.at(4), v.at(5), v.at(6)};
  return c;
}

const char* precision_name(Precision p) { return p == Precision::F64 ? "f64" : "f32"; }

json to_json(const TrainConfig& t) {
  return json{{"epochs", t.epochs},
              {"k_iters", t.k_iters},
              {"batch", t.batch},
              {"accum_steps", t.accum_steps},
              {"lr_base", t.lr_base},
              {"warmup_epochs", t.warmup_epochs},
              {"min_lr", t.min_lr},
              {"weight_decay", t.weight_decay},
              {"beta1", t.beta1},
              {"beta2", t.beta2},
              {"seed", t.seed},
              {"warm_start", t.warm_start},
              {"ctx_target_norm", t.ctx_target_norm},
              {"ctx_positions", t.ctx_positions == ReconPositions::All ? "all" : "masked"},
              {"precision", precision_name(t.precision)}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig t;
  t.epochs = j.at("epochs");
  t.k_iters = j.at("k_iters");
  t.batch = j.at("batch");
  t.accum_steps = j.at("accum_steps");
  t.lr_base = j.at("lr_base");
  t.warmup_epochs = j.at("warmup_epochs");
  t.min_lr = j.at("min_lr");
  t.weight_decay = j.at("weight_decay");
  t.beta1 = j.at("beta1");
  t.beta2 = j.at("beta2");
  t.seed = j.at("seed");
  t.warm_start = j.at("warm_start");
  t.ctx_target_norm = j.at("ctx_target_norm");
  t.ctx_positions = j.at("ctx_positions") == "all" ? ReconPositions::All : ReconPositions::MaskedOnly;
  t.precision = j.at("precision") == "f32" ? Precision::F32 : Precision::F64;
  return t;
}

json to_json(const MaskConfig& m) {
  return json{{"ratio_audio", m.ratio_audio},
              {"ratio_video", m.ratio_video},
              {"strategy_audio", strategy_name(m.strategy_audio)},
              {"strategy_video", strategy_name(m.strategy_video)}};
}

MaskConfig mask_from_json(const json& j) {
  MaskConfig m;
  m.ratio_audio = j.at("ratio_audio");
  m.ratio_video = j.at("ratio_video");
  m.strategy_audio = parse_strategy(j.at("strategy_audio"));
  m.strategy_video = parse_strategy(j.at("strategy_video"));
  return m;
}

json to_json(const ContrastConfig& c) {
  return json{{"alpha", c.alpha}, {"beta", c.beta}, {"tau_inter", c.tau_inter}, {"tau_intra", c.tau_intra}};
}

ContrastConfig contrast_from_json(const json& j) {
  return ContrastConfig{j.at("alpha"), j.at("beta"), j.at("tau_inter"), j.at("tau_intra")};
}

json to_json(const FinetuneConfig& f) {
  return json{{"mode", finetune_mode_name(f.mode)},
              {"mask_ratio", f.mask_ratio},
              {"strategy_audio", strategy_name(f.strategy_audio)},
              {"strategy_video", strategy_name(f.strategy_video)},
              {"video_lr_mult", f.video_lr_mult},
              {"loss", finetune_loss_name(f.loss)},
              {"epochs", f.epochs},
              {"batch", f.batch},
              {"lr_base", f.lr_base},
              {"warmup_epochs", f.warmup_epochs},
              {"min_lr", f.min_lr},
              {"weight_decay", f.weight_decay},
              {"weighted_sampling", f.weighted_sampling},
              {"sample_size", f.sample_size},
              {"fusion_depth", f.fusion_depth},
              {"seed", f.seed}};
}

Stage parse_stage(const std::string& s) {
  if (s == "stage1") return Stage::Stage1;
  if (s == "stage2") return Stage::Stage2;
  throw std::runtime_error("unknown stage tag '" + s + "'");
}

json parse_json_file(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void check_version(const json& header, const fs::path& path) {
  const int v = header.value("format_version", -1);
  if (v != kFormatVersion) {
    throw std::runtime_error(path.string() + ": format version " + std::to_string(v) +
                             " is not supported (expected " + std::to_string(kFormatVersion) + ")");
  }
}

json checkpoint_header(const Checkpoint& c) {
  json shapes = json::object();
  for (const auto& [name, t] : c.state.model.params) shapes[name] = t.shape();
  return json{{"format_version", kFormatVersion},
              {"kind", "pretrain"},
              {"model", to_json(c.state.model.config)},
              {"train", to_json(c.train)},
              {"mask", to_json(c.mask)},
              {"contrast", to_json(c.contrast)},
              {"stage", stage_name(c.state.stage)},
              {"iteration", c.state.iteration},
              {"parent_fingerprint", c.state.parent_fingerprint},
              {"rng", {{"seed", c.train.seed}, {"global_step", c.state.global_step}}},
              {"optimizer_step", c.state.optimizer.step},
              {"params_digest", params_digest(c.state.model.params)},
              {"param_shapes", shapes}};
}

void commit_directory(const fs::path& tmp, const fs::path& dir) {
  std::error_code ec;
  if (fs::exists(dir)) fs::remove_all(dir);
  fs::rename(tmp, dir, ec);
  if (ec) throw std::runtime_error("cannot move " + tmp.string() + " to " + dir.string() + ": " + ec.message());
}

fs::path fresh_tmp_dir(const fs::path& dir) {
  if (dir.has_parent_path()) fs::create_directories(dir.parent_path());
  const fs::path tmp = tmp_name(dir);
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  return tmp;
}

void save_params(const fs::path& root, const ParamStore& params) {
  fs::create_directories(root / "params");
  for (const auto& [name, t] : params) save_tensor(root / "params" / (name + ".mvtn"), t);
}

ParamStore load_params(const fs::path& root, const json& shapes) {
  ParamStore store;
  for (const auto& [name, shape] : shapes.items()) {
    Tensor t = load_tensor(root / "params" / (name + ".mvtn"));
    if (t.shape() != shape.get<Shape>()) {
      throw std::runtime_error(root.string() + ": parameter " + name + " has shape " +
                               shape_str(t.shape()) + ", header says " +
                               shape_str(shape.get<Shape>()));
    }
    store.add(name, std::move(t));
  }
  return store;
}

}  // namespace

// ------------------------------------------------------------ tensor files

std::string encode_tensor(const Tensor& t, DType dtype) {
  std::string out(kMagic, 4);
  out.push_back(static_cast<char>(kFormatVersion));
  out.push_back(static_cast<char>(dtype));
  put_le(out, t.rank(), 4);
  for (std::size_t d : t.shape()) put_le(out, d, 8);
  out.reserve(out.size() + t.size() * static_cast<std::size_t>(dtype));
  for (double v : t.vec()) {
    if (dtype == DType::F64) {
      put_le(out, std::bit_cast<std::uint64_t>(v), 8);
    } else {
      put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)), 4);
    }
  }
  return out;
}

Tensor decode_tensor(std::string_view bytes, const std::string& what) {
  auto fail = [&](const std::string& why) -> Tensor {
    throw std::runtime_error(what + ": " + why);
  };
  if (bytes.size() < 10) return fail("truncated header (" + std::to_string(bytes.size()) + " bytes)");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) return fail("bad magic, not an MVTN tensor file");
  const int version = static_cast<unsigned char>(bytes[4]);
  if (version != kFormatVersion) {
    return fail("unsupported tensor format version " + std::to_string(version) + " (expected " +
                std::to_string(kFormatVersion) + ")");
  }
  const int elem = static_cast<unsigned char>(bytes[5]);
  if (elem != 4 && elem != 8) return fail("unknown element type code " + std::to_string(elem));
  const std::uint64_t rank = get_le(bytes, 6, 4);
  std::size_t at = 10;
  if (bytes.size() < at + rank * 8) return fail("truncated dims");
  Shape shape(rank);
  for (auto& d : shape) {
    d = get_le(bytes, at, 8);
    at += 8;
  }
  const std::size_t n = shape_numel(shape);
  const std::size_t expected = at + n * static_cast<std::size_t>(elem);
  if (bytes.size() != expected) {
    return fail("payload is " + std::to_string(bytes.size() - at) + " bytes, expected " +
                std::to_string(n * static_cast<std::size_t>(elem)) + " for shape " + shape_str(shape));
  }
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i, at += elem) {
    data[i] = elem == 8 ? std::bit_cast<double>(get_le(bytes, at, 8))
                        : static_cast<double>(std::bit_cast<float>(
                              static_cast<std::uint32_t>(get_le(bytes, at, 4))));
  }
  return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const fs::path& path, const Tensor& t, DType dtype) {
  write_file_atomic(path, encode_tensor(t, dtype));
}

Tensor load_tensor(const fs::path& path) { return decode_tensor(read_file(path), path.string()); }

void write_file_atomic(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const std::string tmp = tmp_name(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("short write to " + tmp);
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------- manifests

std::string manifest_line(const ManifestRecord& r) {
  ojson j{{"id", r.id}, {"labels", r.labels},        {"audio", r.audio},
          {"video", r.video}, {"duration_s", r.duration_s}, {"phase", r.phase}};
  return j.dump();
}

ManifestRecord parse_manifest_line(std::string_view line) {
  try {
    const json j = json::parse(line);
    ManifestRecord r;
    r.id = j.at("id");
    r.labels = j.at("labels").get<std::vector<std::size_t>>();
    r.audio = j.at("audio");
    r.video = j.at("video");
    r.duration_s = j.value("duration_s", 0.0);
    r.phase = j.value("phase", 0.0);
    return r;
  } catch (const json::exception& e) {
    throw std::runtime_error("bad manifest record: " + std::string(e.what()));
  }
}

void write_manifest(const fs::path& path, const std::vector<ManifestRecord>& records) {
  std::string text;
  for (const auto& r : records) text += manifest_line(r) + "\n";
  write_file_atomic(path, text);
}

std::vector<ManifestRecord> read_manifest(const fs::path& path, const fs::path& root) {
  std::istringstream in(read_file(path));
  std::vector<ManifestRecord> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    ManifestRecord r;
    try {
      r = parse_manifest_line(line);
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!ids.insert(r.id).second)
      throw std::runtime_error(path.string() + ": duplicate id '" + r.id + "'");
    for (const auto* rel : {&r.audio, &r.video}) {
      if (!fs::exists(root / *rel))
        throw std::runtime_error(path.string() + ": '" + r.id + "' references missing " + *rel);
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_dataset(const fs::path& dir, const Dataset& data, const SynthConfig& cfg,
                   const Split& split) {
  std::vector<ManifestRecord> records;
  for (const auto& inst : data.items) {
    ManifestRecord r{inst.id, inst.labels, "tensors/" + inst.id + ".audio.mvtn",
                     "tensors/" + inst.id + ".video.mvtn", inst.duration_s, inst.phase};
    save_tensor(dir / r.audio, inst.audio);
    save_tensor(dir / r.video, inst.video);
    records.push_back(std::move(r));
  }
  auto pick = [&](const std::vector<std::size_t>& idx) {
    std::vector<ManifestRecord> out;
    for (std::size_t i : idx) out.push_back(records.at(i));
    return out;
  };
  write_manifest(dir / "manifest.jsonl", records);
  write_manifest(dir / "train.jsonl", pick(split.train));
  write_manifest(dir / "eval.jsonl", pick(split.eval));
  const json meta{{"format_version", kFormatVersion},
                  {"num_classes", data.num_classes},
                  {"size", data.items.size()},
                  {"synth",
                   {{"num_classes", cfg.num_classes},
                    {"per_class", cfg.per_class},
                    {"noise", cfg.noise},
                    {"spec", {cfg.spec_frames, cfg.spec_bins}},
                    {"video", {cfg.video_frames, cfg.channels, cfg.height, cfg.width}},
                    {"square", cfg.square},
                    {"multilabel", cfg.multilabel},
                    {"seed", cfg.seed}}}};
  write_file_atomic(dir / "dataset.json", meta.dump(2) + "\n");
}

Dataset read_dataset(const fs::path& dir, const std::string& which) {
  if (which != "manifest" && which != "train" && which != "eval")
    throw std::invalid_argument("read_dataset: split must be manifest|train|eval, got '" + which + "'");
  const json meta = parse_json_file(dir / "dataset.json");
  check_version(meta, dir / "dataset.json");
  Dataset data;
  data.num_classes = meta.at("num_classes");
  for (const auto& r : read_manifest(dir / (which + ".jsonl"), dir)) {
    PairedInstance inst;
    inst.id = r.id;
    inst.labels = r.labels;
    inst.audio = load_tensor(dir / r.audio);
    inst.video = load_tensor(dir / r.video);
    inst.duration_s = r.duration_s;
    inst.phase = r.phase;
    data.items.push_back(std::move(inst));
  }
  return data;
}

// -------------------------------------------------------------- checkpoints

std::string checkpoint_fingerprint(const Checkpoint& ckpt) {
  return hex64(fnv1a64(checkpoint_header(ckpt).dump()));
}

std::string save_checkpoint(const fs::path& dir, const Checkpoint& ckpt) {
  const fs::path tmp = fresh_tmp_dir(dir);
  json header = checkpoint_header(ckpt);
  const std::string fp = hex64(fnv1a64(header.dump()));
  header["fingerprint"] = fp;
  save_params(tmp, ckpt.state.model.params);
  fs::create_directories(tmp / "optim");
  for (const auto& [name, m] : ckpt.state.optimizer.moments) {
    save_tensor(tmp / "optim" / (name + ".m.mvtn"), m.first);
    save_tensor(tmp / "optim" / (name + ".v.mvtn"), m.second);
  }
  write_file_atomic(tmp / "header.json", header.dump(2) + "\n");
  commit_directory(tmp, dir);
  return fp;
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const fs::path hp = dir / "header.json";
  const json header = parse_json_file(hp);
  check_version(header, hp);
  if (header.value("kind", "") != "pretrain")
    throw std::runtime_error(hp.string() + ": not a pre-training checkpoint");
  Checkpoint c;
  try {
    c.state.model.config = model_from_json(header.at("model"));
    c.train = train_from_json(header.at("train"));
    c.mask = mask_from_json(header.at("mask"));
    c.contrast = contrast_from_json(header.at("contrast"));
    c.state.stage = parse_stage(header.at("stage"));
    c.state.iteration = header.at("iteration");
    c.state.parent_fingerprint = header.at("parent_fingerprint");
    c.state.global_step = header.at("rng").at("global_step");
    c.state.optimizer.step = header.at("optimizer_step");
    c.state.model.params = load_params(dir, header.at("param_shapes"));
  } catch (const json::exception& e) {
    throw std::runtime_error(hp.string() + ": " + e.what());
  }
  c.state.optimizer.config.beta1 = c.train.beta1;
  c.state.optimizer.config.beta2 = c.train.beta2;
  c.state.optimizer.config.weight_decay = c.train.weight_decay;
  for (const auto& [name, t] : c.state.model.params) {
    const fs::path m = dir / "optim" / (name + ".m.mvtn");
    if (!fs::exists(m)) continue;
    c.state.optimizer.moments[name] =
        Moments{load_tensor(m), load_tensor(dir / "optim" / (name + ".v.mvtn"))};
  }
  if (params_digest(c.state.model.params) != header.at("params_digest")) {
    throw std::runtime_error(dir.string() + ": parameter digest " +
                             params_digest(c.state.model.params) + " does not match header " +
                             header.at("params_digest").get<std::string>());
  }
  c.fingerprint = checkpoint_fingerprint(c);
  if (c.fingerprint != header.value("fingerprint", "")) {
    throw std::runtime_error(dir.string() + ": fingerprint mismatch (header " +
                             header.value("fingerprint", "") + ", contents " + c.fingerprint + ")");
  }
  return c;
}

void check_resume(const Checkpoint& ckpt, const ModelConfig& model, const TrainConfig& train) {
  if (ckpt.state.model.config.fingerprint() != model.fingerprint()) {
    throw std::runtime_error("resume: checkpoint model fingerprint " +
                             ckpt.state.model.config.fingerprint() +
                             " does not match configured model " + model.fingerprint());
  }
  if (!(ckpt.train == train)) {
    throw std::runtime_error("resume: checkpoint training config " + to_json(ckpt.train).dump() +
                             " differs from " + to_json(train).dump());
  }
}

std::string save_classifier(const fs::path& dir, const ClassifierModel& model,
                            const FinetuneConfig& cfg) {
  const fs::path tmp = fresh_tmp_dir(dir);
  json shapes = json::object();
  for (const auto& [name, t] : model.params) shapes[name] = t.shape();
  json header{{"format_version", kFormatVersion},
              {"kind", "classifier"},
              {"model", to_json(model.model)},
              {"head",
               {{"mode", finetune_mode_name(model.head.mode)},
                {"num_classes", model.head.num_classes},
                {"fusion_depth", model.head.fusion_depth}}},
              {"finetune", to_json(cfg)},
              {"params_digest", params_digest(model.params)},
              {"param_shapes", shapes}};
  const std::string fp = hex64(fnv1a64(header.dump()));
  header["fingerprint"] = fp;
  save_params(tmp, model.params);
  write_file_atomic(tmp / "header.json", header.dump(2) + "\n");
  commit_directory(tmp, dir);
  return fp;
}

ClassifierModel load_classifier(const fs::path& dir) {
  const fs::path hp = dir / "header.json";
  const json header = parse_json_file(hp);
  check_version(header, hp);
  if (header.value("kind", "") != "classifier")
    throw std::runtime_error(hp.string() + ": not a classifier checkpoint");
  ClassifierModel m;
  try {
    m.model = model_from_json(header.at("model"));
    const auto& h = header.at("head");
    m.head = ClassifierConfig{parse_finetune_mode(h.at("mode")), h.at("num_classes"), h.at("fusion_depth")};
    m.params = load_params(dir, header.at("param_shapes"));
  } catch (const json::exception& e) {
    throw std::runtime_error(hp.string() + ": " + e.what());
  }
  if (params_digest(m.params) != header.at("params_digest"))
    throw std::runtime_error(dir.string() + ": parameter digest mismatch");
  return m;
}

void write_lineage(const fs::path& path, const std::vector<LineageRecord>& records) {
  std::string text;
  for (const auto& r : records) {
    ojson j{{"checkpoint", r.checkpoint},     {"stage", stage_name(r.stage)},
            {"iteration", r.iteration},       {"fingerprint", r.fingerprint},
            {"parent_fingerprint", r.parent_fingerprint}};
    text += j.dump() + "\n";
  }
  write_file_atomic(path, text);
}

std::vector<LineageRecord> read_lineage(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<LineageRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    out.push_back(LineageRecord{j.at("checkpoint"), parse_stage(j.at("stage")), j.at("iteration"),
                                j.at("fingerprint"), j.at("parent_fingerprint")});
  }
  return out;
}

// ------------------------------------------------------------------ metrics

std::string metric_line(const MetricFields& fields) {
  ojson j = ojson::object();
  for (const auto& [k, v] : fields) std::visit([&](const auto& x) { j[k] = x; }, v);
  return j.dump();
}

MetricsWriter::MetricsWriter(fs::path path) : path_(std::move(path)), tmp_(tmp_name(path_)) {
  if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
  out_.open(tmp_, std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot write metrics to " + tmp_.string());
}

MetricsWriter::~MetricsWriter() {
  try {
    close();
  } catch (...) {
  }
}

void MetricsWriter::write(const MetricFields& fields) {
  if (!out_.is_open()) throw std::logic_error("MetricsWriter: write after close");
  out_ << metric_line(fields) << '\n';
}

void MetricsWriter::write_raw(const std::string& line) {
  if (!out_.is_open()) throw std::logic_error("MetricsWriter: write after close");
  out_ << line << '\n';
}

void MetricsWriter::close() {
  if (!out_.is_open()) return;
  out_.close();
  fs::rename(tmp_, path_);
}

MetricFields step_fields(const StepRecord& r) {
  return {{"kind", std::string("train_step")},
          {"stage", std::string(stage_name(r.stage))},
          {"iteration", static_cast<std::int64_t>(r.iteration)},
          {"step", static_cast<std::int64_t>(r.step)},
          {"epoch", static_cast<std::int64_t>(r.epoch)},
          {"lr", r.lr},
          {"loss_recon", r.loss.recon},
          {"loss_inter", r.loss.inter},
          {"loss_intra", r.loss.intra},
          {"loss_total", r.loss.total}};
}

MetricFields finetune_fields(const FinetuneRecord& r) {
  return {{"kind", std::string("finetune_step")},
          {"step", static_cast<std::int64_t>(r.step)},
          {"epoch", static_cast<std::int64_t>(r.epoch)},
          {"lr_audio", r.lr_audio},
          {"lr_video", r.lr_video},
          {"loss", r.loss}};
}

}  // namespace mavil::io
