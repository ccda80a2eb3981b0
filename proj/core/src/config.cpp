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

#include "mavil/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mavil {
namespace {

using json = nlohmann::json;
using I = std::int64_t;

const char* type_name(const ConfigValue& v) {
  switch (v.index()) {
    case 0: return "integer";
    case 1: return "number";
    case 2: return "boolean";
    default: return "string";
  }
}

Precision parse_precision(const std::string& s) {
  if (s == "f64") return Precision::F64;
  if (s == "f32") return Precision::F32;
  throw ConfigError("unknown precision '" + s + "' (expected f64|f32)");
}

ReconPositions parse_positions(const std::string& s) {
  if (s == "masked") return ReconPositions::MaskedOnly;
  if (s == "all") return ReconPositions::All;
  throw ConfigError("unknown target positions '" + s + "' (expected masked|all)");
}

ModelConfig preset(const std::string& name) {
  if (name == "desk") return ModelConfig::desk();
  if (name == "tiny") return ModelConfig::tiny();
  if (name == "full") return ModelConfig::full();
  throw ConfigError("unknown model preset '" + name + "' (expected desk|tiny|full)");
}

}  // namespace

const std::vector<ConfigKey>& RunConfig::schema() {
  static const std::vector<ConfigKey> keys = {
      {"seed", I{0}, "run seed; MAVIL_SEED overrides the default only"},

      {"model.preset", std::string("desk"), "desk|tiny|full; other model.* keys override it"},
      {"model.width", I{32}, "encoder width H"},
      {"model.uni_depth", I{2}, "uni-modal encoder blocks"},
      {"model.uni_heads", I{4}, "attention heads in encoders and fusion"},
      {"model.fusion_depth", I{2}, "joint fusion blocks"},
      {"model.fusion", std::string("vanilla"), "vanilla|mbt"},
      {"model.mbt_tokens", I{4}, "bottleneck tokens for mbt"},
      {"model.mbt_exchange", true, "average bottleneck copies across modalities"},
      {"model.decoder_width", I{32}, "decoder width"},
      {"model.decoder_depth", I{2}, "decoder blocks"},
      {"model.decoder_heads", I{4}, "decoder heads"},
      {"model.mlp_ratio", I{4}, "MLP hidden multiple"},
      {"model.use_cls", true, "prepend a CLS token"},
      {"model.audio.frames", I{64}, "spectrogram time frames"},
      {"model.audio.bins", I{16}, "spectrogram mel bins"},
      {"model.audio.patch_time", I{8}, "audio patch height in frames"},
      {"model.audio.patch_freq", I{8}, "audio patch width in bins"},
      {"model.video.frames", I{4}, "frames per clip"},
      {"model.video.channels", I{3}, "colour channels"},
      {"model.video.height", I{32}, "frame height"},
      {"model.video.width", I{32}, "frame width"},
      {"model.video.tubelet_time", I{2}, "tubelet depth in frames"},
      {"model.video.patch_h", I{8}, "tubelet height"},
      {"model.video.patch_w", I{8}, "tubelet width"},

      {"mask.ratio_audio", 0.8, "pre-training mask ratio, audio"},
      {"mask.ratio_video", 0.8, "pre-training mask ratio, video"},
      {"mask.strategy_audio", std::string("random"), "random|time_freq"},
      {"mask.strategy_video", std::string("random"), "random|space_time"},

      {"loss.alpha", 0.1, "inter-modal contrastive weight"},
      {"loss.beta", 0.01, "intra-modal contrastive weight"},
      {"loss.tau_inter", 0.1, "inter-modal temperature"},
      {"loss.tau_intra", 1.0, "intra-modal temperature"},

      {"train.epochs", I{20}, "pre-training epochs per stage"},
      {"train.k_iters", I{3}, "stage-2 self-training iterations"},
      {"train.batch", I{16}, "micro-batch size"},
      {"train.accum_steps", I{1}, "micro-batches per optimizer step"},
      {"train.lr_base", 2e-4, "base learning rate, scaled by batch/256"},
      {"train.warmup_epochs", 4.0, "linear warm-up epochs"},
      {"train.min_lr", 1e-6, "cosine floor"},
      {"train.weight_decay", 1e-5, "AdamW decoupled weight decay"},
      {"train.beta1", 0.9, "AdamW beta1"},
      {"train.beta2", 0.95, "AdamW beta2"},
      {"train.warm_start", false, "stage-2 student starts from the teacher weights"},
      {"train.ctx_target_norm", false, "layer-normalize teacher targets"},
      {"train.ctx_positions", std::string("masked"), "masked|all stage-2 regression positions"},
      {"train.precision", std::string("f64"), "f64|f32"},
      {"train.checkpoint_every", I{0}, "steps between intermediate checkpoints; 0 = end only"},

      {"finetune.mode", std::string("a"), "a|v|av"},
      {"finetune.mask_ratio", 0.2, "fine-tune mask ratio"},
      {"finetune.strategy_audio", std::string("time_freq"), "random|time_freq"},
      {"finetune.strategy_video", std::string("space_time"), "random|space_time"},
      {"finetune.video_lr_mult", 0.5, "video encoder lr multiplier in av mode"},
      {"finetune.loss", std::string("bce"), "bce|ce"},
      {"finetune.epochs", I{60}, "fine-tune epochs"},
      {"finetune.batch", I{16}, "fine-tune batch"},
      {"finetune.lr_base", 1e-3, "fine-tune base learning rate"},
      {"finetune.warmup_epochs", 4.0, "fine-tune warm-up epochs"},
      {"finetune.min_lr", 1e-6, "fine-tune cosine floor"},
      {"finetune.weight_decay", 1e-5, "fine-tune weight decay"},
      {"finetune.weighted_sampling", false, "class-balanced instance sampling"},
      {"finetune.sample_size", I{0}, "weighted draws per epoch; 0 = dataset size"},
      {"finetune.fusion_depth", I{2}, "fresh fusion blocks for av mode"},

      {"eval.split", std::string("eval"), "manifest|train|eval"},
      {"eval.clips", I{10}, "clips per instance for classification"},
      {"eval.clip_average", std::string("logits"), "logits|probs"},
      {"eval.probe_iters", I{300}, "linear-probe gradient steps"},

      {"data.num_classes", I{4}, "synthetic classes"},
      {"data.per_class", I{64}, "instances per class"},
      {"data.noise", 0.1, "Gaussian noise std"},
      {"data.spec_frames", I{64}, "spectrogram frames"},
      {"data.spec_bins", I{16}, "spectrogram bins"},
      {"data.video_frames", I{4}, "frames per synthetic video"},
      {"data.channels", I{3}, "video channels"},
      {"data.height", I{32}, "video height"},
      {"data.width", I{32}, "video width"},
      {"data.square", I{8}, "moving square side"},
      {"data.multilabel", false, "add a second label with probability 0.3"},
      {"data.train_frac", 0.75, "stratified train fraction"},

      {"gradcheck.eps", 1e-3, "finite-difference step"},
      {"gradcheck.coords", I{256}, "coordinates to check"},

      {"recon.index", I{0}, "instance index for dump-recon"},
  };
  return keys;
}

RunConfig::RunConfig() {
  for (const auto& k : schema()) values_[k.name] = k.default_value;
}

const ConfigValue& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

void RunConfig::set_value(const std::string& key, ConfigValue value) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  if (it->second.index() == 1 && value.index() == 0)
    value = static_cast<double>(std::get<I>(value));
  if (it->second.index() != value.index()) {
    throw ConfigError("config key '" + key + "' expects " + type_name(it->second) + ", got " +
                      type_name(value));
  }
  if (value.index() == 0 && std::get<I>(value) < 0 && key != "seed")
    throw ConfigError("config key '" + key + "' must be non-negative");
  it->second = std::move(value);
  explicit_.insert(key);
}

void RunConfig::set(const std::string& key, const std::string& text) {
  const ConfigValue& cur = get(key);
  try {
    switch (cur.index()) {
      case 0: {
        std::size_t used = 0;
        const long long v = std::stoll(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        set_value(key, I{v});
        return;
      }
      case 1: {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        set_value(key, v);
        return;
      }
      case 2:
        if (text == "true" || text == "1") return set_value(key, true);
        if (text == "false" || text == "0") return set_value(key, false);
        throw std::invalid_argument(text);
      default:
        set_value(key, text);
    }
  } catch (const std::logic_error&) {
    throw ConfigError("config key '" + key + "' expects " + type_name(cur) + ", got '" + text + "'");
  }
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

void RunConfig::merge_json(const std::string& json_text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError(origin + ": expected a flat JSON object");
  for (const auto& [key, v] : doc.items()) {
    if (v.is_boolean()) {
      set_value(key, v.get<bool>());
    } else if (v.is_number_integer()) {
      set_value(key, v.get<I>());
    } else if (v.is_number()) {
      set_value(key, v.get<double>());
    } else if (v.is_string()) {
      set_value(key, v.get<std::string>());
    } else {
      throw ConfigError(origin + ": key '" + key + "' must be a scalar");
    }
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  merge_json(ss.str(), path.string());
}

void RunConfig::apply_env_seed() {
  const char* env = std::getenv("MAVIL_SEED");
  if (env == nullptr || *env == '\0' || is_set("seed")) return;
  set("seed", env);
  explicit_.erase("seed");
}

std::int64_t RunConfig::get_int(const std::string& key) const { return std::get<I>(get(key)); }
std::size_t RunConfig::get_size(const std::string& key) const {
  return static_cast<std::size_t>(get_int(key));
}
double RunConfig::get_double(const std::string& key) const { return std::get<double>(get(key)); }
bool RunConfig::get_bool(const std::string& key) const { return std::get<bool>(get(key)); }
const std::string& RunConfig::get_string(const std::string& key) const {
  return std::get<std::string>(get(key));
}

std::string RunConfig::to_json() const {
  json doc = json::object();
  for (const auto& [k, v] : values_) std::visit([&](const auto& x) { doc[k] = x; }, v);
  return doc.dump(2);
}

ModelConfig RunConfig::model() const {
  ModelConfig c = preset(get_string("model.preset"));
  auto size = [&](const char* key, std::size_t& field) {
    if (is_set(key)) field = get_size(key);
  };
  size("model.width", c.width);
  size("model.uni_depth", c.uni_depth);
  size("model.uni_heads", c.uni_heads);
  size("model.fusion_depth", c.fusion_depth);
  if (is_set("model.fusion")) c.fusion_variant = parse_fusion(get_string("model.fusion"));
  size("model.mbt_tokens", c.mbt_tokens);
  if (is_set("model.mbt_exchange")) c.mbt_exchange = get_bool("model.mbt_exchange");
  size("model.decoder_width", c.decoder_width);
  size("model.decoder_depth", c.decoder_depth);
  size("model.decoder_heads", c.decoder_heads);
  size("model.mlp_ratio", c.mlp_ratio);
  if (is_set("model.use_cls")) c.use_cls = get_bool("model.use_cls");
  size("model.audio.frames", c.audio.time_frames);
  size("model.audio.bins", c.audio.freq_bins);
  size("model.audio.patch_time", c.audio.patch_time);
  size("model.audio.patch_freq", c.audio.patch_freq);
  size("model.video.frames", c.video.frames);
  size("model.video.channels", c.video.channels);
  size("model.video.height", c.video.height);
  size("model.video.width", c.video.width);
  size("model.video.tubelet_time", c.video.tubelet_time);
  size("model.video.patch_h", c.video.patch_h);
  size("model.video.patch_w", c.video.patch_w);
  c.validate();
  return c;
}

MaskConfig RunConfig::mask() const {
  MaskConfig m;
  m.ratio_audio = get_double("mask.ratio_audio");
  m.ratio_video = get_double("mask.ratio_video");
  m.strategy_audio = parse_strategy(get_string("mask.strategy_audio"));
  m.strategy_video = parse_strategy(get_string("mask.strategy_video"));
  return m;
}

ContrastConfig RunConfig::contrast() const {
  ContrastConfig c;
  c.alpha = get_double("loss.alpha");
  c.beta = get_double("loss.beta");
  c.tau_inter = get_double("loss.tau_inter");
  c.tau_intra = get_double("loss.tau_intra");
  c.validate();
  return c;
}

TrainConfig RunConfig::train() const {
  TrainConfig t;
  t.epochs = get_size("train.epochs");
  t.k_iters = get_size("train.k_iters");
  t.batch = get_size("train.batch");
  t.accum_steps = get_size("train.accum_steps");
  t.lr_base = get_double("train.lr_base");
  t.warmup_epochs = get_double("train.warmup_epochs");
  t.min_lr = get_double("train.min_lr");
  t.weight_decay = get_double("train.weight_decay");
  t.beta1 = get_double("train.beta1");
  t.beta2 = get_double("train.beta2");
  t.seed = static_cast<std::uint64_t>(get_int("seed"));
  t.warm_start = get_bool("train.warm_start");
  t.ctx_target_norm = get_bool("train.ctx_target_norm");
  t.ctx_positions = parse_positions(get_string("train.ctx_positions"));
  t.precision = parse_precision(get_string("train.precision"));
  return t;
}

FinetuneConfig RunConfig::finetune() const {
  FinetuneConfig f;
  f.mode = parse_finetune_mode(get_string("finetune.mode"));
  f.mask_ratio = get_double("finetune.mask_ratio");
  f.strategy_audio = parse_strategy(get_string("finetune.strategy_audio"));
  f.strategy_video = parse_strategy(get_string("finetune.strategy_video"));
  f.video_lr_mult = get_double("finetune.video_lr_mult");
  f.loss = parse_finetune_loss(get_string("finetune.loss"));
  f.epochs = get_size("finetune.epochs");
  f.batch = get_size("finetune.batch");
  f.lr_base = get_double("finetune.lr_base");
  f.warmup_epochs = get_double("finetune.warmup_epochs");
  f.min_lr = get_double("finetune.min_lr");
  f.weight_decay = get_double("finetune.weight_decay");
  f.weighted_sampling = get_bool("finetune.weighted_sampling");
  f.sample_size = get_size("finetune.sample_size");
  f.fusion_depth = get_size("finetune.fusion_depth");
  f.seed = static_cast<std::uint64_t>(get_int("seed"));
  return f;
}

SynthConfig RunConfig::synth() const {
  SynthConfig s;
  s.num_classes = get_size("data.num_classes");
  s.per_class = get_size("data.per_class");
  s.noise = get_double("data.noise");
  // Geometry keys left unset follow the model.
  const ModelConfig m = model();
  auto dim = [&](const std::string& key, std::size_t fallback) {
    return is_set(key) ? get_size(key) : fallback;
  };
  s.spec_frames = dim("data.spec_frames", m.audio.time_frames);
  s.spec_bins = dim("data.spec_bins", m.audio.freq_bins);
  s.video_frames = dim("data.video_frames", m.video.frames);
  s.channels = dim("data.channels", m.video.channels);
  s.height = dim("data.height", m.video.height);
  s.width = dim("data.width", m.video.width);
  s.square = dim("data.square", s.height / 4);
  s.multilabel = get_bool("data.multilabel");
  s.seed = static_cast<std::uint64_t>(get_int("seed"));
  s.validate();
  return s;
}

}  // namespace mavil
