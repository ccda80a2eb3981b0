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

#include "mavil/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mavil/hash.hpp"

namespace mavil {

const char* fusion_name(FusionVariant v) { return v == FusionVariant::MBT ? "mbt" : "vanilla"; }

FusionVariant parse_fusion(const std::string& s) {
  if (s == "vanilla") return FusionVariant::Vanilla;
  if (s == "mbt") return FusionVariant::MBT;
  throw std::invalid_argument("unknown fusion variant '" + s + "' (expected vanilla or mbt)");
}

const char* target_name(TargetKind k) { return k == TargetKind::LatentH ? "latent" : "raw"; }

TargetKind parse_target(const std::string& s) {
  if (s == "raw") return TargetKind::RawPatches;
  if (s == "latent") return TargetKind::LatentH;
  throw std::invalid_argument("unknown target kind '" + s + "' (expected raw or latent)");
}

const char* finetune_mode_name(FinetuneMode m) {
  switch (m) {
    case FinetuneMode::A: return "A";
    case FinetuneMode::V: return "V";
    case FinetuneMode::AV: return "AV";
  }
  return "?";
}

FinetuneMode parse_finetune_mode(const std::string& s) {
  if (s == "A" || s == "a") return FinetuneMode::A;
  if (s == "V" || s == "v") return FinetuneMode::V;
  if (s == "AV" || s == "av") return FinetuneMode::AV;
  throw std::invalid_argument("unknown fine-tune mode '" + s + "' (expected A, V or AV)");
}

void ModelConfig::validate() const {
  audio.validate();
  video.validate();
  if (width == 0 || uni_heads == 0 || width % uni_heads != 0) {
    throw std::invalid_argument("model: width " + std::to_string(width) +
                                " not divisible by uni_heads " + std::to_string(uni_heads));
  }
  if (decoder_width == 0 || decoder_heads == 0 || decoder_width % decoder_heads != 0) {
    throw std::invalid_argument("model: decoder_width " + std::to_string(decoder_width) +
                                " not divisible by decoder_heads " +
                                std::to_string(decoder_heads));
  }
  if (width % 8 != 0 || decoder_width % 8 != 0) {
    throw std::invalid_argument("model: widths must be multiples of 8 for sin-cos tables");
  }
  if (fusion_variant == FusionVariant::MBT && mbt_tokens == 0) {
    throw std::invalid_argument("model: MBT fusion needs at least one bottleneck token");
  }
}

std::string ModelConfig::canonical() const {
  std::ostringstream os;
  os << "width=" << width << ";uni_depth=" << uni_depth << ";uni_heads=" << uni_heads
     << ";fusion_depth=" << fusion_depth << ";fusion=" << fusion_name(fusion_variant)
     << ";mbt_tokens=" << mbt_tokens << ";mbt_exchange=" << mbt_exchange
     << ";decoder_width=" << decoder_width << ";decoder_depth=" << decoder_depth
     << ";decoder_heads=" << decoder_heads << ";mlp_ratio=" << mlp_ratio << ";audio="
     << audio.time_frames << 'x' << audio.freq_bins << '/' << audio.patch_time << 'x'
     << audio.patch_freq << ";video=" << video.frames << 'x' << video.channels << 'x'
     << video.height << 'x' << video.width << '/' << video.tubelet_time << 'x' << video.patch_h
     << 'x' << video.patch_w << ";target=" << target_name(target_kind) << ";cls=" << use_cls;
  return os.str();
}

std::string ModelConfig::fingerprint() const { return hex64(fnv1a64(canonical())); }

std::string ModelConfig::tokenization_fingerprint() const {
  std::ostringstream os;
  os << width << ';' << audio.time_frames << 'x' << audio.freq_bins << '/' << audio.patch_time
     << 'x' << audio.patch_freq << ';' << video.frames << 'x' << video.channels << 'x'
     << video.height << 'x' << video.width << '/' << video.tubelet_time << 'x' << video.patch_h
     << 'x' << video.patch_w << ';' << use_cls;
  return hex64(fnv1a64(os.str()));
}

std::size_t ModelConfig::decoder_out_dim(Modality m) const {
  if (target_kind == TargetKind::LatentH) return width;
  return m == Modality::Audio ? audio.patch_dim() : video.patch_dim();
}

ModelConfig ModelConfig::full() {
  ModelConfig c;
  c.width = 768;
  c.uni_depth = 12;
  c.uni_heads = 12;
  c.fusion_depth = 2;
  c.decoder_width = 512;
  c.decoder_depth = 8;
  c.decoder_heads = 16;
  c.audio = AudioGeometry{1024, 128, 16, 16};
  c.video = VideoGeometry{8, 3, 224, 224, 2, 16, 16};
  return c;
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.width = 16;
  c.uni_depth = 1;
  c.uni_heads = 2;
  c.fusion_depth = 1;
  c.decoder_width = 16;
  c.decoder_depth = 1;
  c.decoder_heads = 2;
  c.mlp_ratio = 2;
  c.audio = AudioGeometry{32, 8, 4, 4};
  c.video = VideoGeometry{2, 3, 16, 16, 2, 4, 4};
  return c;
}

std::string encoder_prefix(Modality m) {
  return m == Modality::Audio ? "audio_enc." : "video_enc.";
}

std::string decoder_prefix(Modality m) {
  return m == Modality::Audio ? "audio_dec." : "video_dec.";
}

namespace {

void add_linear(ShapeMap& s, const std::string& p, std::size_t in, std::size_t out) {
  s[p + ".w"] = Shape{in, out};
  s[p + ".b"] = Shape{1, out};
}

void add_norm(ShapeMap& s, const std::string& p, std::size_t width) {
  s[p + ".g"] = Shape{1, width};
  s[p + ".b"] = Shape{1, width};
}

void add_block(ShapeMap& s, const std::string& p, std::size_t width, std::size_t mlp_ratio) {
  add_norm(s, p + "ln1", width);
  add_linear(s, p + "attn.qkv", width, 3 * width);
  add_linear(s, p + "attn.proj", width, width);
  add_norm(s, p + "ln2", width);
  add_linear(s, p + "mlp.fc1", width, mlp_ratio * width);
  add_linear(s, p + "mlp.fc2", mlp_ratio * width, width);
}

std::string block_prefix(const std::string& stack, std::size_t i) {
  return stack + "blocks." + std::to_string(i) + ".";
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

ShapeMap model_param_shapes(const ModelConfig& cfg) {
  cfg.validate();
  ShapeMap s;
  const std::size_t h = cfg.width;
  for (Modality m : {Modality::Audio, Modality::Video}) {
    const std::string enc = encoder_prefix(m);
    const std::size_t pdim = m == Modality::Audio ? cfg.audio.patch_dim() : cfg.video.patch_dim();
    add_linear(s, enc + "patch", pdim, h);
    if (cfg.use_cls) s[enc + "cls"] = Shape{1, h};
    for (std::size_t i = 0; i < cfg.uni_depth; ++i) add_block(s, block_prefix(enc, i), h, cfg.mlp_ratio);
    if (cfg.uni_depth > 0) add_norm(s, enc + "norm", h);

    const std::string dec = decoder_prefix(m);
    const std::size_t d = cfg.decoder_width;
    add_linear(s, dec + "embed", h, d);
    s[dec + "mask_token"] = Shape{1, d};
    for (std::size_t i = 0; i < cfg.decoder_depth; ++i) add_block(s, block_prefix(dec, i), d, cfg.mlp_ratio);
    if (cfg.decoder_depth > 0) add_norm(s, dec + "norm", d);
    add_linear(s, dec + "pred", d, cfg.decoder_out_dim(m));
  }
  for (std::size_t i = 0; i < cfg.fusion_depth; ++i) add_block(s, block_prefix("fusion.", i), h, cfg.mlp_ratio);
  if (cfg.fusion_depth > 0) add_norm(s, "fusion.norm", h);
  if (cfg.fusion_variant == FusionVariant::MBT) s["fusion.bottleneck"] = Shape{cfg.mbt_tokens, h};
  return s;
}

std::size_t count_params(const ShapeMap& shapes, const std::string& prefix) {
  std::size_t n = 0;
  for (const auto& [name, shape] : shapes)
    if (name.compare(0, prefix.size(), prefix) == 0) n += shape_numel(shape);
  return n;
}

ParamStore init_params(const ShapeMap& shapes, std::uint64_t seed) {
  ParamStore store;
  for (const auto& [name, shape] : shapes) {
    Rng rng(seed, {fnv1a64(name)});
    Tensor t(shape);
    if (ends_with(name, ".w")) {
      t = xavier_uniform(shape[0], shape[1], rng);
    } else if (ends_with(name, ".g")) {
      t = Tensor(shape, 1.0);
    } else if (ends_with(name, ".b")) {
      t = Tensor(shape, 0.0);
    } else {
      t = normal_init(shape, 0.02, rng);  // cls, mask tokens, bottleneck
    }
    store.add(name, std::move(t));
  }
  return store;
}

ModelBundle init_model(const ModelConfig& cfg, std::uint64_t seed) {
  return ModelBundle{cfg, init_params(model_param_shapes(cfg), seed)};
}

namespace {

Var linear(BoundParams& bp, const std::string& p, Var x) {
  return ops::add(ops::matmul(x, bp.get(p + ".w")), bp.get(p + ".b"));
}

Var norm(BoundParams& bp, const std::string& p, Var x) {
  return ops::layer_norm(x, bp.get(p + ".g"), bp.get(p + ".b"));
}

}  // namespace

Var multi_head_attention(BoundParams& bp, const std::string& prefix, Var x, std::size_t heads) {
  const std::size_t h = x.cols();
  const std::size_t dh = h / heads;
  Var qkv = linear(bp, prefix + "qkv", x);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> outs;
  outs.reserve(heads);
  for (std::size_t k = 0; k < heads; ++k) {
    Var q = ops::slice(qkv, 1, k * dh, dh);
    Var kk = ops::slice(qkv, 1, h + k * dh, dh);
    Var v = ops::slice(qkv, 1, 2 * h + k * dh, dh);
    Var scores = ops::scale(ops::matmul(q, ops::transpose(kk)), scale);
    outs.push_back(ops::matmul(ops::softmax_rows(scores), v));
  }
  Var merged = heads == 1 ? outs.front() : ops::concat(outs, 1);
  return linear(bp, prefix + "proj", merged);
}

Var transformer_block(BoundParams& bp, const std::string& prefix, Var x, std::size_t heads) {
  Var y = ops::add(x, multi_head_attention(bp, prefix + "attn.", norm(bp, prefix + "ln1", x), heads));
  Var hidden = ops::gelu(linear(bp, prefix + "mlp.fc1", norm(bp, prefix + "ln2", y)));
  return ops::add(y, linear(bp, prefix + "mlp.fc2", hidden));
}

Tensor patchify(const ModelConfig& cfg, Modality m, const Tensor& raw) {
  return m == Modality::Audio ? patchify_audio(raw, cfg.audio) : patchify_video(raw, cfg.video);
}

Var embed_tokens(BoundParams& bp, const ModelConfig& cfg, Modality m, const Tensor& patches) {
  const std::string enc = encoder_prefix(m);
  const auto grid = m == Modality::Audio ? cfg.audio.grid() : cfg.video.grid();
  Tape& tape = bp.tape();
  Var x = linear(bp, enc + "patch", tape.constant(patches));
  return ops::add(x, tape.constant(sincos_pos_embed(grid, cfg.width)));
}

Var encode_unimodal(BoundParams& bp, const ModelConfig& cfg, Modality m, Var tokens) {
  if (tokens.cols() != cfg.width) {
    throw std::invalid_argument(std::string("encode_unimodal(") + modality_name(m) +
                                "): token width " + std::to_string(tokens.cols()) +
                                " does not match model width " + std::to_string(cfg.width));
  }
  const std::string enc = encoder_prefix(m);
  Var x = tokens;
  for (std::size_t i = 0; i < cfg.uni_depth; ++i)
    x = transformer_block(bp, block_prefix(enc, i), x, cfg.uni_heads);
  return cfg.uni_depth > 0 ? norm(bp, enc + "norm", x) : x;
}

Var encode_view(BoundParams& bp, const ModelConfig& cfg, Modality m, const Tensor& patches,
                const MaskPlan& plan) {
  Var tokens = apply_mask(embed_tokens(bp, cfg, m, patches), plan, false);
  if (cfg.use_cls) tokens = ops::concat({bp.get(encoder_prefix(m) + "cls"), tokens}, 0);
  return encode_unimodal(bp, cfg, m, tokens);
}

FusionOutput fuse_vanilla(BoundParams& bp, const ModelConfig& cfg, Var a_um, Var v_um) {
  if (a_um.cols() != v_um.cols()) {
    throw std::invalid_argument("fuse_vanilla: width mismatch " + std::to_string(a_um.cols()) +
                                " vs " + std::to_string(v_um.cols()));
  }
  if (cfg.fusion_depth == 0) return FusionOutput{a_um, v_um, {}};
  const std::size_t na = a_um.rows(), nv = v_um.rows();
  Var x = ops::concat({a_um, v_um}, 0);
  for (std::size_t i = 0; i < cfg.fusion_depth; ++i)
    x = transformer_block(bp, block_prefix("fusion.", i), x, cfg.uni_heads);
  x = norm(bp, "fusion.norm", x);
  return FusionOutput{ops::slice(x, 0, 0, na), ops::slice(x, 0, na, nv), {}};
}

FusionOutput fuse_mbt(BoundParams& bp, const ModelConfig& cfg, Var a_um, Var v_um) {
  if (a_um.cols() != v_um.cols()) {
    throw std::invalid_argument("fuse_mbt: width mismatch " + std::to_string(a_um.cols()) +
                                " vs " + std::to_string(v_um.cols()));
  }
  if (cfg.fusion_depth == 0) return FusionOutput{a_um, v_um, {}};
  const std::size_t na = a_um.rows(), nv = v_um.rows(), nb = cfg.mbt_tokens;
  Var b0 = bp.get("fusion.bottleneck");
  if (b0.rows() != nb) throw std::invalid_argument("fuse_mbt: bottleneck rows != mbt_tokens");
  Var a = a_um, v = v_um, b_for_a = b0, b_for_v = b0;
  FusionOutput out;
  for (std::size_t i = 0; i < cfg.fusion_depth; ++i) {
    const std::string p = block_prefix("fusion.", i);
    Var xa = transformer_block(bp, p, ops::concat({a, b_for_a}, 0), cfg.uni_heads);
    Var xv = transformer_block(bp, p, ops::concat({v, b_for_v}, 0), cfg.uni_heads);
    a = ops::slice(xa, 0, 0, na);
    v = ops::slice(xv, 0, 0, nv);
    Var ba = ops::slice(xa, 0, na, nb);
    Var bv = ops::slice(xv, 0, nv, nb);
    if (cfg.mbt_exchange) {
      Var b = ops::scale(ops::add(ba, bv), 0.5);
      b_for_a = b_for_v = b;
      out.bottleneck_trace.push_back(b.value());
    } else {
      b_for_a = ba;
      b_for_v = bv;
      out.bottleneck_trace.push_back(ba.value());
    }
  }
  out.a_mm = norm(bp, "fusion.norm", a);
  out.v_mm = norm(bp, "fusion.norm", v);
  return out;
}

FusionOutput fuse(BoundParams& bp, const ModelConfig& cfg, Var a_um, Var v_um) {
  return cfg.fusion_variant == FusionVariant::MBT ? fuse_mbt(bp, cfg, a_um, v_um)
                                                  : fuse_vanilla(bp, cfg, a_um, v_um);
}

Var decode(BoundParams& bp, const ModelConfig& cfg, Modality m, Var fused, const MaskPlan& plan) {
  const std::size_t num_tokens = m == Modality::Audio ? cfg.audio.num_tokens() : cfg.video.num_tokens();
  const std::size_t offset = cfg.use_cls ? 1 : 0;
  if (plan.num_tokens() != num_tokens || fused.rows() != offset + plan.kept.size()) {
    throw std::invalid_argument(std::string("decode(") + modality_name(m) + "): plan over " +
                                std::to_string(plan.num_tokens()) + " tokens keeping " +
                                std::to_string(plan.kept.size()) + " does not match " +
                                std::to_string(fused.rows()) + " fused rows of " +
                                std::to_string(num_tokens) + " tokens");
  }
  const std::string dec = decoder_prefix(m);
  Tape& tape = bp.tape();
  Var x = linear(bp, dec + "embed", fused);
  x = restore_order(x, plan, bp.get(dec + "mask_token"), cfg.use_cls);
  const auto grid = m == Modality::Audio ? cfg.audio.grid() : cfg.video.grid();
  Tensor pos = sincos_pos_embed(grid, cfg.decoder_width);
  if (cfg.use_cls) {
    Tensor padded(Shape{num_tokens + 1, cfg.decoder_width});
    std::copy(pos.vec().begin(), pos.vec().end(),
              padded.vec().begin() + static_cast<std::ptrdiff_t>(cfg.decoder_width));
    pos = std::move(padded);
  }
  x = ops::add(x, tape.constant(std::move(pos)));
  for (std::size_t i = 0; i < cfg.decoder_depth; ++i)
    x = transformer_block(bp, block_prefix(dec, i), x, cfg.decoder_heads);
  if (cfg.decoder_depth > 0) x = norm(bp, dec + "norm", x);
  x = linear(bp, dec + "pred", x);
  return offset ? ops::slice(x, 0, offset, num_tokens) : x;
}

Var pool_embedding(Var um_tokens, bool has_cls) {
  const std::size_t offset = has_cls ? 1 : 0;
  if (um_tokens.rows() <= offset) throw std::invalid_argument("pool_embedding: no tokens to pool");
  Var body = offset ? ops::slice(um_tokens, 0, offset, um_tokens.rows() - offset) : um_tokens;
  return ops::mean_rows(body);
}

ShapeMap classifier_param_shapes(const ModelConfig& cfg, const ClassifierConfig& ccfg) {
  ShapeMap full = model_param_shapes(cfg);
  ShapeMap s;
  for (const auto& [name, shape] : full) {
    const bool audio = name.rfind("audio_enc.", 0) == 0;
    const bool video = name.rfind("video_enc.", 0) == 0;
    if ((audio && ccfg.mode != FinetuneMode::V) || (video && ccfg.mode != FinetuneMode::A))
      s[name] = shape;
  }
  if (ccfg.mode == FinetuneMode::AV) {
    for (std::size_t i = 0; i < ccfg.fusion_depth; ++i)
      add_block(s, block_prefix("av_fusion.", i), cfg.width, cfg.mlp_ratio);
    if (ccfg.fusion_depth > 0) add_norm(s, "av_fusion.norm", cfg.width);
  }
  add_linear(s, "head", cfg.width, ccfg.num_classes);
  return s;
}

ParamStore init_classifier(const ModelBundle& pretrained, const ClassifierConfig& ccfg,
                           std::uint64_t seed) {
  if (ccfg.num_classes == 0) throw std::invalid_argument("init_classifier: zero classes");
  ParamStore store = init_params(classifier_param_shapes(pretrained.config, ccfg), seed);
  if (ccfg.mode != FinetuneMode::V) store.copy_prefix_from(pretrained.params, "audio_enc.");
  if (ccfg.mode != FinetuneMode::A) store.copy_prefix_from(pretrained.params, "video_enc.");
  return store;
}

Var classify(BoundParams& bp, const ModelConfig& cfg, const ClassifierConfig& ccfg,
             std::optional<Var> a_tokens, std::optional<Var> v_tokens) {
  const bool need_a = ccfg.mode != FinetuneMode::V;
  const bool need_v = ccfg.mode != FinetuneMode::A;
  if ((need_a && !a_tokens) || (need_v && !v_tokens)) {
    throw std::invalid_argument(std::string("classify: mode ") + finetune_mode_name(ccfg.mode) +
                                " needs " + (need_a && !a_tokens ? "audio" : "video") +
                                " tokens");
  }
  Var pooled;
  if (ccfg.mode == FinetuneMode::A) {
    pooled = pool_embedding(*a_tokens, cfg.use_cls);
  } else if (ccfg.mode == FinetuneMode::V) {
    pooled = pool_embedding(*v_tokens, cfg.use_cls);
  } else {
    const std::size_t na = a_tokens->rows(), nv = v_tokens->rows();
    Var x = ops::concat({*a_tokens, *v_tokens}, 0);
    for (std::size_t i = 0; i < ccfg.fusion_depth; ++i)
      x = transformer_block(bp, block_prefix("av_fusion.", i), x, cfg.uni_heads);
    if (ccfg.fusion_depth > 0) x = norm(bp, "av_fusion.norm", x);
    std::vector<std::size_t> body;
    const std::size_t off = cfg.use_cls ? 1 : 0;
    for (std::size_t i = off; i < na; ++i) body.push_back(i);
    for (std::size_t i = off; i < nv; ++i) body.push_back(na + i);
    if (body.empty()) throw std::invalid_argument("classify: no tokens to pool");
    pooled = ops::mean_rows(ops::gather_rows(x, body));
  }
  return linear(bp, "head", pooled);
}

Tensor embed_instance(const ModelBundle& model, Modality m, const Tensor& raw_input) {
  Tape tape;
  BoundParams bp(tape, model.params, false);
  const Tensor patches = patchify(model.config, m, raw_input);
  Var um = encode_view(bp, model.config, m, patches, keep_all_plan(patches.rows()));
  return pool_embedding(um, model.config.use_cls).value();
}

}  // namespace mavil
