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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mavil/autodiff.hpp"
#include "mavil/masking.hpp"
#include "mavil/params.hpp"
#include "mavil/tokenizer.hpp"

namespace mavil {

enum class FusionVariant { Vanilla, MBT };
enum class TargetKind { RawPatches, LatentH };

struct ModelConfig {
  std::size_t width = 32;  // H
  std::size_t uni_depth = 2;
  std::size_t uni_heads = 4;
  std::size_t fusion_depth = 2;
  FusionVariant fusion_variant = FusionVariant::Vanilla;
  std::size_t mbt_tokens = 4;
  bool mbt_exchange = true;  // average bottleneck copies across modalities
  std::size_t decoder_width = 32;
  std::size_t decoder_depth = 2;
  std::size_t decoder_heads = 4;
  std::size_t mlp_ratio = 4;
  AudioGeometry audio;
  VideoGeometry video;
  TargetKind target_kind = TargetKind::RawPatches;
  bool use_cls = true;

  void validate() const;
  // Canonical text form; equal configs give equal strings.
  std::string canonical() const;
  std::string fingerprint() const;
  // Width and geometry only: what a teacher must share with its student.
  std::string tokenization_fingerprint() const;

  std::size_t decoder_out_dim(Modality m) const;

  // 1024x128 spectrograms, 8x3x224x224 clips, ViT-B encoders, 8x512 decoders.
  static ModelConfig full();
  // 64x16 spectrograms, 4x3x32x32 clips, H=32.
  static ModelConfig desk();
  // H=16, one layer each, used for gradient checks.
  static ModelConfig tiny();

  bool operator==(const ModelConfig&) const = default;
};

const char* fusion_name(FusionVariant v);
FusionVariant parse_fusion(const std::string& s);
const char* target_name(TargetKind k);
TargetKind parse_target(const std::string& s);

using ShapeMap = std::map<std::string, Shape>;

ShapeMap model_param_shapes(const ModelConfig& cfg);
std::size_t count_params(const ShapeMap& shapes, const std::string& prefix = "");

// Deterministic initialization; each tensor's values depend only on (seed, name).
ParamStore init_params(const ShapeMap& shapes, std::uint64_t seed);

struct ModelBundle {
  ModelConfig config;
  ParamStore params;
  std::string fingerprint() const { return config.fingerprint(); }
};

ModelBundle init_model(const ModelConfig& cfg, std::uint64_t seed);

std::string encoder_prefix(Modality m);  // "audio_enc." / "video_enc."
std::string decoder_prefix(Modality m);  // "audio_dec." / "video_dec."

// Pre-norm block: x + attn(ln1 x), then + mlp(ln2 x).
Var transformer_block(BoundParams& bp, const std::string& prefix, Var x, std::size_t heads);
Var multi_head_attention(BoundParams& bp, const std::string& prefix, Var x, std::size_t heads);

// patches @ W + b + fixed positional table, no CLS: [L, H].
Var embed_tokens(BoundParams& bp, const ModelConfig& cfg, Modality m, const Tensor& patches);

// Uni-modal Transformer over already embedded, positioned and masked tokens.
Var encode_unimodal(BoundParams& bp, const ModelConfig& cfg, Modality m, Var tokens);

// embed -> mask -> prepend CLS -> encode. Returns [has_cls + kept, H].
Var encode_view(BoundParams& bp, const ModelConfig& cfg, Modality m, const Tensor& patches,
                const MaskPlan& plan);

struct FusionOutput {
  Var a_mm;
  Var v_mm;
  std::vector<Tensor> bottleneck_trace;  // MBT: bottleneck after each layer
};

FusionOutput fuse_vanilla(BoundParams& bp, const ModelConfig& cfg, Var a_um, Var v_um);
FusionOutput fuse_mbt(BoundParams& bp, const ModelConfig& cfg, Var a_um, Var v_um);
FusionOutput fuse(BoundParams& bp, const ModelConfig& cfg, Var a_um, Var v_um);

// Project -> restore order with mask token -> decoder positions -> blocks ->
// linear head. Returns one row per patch token (CLS dropped).
Var decode(BoundParams& bp, const ModelConfig& cfg, Modality m, Var fused,
           const MaskPlan& plan);

// Mean over non-CLS rows: [1, H].
Var pool_embedding(Var um_tokens, bool has_cls);

enum class FinetuneMode { A, V, AV };
const char* finetune_mode_name(FinetuneMode m);
FinetuneMode parse_finetune_mode(const std::string& s);

struct ClassifierConfig {
  FinetuneMode mode = FinetuneMode::A;
  std::size_t num_classes = 4;
  std::size_t fusion_depth = 2;  // AV only; always a fresh vanilla stack
  bool operator==(const ClassifierConfig&) const = default;
};

ShapeMap classifier_param_shapes(const ModelConfig& cfg, const ClassifierConfig& ccfg);

// Pretrained encoders for the modalities `ccfg.mode` uses, plus fresh head
// (and fresh AV fusion stack).
ParamStore init_classifier(const ModelBundle& pretrained, const ClassifierConfig& ccfg,
                           std::uint64_t seed);

// A/V: pool then linear head. AV: fresh vanilla fusion over the concatenated
// token sets, pool non-CLS rows of the result, linear head. Returns [1, C].
Var classify(BoundParams& bp, const ModelConfig& cfg, const ClassifierConfig& ccfg,
             std::optional<Var> a_tokens, std::optional<Var> v_tokens);

// Pooled uni-modal embedding of the full (unmasked) input, outside any tape.
Tensor embed_instance(const ModelBundle& model, Modality m, const Tensor& raw_input);

Tensor patchify(const ModelConfig& cfg, Modality m, const Tensor& raw_input);

}  // namespace mavil
