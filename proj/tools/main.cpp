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

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "images.hpp"
#include "mavil/config.hpp"
#include "mavil/data_io.hpp"
#include "mavil/evaluation.hpp"
#include "mavil/grad_check.hpp"
#include "mavil/training.hpp"

namespace fs = std::filesystem;
using namespace mavil;

namespace {

struct Options {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  std::string data;
  std::string checkpoint;
  std::string teacher;
  std::string resume;
  std::size_t iteration = 0;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

RunConfig load_config(const Options& o) {
  RunConfig c;
  if (!o.config.empty()) c.merge_file(o.config);
  for (const std::string& s : o.sets) c.apply_override(s);
  c.apply_env_seed();
  try {
    c.model().validate();
    c.mask();
    c.contrast().validate();
    c.train();
    c.finetune();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

const std::string& require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string("missing required option ") + flag);
  return value;
}

fs::path out_dir(const Options& o) {
  const fs::path dir = require(o.out, "--out");
  fs::create_directories(dir);
  return dir;
}

void save_config(const fs::path& dir, const RunConfig& c) {
  io::write_file_atomic(dir / "config.json", c.to_json() + "\n");
}

void print_metric(const std::string& name, double value, std::size_t count, const std::string& split) {
  std::printf("%-18s %.6f  (n=%zu, split=%s)\n", name.c_str(), value, count, split.c_str());
}

io::MetricFields report_fields(const MetricReport& r) {
  r.validate();
  return {{"kind", std::string("eval")},
          {"metric", r.metric},
          {"value", r.value},
          {"count", static_cast<std::int64_t>(r.count)},
          {"split", r.split},
          {"fingerprint", r.fingerprint}};
}

// Runs the trainer to completion, streaming metrics and checkpointing every
// `every` steps and at the end.
std::string run_trainer(Pretrainer& p, const PretrainOptions& opts, const fs::path& ckpt_dir,
                        io::MetricsWriter& metrics, std::size_t every) {
  auto save = [&] {
    return io::save_checkpoint(ckpt_dir, io::Checkpoint{p.state(), opts.train, opts.mask,
                                                        opts.contrast, ""});
  };
  while (p.state().global_step < p.total_steps()) {
    const StepRecord r = p.step();
    metrics.write(io::step_fields(r));
    if (every > 0 && p.state().global_step % every == 0 && p.state().global_step < p.total_steps())
      save();
  }
  return save();
}

PretrainOptions pretrain_options(const RunConfig& c) {
  return PretrainOptions{c.train(), c.mask(), c.contrast()};
}

// Metric lines of an interrupted run before `step`.
void copy_prior_metrics(const fs::path& path, std::uint64_t step, std::vector<std::string>& lines) {
  if (!fs::exists(path)) return;
  std::istringstream in(io::read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    const auto at = line.find("\"step\":");
    if (at != std::string::npos && std::stoull(line.substr(at + 7)) >= step) break;
    lines.push_back(line);
  }
}

// ------------------------------------------------------------- subcommands

int cmd_gen_synthetic(const Options& o) {
  const RunConfig c = load_config(o);
  const fs::path dir = out_dir(o);
  const SynthConfig sc = c.synth();
  const Dataset d = generate(sc);
  Rng rng(sc.seed, {0x5B17});
  const Split sp = split(d, c.get_double("data.train_frac"), rng);
  io::write_dataset(dir, d, sc, sp);
  save_config(dir, c);
  std::printf("wrote %zu instances (%zu train, %zu eval) to %s\n", d.items.size(), sp.train.size(),
              sp.eval.size(), dir.string().c_str());
  return 0;
}

int cmd_pretrain(const Options& o, Stage stage) {
  const RunConfig c = load_config(o);
  const fs::path dir = out_dir(o);
  const Dataset data = io::read_dataset(require(o.data, "--data"), "train");
  const PretrainOptions opts = pretrain_options(c);

  std::optional<TeacherSnapshot> teacher;
  ModelConfig model = c.model();
  if (stage == Stage::Stage2) {
    const io::Checkpoint t = io::load_checkpoint(require(o.teacher, "--teacher"));
    teacher = make_teacher(t.state.model, t.state.stage, t.state.iteration);
    model = student_config(t.state.model.config);
  }
  const std::size_t iteration =
      stage == Stage::Stage1 ? 0 : (o.iteration ? o.iteration : teacher->iteration + 1);

  TrainState state;
  std::vector<std::string> prior;
  if (!o.resume.empty()) {
    io::Checkpoint ck = io::load_checkpoint(o.resume);
    io::check_resume(ck, model, opts.train);
    if (ck.state.stage != stage) throw std::runtime_error("resume: checkpoint is from another stage");
    if (teacher && ck.state.parent_fingerprint != teacher->fingerprint)
      throw std::runtime_error("resume: checkpoint was taught by " + ck.state.parent_fingerprint +
                               ", not " + teacher->fingerprint);
    state = std::move(ck.state);
    copy_prior_metrics(dir / "metrics.jsonl", state.global_step, prior);
  } else if (stage == Stage::Stage1) {
    state = fresh_state(model, opts.train, stage, 0);
  } else {
    state = student_state(*teacher, opts.train, iteration);
  }

  Pretrainer p(std::move(state), data, opts, teacher ? &*teacher : nullptr);
  io::MetricsWriter metrics(dir / "metrics.jsonl");
  for (const std::string& line : prior) metrics.write_raw(line);
  const std::string fp = run_trainer(p, opts, dir / "checkpoint", metrics,
                                     c.get_size("train.checkpoint_every"));
  metrics.close();
  save_config(dir, c);
  std::printf("%s iteration %zu: %zu steps, checkpoint %s (%s)\n", stage_name(stage),
              p.state().iteration, p.total_steps(), (dir / "checkpoint").string().c_str(), fp.c_str());
  return 0;
}

int cmd_self_train(const Options& o) {
  const RunConfig c = load_config(o);
  const fs::path dir = out_dir(o);
  const Dataset data = io::read_dataset(require(o.data, "--data"), "train");
  const PretrainOptions opts = pretrain_options(c);
  const std::size_t every = c.get_size("train.checkpoint_every");
  if (opts.train.k_iters == 0) throw ConfigError("train.k_iters must be >= 1 for self-train");

  io::MetricsWriter metrics(dir / "metrics.jsonl");
  std::vector<io::LineageRecord> lineage;

  Pretrainer s1(fresh_state(c.model(), opts.train, Stage::Stage1, 0), data, opts);
  run_trainer(s1, opts, dir / "stage1", metrics, every);
  ModelBundle prev = s1.state().model;
  Stage prev_stage = Stage::Stage1;
  lineage.push_back({"stage1", Stage::Stage1, 0, snapshot_fingerprint(prev), ""});

  for (std::size_t k = 1; k <= opts.train.k_iters; ++k) {
    const TeacherSnapshot teacher = make_teacher(prev, prev_stage, k - 1);
    Pretrainer p(student_state(teacher, opts.train, k), data, opts, &teacher);
    const std::string name = "stage2-" + std::to_string(k);
    run_trainer(p, opts, dir / name, metrics, every);
    prev = p.state().model;
    prev_stage = Stage::Stage2;
    lineage.push_back({name, Stage::Stage2, k, snapshot_fingerprint(prev), teacher.fingerprint});
  }
  metrics.close();
  io::write_lineage(dir / "lineage.jsonl", lineage);
  save_config(dir, c);
  for (const auto& r : lineage)
    std::printf("%-10s %s  taught by %s\n", r.checkpoint.c_str(), r.fingerprint.c_str(),
                r.parent_fingerprint.empty() ? "-" : r.parent_fingerprint.c_str());
  return 0;
}

int cmd_finetune(const Options& o) {
  const RunConfig c = load_config(o);
  const fs::path dir = out_dir(o);
  const io::Checkpoint ck = io::load_checkpoint(require(o.checkpoint, "--checkpoint"));
  const Dataset data = io::read_dataset(require(o.data, "--data"), "train");
  FinetuneConfig fc = c.finetune();
  io::MetricsWriter metrics(dir / "metrics.jsonl");
  const ClassifierModel clf = finetune(ck.state.model, data, fc, [&](const FinetuneRecord& r) {
    metrics.write(io::finetune_fields(r));
  });
  metrics.close();
  const std::string fp = io::save_classifier(dir / "classifier", clf, fc);
  save_config(dir, c);
  std::printf("fine-tuned %s head on %zu instances, classifier %s (%s)\n",
              finetune_mode_name(fc.mode), data.items.size(),
              (dir / "classifier").string().c_str(), fp.c_str());
  return 0;
}

int cmd_eval_classify(const Options& o) {
  const RunConfig c = load_config(o);
  const fs::path dir = out_dir(o);
  const fs::path ckpt = require(o.checkpoint, "--checkpoint");
  const ClassifierModel clf = io::load_classifier(ckpt);
  const std::string split_name = c.get_string("eval.split");
  const Dataset data = io::read_dataset(require(o.data, "--data"), split_name);
  const std::size_t clips = clf.head.mode == FinetuneMode::A ? 1 : c.get_size("eval.clips");
  const ClipAverage avg =
      c.get_string("eval.clip_average") == "probs" ? ClipAverage::Probabilities : ClipAverage::Logits;
  if (c.get_string("eval.clip_average") != "probs" && c.get_string("eval.clip_average") != "logits")
    throw ConfigError("eval.clip_average must be logits|probs");

  const std::size_t n = data.items.size(), k = clf.head.num_classes;
  Tensor scores(Shape{n, k});
  LabelSets labels;
  std::vector<std::size_t> primary;
  for (std::size_t i = 0; i < n; ++i) {
    const PairedInstance& inst = data.items[i];
    const auto starts = clip_starts(inst.video.dim(0), clf.model.video.frames, clips);
    Tensor per_clip(Shape{clips, k});
    for (std::size_t j = 0; j < clips; ++j) {
      const Tensor l = predict_logits(clf, inst, starts[j]);
      for (std::size_t q = 0; q < k; ++q) per_clip.at(j, q) = l[q];
    }
    const Tensor agg = multiclip_aggregate(per_clip, avg);
    for (std::size_t q = 0; q < k; ++q) scores.at(i, q) = agg[q];
    labels.push_back(inst.labels);
    primary.push_back(inst.labels.front());
  }
  const std::string fp = clf.model.fingerprint();
  const std::vector<MetricReport> reports{
      {"mAP", mean_average_precision(scores, labels), n, split_name, fp},
      {"top1_accuracy", accuracy_top1(scores, primary), n, split_name, fp}};
  io::MetricsWriter metrics(dir / "eval_classify.jsonl");
  for (const auto& r : reports) {
    metrics.write(report_fields(r));
    print_metric(r.metric, r.value, r.count, r.split);
  }
  metrics.close();
  return 0;
}

int cmd_eval_retrieval(const Options& o) {
  const RunConfig c = load_config(o);
  const fs::path dir = out_dir(o);
  const io::Checkpoint ck = io::load_checkpoint(require(o.checkpoint, "--checkpoint"));
  const std::string split_name = c.get_string("eval.split");
  const Dataset data = io::read_dataset(require(o.data, "--data"), split_name);
  const ModelBundle& m = ck.state.model;
  const std::size_t n = data.items.size(), h = m.config.width;
  Tensor a(Shape{n, h}), v(Shape{n, h});
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor ea = embed_instance(m, Modality::Audio, data.items[i].audio);
    const Tensor ev =
        embed_instance(m, Modality::Video, clip_frames(data.items[i].video, 0, m.config.video.frames));
    for (std::size_t j = 0; j < h; ++j) {
      a.at(i, j) = ea[j];
      v.at(i, j) = ev[j];
    }
  }
  io::MetricsWriter metrics(dir / "eval_retrieval.jsonl");
  for (const auto& [name, q, g] : {std::tuple{"a2v", &a, &v}, std::tuple{"v2a", &v, &a}}) {
    for (std::size_t k : {1, 5, 10}) {
      if (k > n) continue;
      const MetricReport r{std::string(name) + "_recall@" + std::to_string(k), recall_at_k(*q, *g, k),
                           n, split_name, ck.fingerprint};
      metrics.write(report_fields(r));
      print_metric(r.metric, r.value, r.count, r.split);
    }
  }
  metrics.close();
  return 0;
}

int cmd_grad_check(const Options& o) {
  RunConfig c = load_config(o);
  if (!c.is_set("model.preset")) c.set("model.preset", "tiny");
  const ModelConfig cfg = c.model();
  const double eps = c.get_double("gradcheck.eps");
  const std::size_t coords = c.get_size("gradcheck.coords");
  const std::uint64_t seed = static_cast<std::uint64_t>(c.get_int("seed"));

  SynthConfig sc = c.synth();
  sc.per_class = 1;
  const Dataset d = generate(sc);
  std::vector<Tensor> ap, vp;
  for (std::size_t i = 0; i < 2; ++i) {
    ap.push_back(patchify(cfg, Modality::Audio, d.items[i].audio));
    vp.push_back(patchify(cfg, Modality::Video, clip_frames(d.items[i].video, 0, cfg.video.frames)));
  }
  const ContrastConfig contrast = c.contrast();
  const MaskConfig mask = c.mask();

  std::vector<PretrainSample> b1;
  for (std::size_t i = 0; i < 2; ++i) b1.push_back(make_sample(cfg, mask, seed, 0, i, &ap[i], &vp[i]));
  const ModelBundle m1 = init_model(cfg, Rng(seed, {0x6C1}).key());
  const GradCheckReport r1 = grad_check(
      [&](BoundParams& bp) { return pretrain_loss(bp, cfg, b1, contrast, Stage::Stage1).total; },
      m1.params, eps, coords, seed);

  const ModelConfig scfg = student_config(cfg);
  const TeacherSnapshot teacher = make_teacher(m1, Stage::Stage1, 0);
  std::vector<TeacherTargets> targets;
  for (std::size_t i = 0; i < 2; ++i) targets.push_back(make_teacher_targets(teacher, scfg, ap[i], vp[i]));
  std::vector<PretrainSample> b2;
  for (std::size_t i = 0; i < 2; ++i) {
    b2.push_back(make_sample(scfg, mask, seed, 0, i, &ap[i], &vp[i]));
    b2.back().targets = &targets[i];
  }
  const ModelBundle m2 = init_model(scfg, Rng(seed, {0x6C2}).key());
  const GradCheckReport r2 = grad_check(
      [&](BoundParams& bp) { return pretrain_loss(bp, scfg, b2, contrast, Stage::Stage2).total; },
      m2.params, eps, coords, seed);

  bool ok = true;
  for (const auto& [name, r] : {std::pair{"stage1", &r1}, std::pair{"stage2", &r2}}) {
    std::printf("%s max relative error %.3e over %zu coordinates (worst %s[%zu])\n", name,
                r->max_rel_error, r->coordinates, r->worst_param.c_str(), r->worst_index);
    ok = ok && r->max_rel_error < 1e-4;
  }
  if (!o.out.empty()) {
    io::MetricsWriter metrics(out_dir(o) / "grad_check.jsonl");
    for (const auto& [name, r] : {std::pair{"stage1", &r1}, std::pair{"stage2", &r2}})
      metrics.write({{"kind", std::string("grad_check")},
                     {"stage", std::string(name)},
                     {"max_rel_error", r->max_rel_error},
                     {"coordinates", static_cast<std::int64_t>(r->coordinates)}});
    metrics.close();
  }
  return ok ? 0 : 1;
}

int cmd_dump_recon(const Options& o) {
  const RunConfig c = load_config(o);
  const fs::path dir = out_dir(o);
  const io::Checkpoint ck = io::load_checkpoint(require(o.checkpoint, "--checkpoint"));
  const ModelBundle& m = ck.state.model;
  if (m.config.target_kind != TargetKind::RawPatches)
    throw std::runtime_error("dump-recon needs a stage-1 checkpoint (raw-patch decoder)");
  const Dataset data = io::read_dataset(require(o.data, "--data"), c.get_string("eval.split"));
  const std::size_t index = c.get_size("recon.index");
  if (index >= data.items.size())
    throw ConfigError("recon.index " + std::to_string(index) + " outside the split");
  const PairedInstance& inst = data.items[index];

  const Tensor ap = patchify(m.config, Modality::Audio, inst.audio);
  const Tensor vp = patchify(m.config, Modality::Video, clip_frames(inst.video, 0, m.config.video.frames));
  const PretrainSample s = make_sample(m.config, c.mask(), static_cast<std::uint64_t>(c.get_int("seed")),
                                       0, index, &ap, &vp);
  Tape tape;
  BoundParams bp(tape, m.params, false);
  const FusionOutput f = fuse(bp, m.config, encode_view(bp, m.config, Modality::Audio, ap, s.audio_plan),
                              encode_view(bp, m.config, Modality::Video, vp, s.video_plan));
  const Tensor ra = decode(bp, m.config, Modality::Audio, f.a_mm, s.audio_plan).value();
  const Tensor rv = decode(bp, m.config, Modality::Video, f.v_mm, s.video_plan).value();

  auto blank = [](Tensor patches, const MaskPlan& plan) {
    const double lo = *std::min_element(patches.vec().begin(), patches.vec().end());
    for (std::size_t r : plan.masked)
      for (std::size_t j = 0; j < patches.cols(); ++j) patches.at(r, j) = lo;
    return patches;
  };
  const AudioGeometry& ag = m.config.audio;
  const VideoGeometry& vg = m.config.video;
  tools::write_pnm(dir / "audio.pgm",
                   tools::side_by_side({tools::spectrogram_image(unpatchify_audio(ap, ag)),
                                        tools::spectrogram_image(unpatchify_audio(blank(ap, s.audio_plan), ag)),
                                        tools::spectrogram_image(unpatchify_audio(ra, ag))}));
  const Tensor v0 = unpatchify_video(vp, vg), v1 = unpatchify_video(blank(vp, s.video_plan), vg),
               v2 = unpatchify_video(rv, vg);
  std::vector<tools::Image> rows;
  for (std::size_t t = 0; t < vg.frames; ++t)
    rows.push_back(tools::side_by_side(
        {tools::frame_image(v0, t), tools::frame_image(v1, t), tools::frame_image(v2, t)}));
  tools::write_pnm(dir / (vg.channels == 3 ? "video.ppm" : "video.pgm"), tools::stacked(rows));
  std::printf("instance %s: %zu/%zu audio and %zu/%zu video patches masked; images in %s\n",
              inst.id.c_str(), s.audio_plan.masked.size(), ap.rows(), s.video_plan.masked.size(),
              vp.rows(), dir.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mavil: masked audio-video learner, desk scale"};
  app.require_subcommand(1);
  Options o;

  struct Sub {
    const char* name;
    const char* help;
    bool data, checkpoint, teacher, resume;
  };
  const std::vector<Sub> subs{
      {"gen-synthetic", "write a synthetic paired dataset", false, false, false, false},
      {"pretrain-stage1", "stage-1 pre-training with raw-patch targets", true, false, false, true},
      {"pretrain-stage2", "stage-2 student taught by a frozen checkpoint", true, false, true, true},
      {"self-train", "stage 1 then train.k_iters stage-2 iterations", true, false, false, false},
      {"finetune", "supervised fine-tuning of a pre-trained checkpoint", true, true, false, false},
      {"eval-classify", "mAP and top-1 accuracy of a fine-tuned classifier", true, true, false, false},
      {"eval-retrieval", "audio-video recall@k of a pre-trained checkpoint", true, true, false, false},
      {"grad-check", "finite-difference check of both pre-training losses", false, false, false, false},
      {"dump-recon", "masked input and reconstruction images", true, true, false, false},
  };
  std::map<std::string, CLI::App*> cmds;
  for (const Sub& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--config", o.config, "flat JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--set", o.sets, "override one key, key=value (repeatable)")->allow_extra_args(false);
    sub->add_option("--out", o.out, "output directory");
    if (s.data) sub->add_option("--data", o.data, "dataset directory");
    if (s.checkpoint) sub->add_option("--checkpoint", o.checkpoint, "checkpoint directory");
    if (s.teacher) {
      sub->add_option("--teacher", o.teacher, "teacher checkpoint directory");
      sub->add_option("--iteration", o.iteration, "stage-2 iteration (default teacher + 1)");
    }
    if (s.resume) sub->add_option("--resume", o.resume, "continue from this checkpoint");
    cmds[s.name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (argc > 1 && argv[1][0] != '-' && !cmds.count(argv[1]))
      std::cerr << "error: unknown subcommand '" << argv[1] << "'\n\n" << app.help();
    else
      std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  CLI::App* used = app.get_subcommands().front();
  const std::string name = used->get_name();
  try {
    if (name == "gen-synthetic") return cmd_gen_synthetic(o);
    if (name == "pretrain-stage1") return cmd_pretrain(o, Stage::Stage1);
    if (name == "pretrain-stage2") return cmd_pretrain(o, Stage::Stage2);
    if (name == "self-train") return cmd_self_train(o);
    if (name == "finetune") return cmd_finetune(o);
    if (name == "eval-classify") return cmd_eval_classify(o);
    if (name == "eval-retrieval") return cmd_eval_retrieval(o);
    if (name == "grad-check") return cmd_grad_check(o);
    if (name == "dump-recon") return cmd_dump_recon(o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << used->help();
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << used->help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
