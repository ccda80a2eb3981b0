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

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>

#include "mavil/config.hpp"
#include "mavil/data_io.hpp"
#include "mavil/evaluation.hpp"
#include "support.hpp"

using namespace mavil;
using mavil::testing::TempDir;
using mavil::testing::random_tensor;
namespace fs = std::filesystem;

namespace {

SynthConfig small_synth(std::size_t per_class = 4, double noise = 0.1) {
  SynthConfig sc;
  sc.per_class = per_class;
  sc.noise = noise;
  sc.spec_frames = 32;
  sc.spec_bins = 8;
  sc.video_frames = 2;
  sc.height = sc.width = 16;
  sc.square = 4;
  sc.seed = 17;
  return sc;
}

std::string bytes_of(const fs::path& p) { return io::read_file(p); }

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = bytes_of(e.path());
  return out;
}

}  // namespace

TEST_CASE("tensor file round trip") {
  TempDir dir("tensor");
  const Tensor t = random_tensor(Shape{3, 4, 5}, 1);
  io::save_tensor(dir.path() / "t.mvtn", t);
  const Tensor back = io::load_tensor(dir.path() / "t.mvtn");
  CHECK(back.shape() == t.shape());
  CHECK(std::memcmp(back.vec().data(), t.vec().data(), t.size() * sizeof(double)) == 0);

  const Tensor s = Tensor::scalar(-2.5);
  CHECK(io::decode_tensor(io::encode_tensor(s)) == s);
  CHECK(io::decode_tensor(io::encode_tensor(s)).shape().empty());

  const Tensor f = io::decode_tensor(io::encode_tensor(t, io::DType::F32));
  for (std::size_t i = 0; i < t.size(); ++i)
    CHECK(f.vec()[i] == static_cast<double>(static_cast<float>(t.vec()[i])));
  CHECK(io::encode_tensor(t, io::DType::F32).size() == 4 + 1 + 1 + 4 + 3 * 8 + 60 * 4);
}

TEST_CASE("tensor file rejects corrupt input") {
  const std::string good = io::encode_tensor(random_tensor(Shape{2, 2}, 3));
  std::string bad = good;
  bad[0] = 'X';
  CHECK_THROWS_WITH_AS(io::decode_tensor(bad), doctest::Contains("magic"), std::runtime_error);
  bad = good;
  bad[4] = 9;
  CHECK_THROWS_WITH_AS(io::decode_tensor(bad), doctest::Contains("version"), std::runtime_error);
  CHECK_THROWS_WITH_AS(io::decode_tensor(good.substr(0, good.size() - 3)),
                       doctest::Contains("expected 32"), std::runtime_error);
  CHECK_THROWS_AS(io::decode_tensor(good.substr(0, 3)), std::runtime_error);
  CHECK_THROWS_AS(io::decode_tensor(good + "zz"), std::runtime_error);
  CHECK_THROWS_AS(io::load_tensor("/nonexistent/x.mvtn"), std::runtime_error);
}

TEST_CASE("manifest records") {
  const io::ManifestRecord r{"syn-00001", {2, 0}, "tensors/a.mvtn", "tensors/v.mvtn", 0.32, 1.25};
  const std::string line = io::manifest_line(r);
  CHECK(line.find('\n') == std::string::npos);
  CHECK(io::parse_manifest_line(line) == r);
  CHECK_THROWS_AS(io::parse_manifest_line("{\"id\": 3}"), std::runtime_error);

  TempDir dir("manifest");
  fs::create_directories(dir.path() / "tensors");
  io::save_tensor(dir.path() / "tensors/a.mvtn", Tensor::scalar(1));
  io::save_tensor(dir.path() / "tensors/v.mvtn", Tensor::scalar(1));
  io::write_manifest(dir.path() / "m.jsonl", {r});
  CHECK(io::read_manifest(dir.path() / "m.jsonl", dir.path()) == std::vector{r});
  io::write_manifest(dir.path() / "dup.jsonl", {r, r});
  CHECK_THROWS_WITH_AS(io::read_manifest(dir.path() / "dup.jsonl", dir.path()),
                       doctest::Contains("duplicate"), std::runtime_error);
  io::ManifestRecord missing = r;
  missing.id = "other";
  missing.video = "tensors/gone.mvtn";
  io::write_manifest(dir.path() / "missing.jsonl", {missing});
  CHECK_THROWS_AS(io::read_manifest(dir.path() / "missing.jsonl", dir.path()), std::runtime_error);
}

TEST_CASE("synthetic dataset determinism and pairing") {
  const SynthConfig sc = small_synth();
  const Dataset a = generate(sc);
  const Dataset b = generate(sc);
  REQUIRE(a.items.size() == sc.size());
  for (std::size_t i = 0; i < a.items.size(); ++i) {
    CHECK(a.items[i].audio == b.items[i].audio);
    CHECK(a.items[i].video == b.items[i].video);
    CHECK(a.items[i].labels[0] == i % sc.num_classes);
  }
  CHECK(generate_instance(sc, 5).audio == a.items[5].audio);

  SynthConfig clean = sc;
  clean.noise = 0.0;
  PairedInstance x = generate_instance(clean, 1);
  PairedInstance y = generate_instance(clean, 2);
  y.labels = x.labels;
  y.phase = x.phase;
  render(clean, y);
  CHECK(x.audio == y.audio);
  CHECK(x.video == y.video);

  SynthConfig bad = sc;
  bad.num_classes = 1;
  CHECK_THROWS_AS(generate(bad), std::invalid_argument);
  bad = sc;
  bad.square = 40;
  CHECK_THROWS_AS(generate(bad), std::invalid_argument);
}

TEST_CASE("multi-label instances carry a second distinct label") {
  SynthConfig sc = small_synth(20);
  sc.multilabel = true;
  const Dataset d = generate(sc);
  std::size_t two = 0;
  for (const auto& inst : d.items) {
    if (inst.labels.size() == 2) {
      ++two;
      CHECK(inst.labels[0] != inst.labels[1]);
    }
  }
  CHECK(two > 10);
  CHECK(two < 40);
}

TEST_CASE("stratified split") {
  SynthConfig sc = small_synth(4);
  sc.num_classes = 2;
  const Dataset d = generate(sc);
  Rng rng(3);
  const Split sp = split(d, 0.5, rng);
  std::map<std::size_t, std::size_t> train_per_class;
  for (std::size_t i : sp.train) ++train_per_class[d.items[i].labels[0]];
  CHECK(train_per_class[0] == 2);
  CHECK(train_per_class[1] == 2);
  std::set<std::size_t> all(sp.train.begin(), sp.train.end());
  for (std::size_t i : sp.eval) CHECK(all.insert(i).second);
  CHECK(all.size() == d.items.size());
  CHECK_THROWS_AS(split(d, 1.0, rng), std::invalid_argument);
  sc.per_class = 1;
  CHECK_THROWS_AS(split(generate(sc), 0.5, rng), std::invalid_argument);
}

TEST_CASE("audio pooled means are linearly separable by class") {
  SynthConfig sc;
  sc.num_classes = 4;
  sc.per_class = 64;
  sc.noise = 0.1;
  const Dataset d = generate(sc);
  Rng rng(8);
  const Split sp = split(d, 0.75, rng);
  auto features = [&](const std::vector<std::size_t>& idx, std::vector<std::size_t>& labels) {
    Tensor f(Shape{idx.size(), sc.spec_bins});
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const Tensor& a = d.items[idx[r]].audio;
      for (std::size_t t = 0; t < a.rows(); ++t)
        for (std::size_t m = 0; m < a.cols(); ++m) f.at(r, m) += a.at(t, m) / static_cast<double>(a.rows());
      labels.push_back(d.items[idx[r]].labels[0]);
    }
    return f;
  };
  std::vector<std::size_t> ytr, yev;
  const Tensor xtr = features(sp.train, ytr);
  const Tensor xev = features(sp.eval, yev);
  const LinearProbe probe = fit_linear_probe(xtr, ytr, sc.num_classes);
  CHECK(accuracy_top1(probe.predict(xev), yev) >= 0.95);
}

TEST_CASE("dataset directory round trip is byte-stable") {
  const SynthConfig sc = small_synth();
  const Dataset d = generate(sc);
  Rng rng(1);
  const Split sp = split(d, 0.75, rng);
  TempDir a("ds-a"), b("ds-b");
  io::write_dataset(a.path(), d, sc, sp);
  io::write_dataset(b.path(), generate(sc), sc, sp);
  CHECK(tree_bytes(a.path()) == tree_bytes(b.path()));

  const Dataset back = io::read_dataset(a.path());
  REQUIRE(back.items.size() == d.items.size());
  CHECK(back.num_classes == d.num_classes);
  for (std::size_t i = 0; i < d.items.size(); ++i) {
    CHECK(back.items[i].id == d.items[i].id);
    CHECK(back.items[i].labels == d.items[i].labels);
    CHECK(back.items[i].audio == d.items[i].audio);
    CHECK(back.items[i].video == d.items[i].video);
  }
  CHECK(io::read_dataset(a.path(), "train").items.size() == sp.train.size());
  CHECK(io::read_dataset(a.path(), "eval").items.size() == sp.eval.size());
  CHECK_THROWS_AS(io::read_dataset(a.path(), "bogus"), std::exception);
}

TEST_CASE("checkpoint round trip and resume") {
  ModelConfig cfg = ModelConfig::tiny();
  SynthConfig sc = small_synth(2);
  sc.spec_frames = cfg.audio.time_frames;
  sc.spec_bins = cfg.audio.freq_bins;
  sc.video_frames = cfg.video.frames;
  const Dataset d = generate(sc);
  PretrainOptions o;
  o.train.epochs = 10;
  o.train.batch = 8;
  o.train.lr_base = 0.05;
  o.train.warmup_epochs = 2;
  o.train.seed = 4;
  TempDir dir("ckpt");

  std::vector<double> full;
  pretrain_stage1(cfg, d, o, [&](const StepRecord& r) { full.push_back(r.loss.total); });
  REQUIRE(full.size() == 10);

  std::vector<double> resumed;
  Pretrainer first(fresh_state(cfg, o.train, Stage::Stage1, 0), d, o);
  first.run([&](const StepRecord& r) { resumed.push_back(r.loss.total); }, 4);
  const io::Checkpoint ck{first.state(), o.train, o.mask, o.contrast, ""};
  const std::string fp = io::save_checkpoint(dir.path() / "s1", ck);
  const io::Checkpoint back = io::load_checkpoint(dir.path() / "s1");
  CHECK(back.fingerprint == fp);
  CHECK(back.state.model.params == first.state().model.params);
  CHECK(back.state.optimizer == first.state().optimizer);
  CHECK(back.state.global_step == 4);
  CHECK(back.train == o.train);
  CHECK_NOTHROW(io::check_resume(back, cfg, o.train));
  Pretrainer second(back.state, d, PretrainOptions{back.train, back.mask, back.contrast});
  second.run([&](const StepRecord& r) { resumed.push_back(r.loss.total); });
  CHECK(resumed == full);

  SUBCASE("resume mismatches") {
    TrainConfig other = o.train;
    other.lr_base = 1.0;
    CHECK_THROWS_AS(io::check_resume(back, cfg, other), std::runtime_error);
    ModelConfig wider = cfg;
    wider.width = 32;
    CHECK_THROWS_AS(io::check_resume(back, wider, o.train), std::runtime_error);
  }
  SUBCASE("stage tag and parent fingerprint") {
    TrainState s2 = fresh_state(student_config(cfg), o.train, Stage::Stage2, 2);
    s2.parent_fingerprint = "feedface";
    io::save_checkpoint(dir.path() / "s2", io::Checkpoint{s2, o.train, o.mask, o.contrast, ""});
    const io::Checkpoint c2 = io::load_checkpoint(dir.path() / "s2");
    CHECK(c2.state.stage == Stage::Stage2);
    CHECK(c2.state.iteration == 2);
    CHECK(c2.state.parent_fingerprint == "feedface");
    CHECK(c2.state.model.config.target_kind == TargetKind::LatentH);
  }
  SUBCASE("tampered parameters are detected") {
    fs::path victim;
    for (const auto& e : fs::directory_iterator(dir.path() / "s1" / "params")) victim = e.path();
    Tensor t = io::load_tensor(victim);
    t.vec()[0] += 1.0;
    io::save_tensor(victim, t);
    CHECK_THROWS_WITH_AS(io::load_checkpoint(dir.path() / "s1"), doctest::Contains("digest"),
                         std::runtime_error);
  }
  SUBCASE("format version is checked") {
    const fs::path header = dir.path() / "s1" / "header.json";
    std::string text = io::read_file(header);
    const auto at = text.find("\"format_version\": 1");
    REQUIRE(at != std::string::npos);
    text.replace(at, 19, "\"format_version\": 7");
    io::write_file_atomic(header, text);
    CHECK_THROWS_WITH_AS(io::load_checkpoint(dir.path() / "s1"), doctest::Contains("version"),
                         std::runtime_error);
  }
}

TEST_CASE("classifier checkpoint round trip") {
  ClassifierModel m;
  m.model = ModelConfig::tiny();
  m.head = ClassifierConfig{FinetuneMode::AV, 3, 1};
  m.params = init_classifier(init_model(m.model, 1), m.head, 2);
  FinetuneConfig fc;
  fc.mode = FinetuneMode::AV;
  TempDir dir("clf");
  io::save_classifier(dir.path() / "c", m, fc);
  const ClassifierModel back = io::load_classifier(dir.path() / "c");
  CHECK(back.params == m.params);
  CHECK(back.head == m.head);
  CHECK(back.model == m.model);
  CHECK_THROWS_AS(io::load_checkpoint(dir.path() / "c"), std::runtime_error);
}

TEST_CASE("lineage and metrics files") {
  TempDir dir("lineage");
  const std::vector<io::LineageRecord> recs{{"stage1", Stage::Stage1, 0, "aa", ""},
                                            {"stage2-1", Stage::Stage2, 1, "bb", "aa"}};
  io::write_lineage(dir.path() / "lineage.jsonl", recs);
  const auto back = io::read_lineage(dir.path() / "lineage.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[1].parent_fingerprint == "aa");
  CHECK(back[1].stage == Stage::Stage2);
  CHECK(back[1].checkpoint == "stage2-1");

  CHECK(io::metric_line({{"step", std::int64_t{3}}, {"loss", 0.5}, {"split", std::string("eval")}}) ==
        R"({"step":3,"loss":0.5,"split":"eval"})");
  {
    io::MetricsWriter w(dir.path() / "m.jsonl");
    w.write({{"a", std::int64_t{1}}});
    CHECK_FALSE(fs::exists(dir.path() / "m.jsonl"));
    w.write({{"a", std::int64_t{2}}});
  }
  CHECK(io::read_file(dir.path() / "m.jsonl") == "{\"a\":1}\n{\"a\":2}\n");
}

TEST_CASE("run config precedence and validation") {
  RunConfig c;
  CHECK(c.get_size("train.epochs") == 20);
  CHECK(c.get_double("train.lr_base") == 2e-4);
  CHECK(c.get_size("train.k_iters") == 3);
  CHECK(c.get_double("mask.ratio_audio") == 0.8);
  CHECK(c.get_double("finetune.mask_ratio") == 0.2);
  CHECK(c.get_double("finetune.video_lr_mult") == 0.5);
  CHECK(c.get_double("loss.alpha") == 0.1);
  CHECK(c.get_double("loss.beta") == 0.01);

  c.merge_json(R"({"train.epochs": 5, "train.lr_base": 1, "seed": 9})");
  CHECK(c.get_size("train.epochs") == 5);
  CHECK(c.get_double("train.lr_base") == 1.0);
  c.apply_override("train.epochs=7");
  CHECK(c.get_size("train.epochs") == 7);
  CHECK(c.train().epochs == 7);
  CHECK(c.train().seed == 9);

  CHECK_THROWS_AS(c.apply_override("train.nope=1"), ConfigError);
  CHECK_THROWS_AS(c.merge_json(R"({"bogus": 1})"), ConfigError);
  CHECK_THROWS_AS(c.apply_override("train.epochs=abc"), ConfigError);
  CHECK_THROWS_AS(c.apply_override("train.epochs=-3"), ConfigError);
  CHECK_THROWS_AS(c.apply_override("train.epochs"), ConfigError);
  CHECK_THROWS_AS(c.merge_json("[1, 2]"), ConfigError);

  RunConfig m;
  m.apply_override("model.preset=tiny");
  m.apply_override("model.width=24");
  CHECK(m.model().width == 24);
  CHECK(m.model().uni_depth == ModelConfig::tiny().uni_depth);
}

TEST_CASE("MAVIL_SEED has the lowest precedence") {
  ::setenv("MAVIL_SEED", "41", 1);
  RunConfig a;
  a.apply_env_seed();
  CHECK(a.get_int("seed") == 41);
  RunConfig b;
  b.merge_json(R"({"seed": 5})");
  b.apply_env_seed();
  CHECK(b.get_int("seed") == 5);
  RunConfig c;
  c.apply_env_seed();
  c.apply_override("seed=6");
  CHECK(c.get_int("seed") == 6);
  ::unsetenv("MAVIL_SEED");
}

TEST_CASE("atomic writes leave no temp files") {
  TempDir dir("atomic");
  io::write_file_atomic(dir.path() / "x.txt", "one");
  io::write_file_atomic(dir.path() / "x.txt", "two");
  CHECK(io::read_file(dir.path() / "x.txt") == "two");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.path())) ++files;
  CHECK(files == 1);
}
