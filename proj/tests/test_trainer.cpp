// Copyright 2026 The capadapt Authors.
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

#include <set>

#include "synth.hpp"
#include "test_util.hpp"
#include "trainer.hpp"

namespace capadapt {
namespace {

using testing::ExpectError;

// Records batch sizes; its snapshot is the number of batches seen.
class ScriptedLearner : public Learner {
 public:
  ScriptedLearner() : Learner({"scripted", 1}) {}
  std::string kind() const override { return "scripted"; }
  void ObserveBatch(std::span<const Observation> batch) override { batch_sizes.push_back(batch.size()); }
  std::vector<std::string> Generate(const Feature&) const override { return {"a", "photo"}; }
  bool trained() const override { return true; }
  void BeginPretrainPhase(int phase) override { phases.push_back(phase); }
  std::string Snapshot() const override { return std::to_string(batch_sizes.size()); }
  void Restore(std::string_view s) override { restored = std::string(s); }
  std::unique_ptr<Learner> Clone() const override { return std::make_unique<ScriptedLearner>(*this); }

  std::vector<std::size_t> batch_sizes;
  std::vector<int> phases;
  std::string restored;
};

RunConfig QuietConfig() {
  RunConfig cfg;
  cfg.memory_enabled = false;
  cfg.max_epochs = 100;
  return cfg;
}

EarlyStopResult Scripted(ScriptedLearner& l, std::vector<double> scores, int patience) {
  std::size_t i = 0;
  return TrainWithEarlyStopping(
      l, patience, 100, [&](int) { l.ObserveBatch({}); },
      [&]() { return i < scores.size() ? scores[i++] : scores.back(); });
}

std::vector<Task> SynthTasks() {
  return {MakeSynthTask(1, 0, 20, 4, 6, 3, 11, 16, 16), MakeSynthTask(2, 1, 20, 4, 6, 3, 12, 16, 16)};
}

TEST_SUITE("trainer") {
  TEST_CASE("patience two stops after the third epoch and restores the first") {
    ScriptedLearner l;
    const auto r = Scripted(l, {0.30, 0.28, 0.27}, 2);
    CHECK(r.epochs_run == 3);
    CHECK(r.best_epoch == 1);
    CHECK(l.restored == "1");
    CHECK(r.scores == std::vector<double>{0.30, 0.28, 0.27});
  }

  TEST_CASE("improvement resets the strike count") {
    ScriptedLearner l;
    const auto r = Scripted(l, {0.1, 0.1, 0.2, 0.15, 0.1, 0.3}, 2);
    CHECK(r.epochs_run == 5);
    CHECK(r.best_epoch == 3);
    CHECK(l.restored == "3");
  }

  TEST_CASE("never-improving score runs patience plus one epochs") {
    ScriptedLearner l;
    const auto r = Scripted(l, {0.5}, 20);
    CHECK(r.epochs_run == 21);
    CHECK(r.best_epoch == 1);
    ExpectError(ErrorCode::kConfig, [&] { Scripted(l, {0.5}, 0); });
  }

  TEST_CASE("max epochs caps the loop") {
    ScriptedLearner l;
    std::vector<double> rising;
    for (int i = 0; i < 200; ++i) rising.push_back(i);
    std::size_t i = 0;
    const auto r = TrainWithEarlyStopping(l, 2, 7, [&](int) {}, [&] { return rising[i++]; });
    CHECK(r.epochs_run == 7);
    CHECK(r.best_epoch == 7);
  }

  TEST_CASE("pretraining runs two phases against a shared incumbent") {
    const Task t = MakeSynthTask(1, 0, 6, 3, 0, 2, 5, 8, 8);
    auto stub = std::make_unique<ScriptedLearner>();
    ScriptedLearner* raw = stub.get();
    EventLog log;
    TrainSession s(QuietConfig(), std::move(stub), &log);
    const auto phases = s.Pretrain(t.train, t.val);
    REQUIRE(phases.size() == 2);
    CHECK(phases[0].epochs_run == 21);
    CHECK(phases[1].epochs_run == 20);
    CHECK(phases[1].best_epoch == 0);
    CHECK(raw->phases == std::vector<int>{1, 2});
    CHECK(log.Count("pretrain_phase") == 2);
    ExpectError(ErrorCode::kInvalidArgument, [&] { s.Pretrain({}, t.val); });
  }

  TEST_CASE("retrieval pretraining stores every base sample and is deterministic") {
    const Task t = MakeSynthTask(1, 0, 20, 4, 0, 5, 5, 12, 12);
    RunConfig cfg = QuietConfig();
    cfg.patience_pretrain = 2;
    TrainSession a(cfg, MakeLearner(cfg.learner)), b(cfg, MakeLearner(cfg.learner));
    a.Pretrain(t.train, t.val);
    b.Pretrain(t.train, t.val);
    CHECK(static_cast<const RetrievalLearner&>(a.learner()).size() == 100);
    CHECK(a.learner().Snapshot() == b.learner().Snapshot());
  }

  TEST_CASE("image augmentation turns 64 samples into two batches of 320") {
    const Task t = MakeSynthTask(1, 0, 64, 0, 0, 1, 3, 8, 8);
    RunConfig cfg = QuietConfig();
    cfg.augment.mode = AugmentMode::kImg;
    auto stub = std::make_unique<ScriptedLearner>();
    ScriptedLearner* raw = stub.get();
    testing::WarningCapture warnings;
    TrainSession s(cfg, std::move(stub));
    const TaskLog log = s.AdaptTask(t);
    CHECK(log.single_epoch_fallback);
    CHECK(warnings.Contains("no validation split"));
    CHECK(raw->batch_sizes == std::vector<std::size_t>{320, 320});
    REQUIRE(log.epochs.size() == 1);
    CHECK(log.epochs[0].batches == 2);
    CHECK(log.epochs[0].samples_observed == 640);
    CHECK(s.global_batches() == 2);
    CHECK(s.replay_events() == 0);
    CHECK(s.counters().non_train_inputs == 0);
  }

  TEST_CASE("replay batches are concatenated onto the expanded batch") {
    const Task t = MakeSynthTask(1, 0, 64, 0, 0, 1, 3, 8, 8);
    RunConfig cfg = QuietConfig();
    cfg.augment.mode = AugmentMode::kImg;
    cfg.memory_enabled = true;
    cfg.memory.write_prob = 1.0;
    cfg.memory.replay_every = 1;
    auto stub = std::make_unique<ScriptedLearner>();
    ScriptedLearner* raw = stub.get();
    testing::WarningCapture quiet;
    EventLog log;
    TrainSession s(cfg, std::move(stub), &log);
    s.AdaptTask(t);
    CHECK(raw->batch_sizes == std::vector<std::size_t>{352, 352});
    CHECK(s.replay_events() == 2);
    CHECK(log.Count("replay") == 2);
    CHECK(log.Count("batch") == 2);
    CHECK(s.memory()->size() == 64);
  }

  TEST_CASE("empty training split is rejected") {
    Task t = MakeSynthTask(1, 0, 1, 1, 0, 1, 3, 8, 8);
    t.train.clear();
    TrainSession s(QuietConfig(), std::make_unique<ScriptedLearner>());
    ExpectError(ErrorCode::kInvalidArgument, [&] { s.AdaptTask(t); });
  }

  TEST_CASE("adaptation restores the best validation epoch") {
    const auto tasks = SynthTasks();
    RunConfig cfg;
    cfg.patience_pretrain = 2;
    cfg.memory.replay_every = 4;
    TrainSession s(cfg, MakeLearner(cfg.learner));
    s.Pretrain(tasks[1].train, tasks[1].val);
    const TaskLog log = s.AdaptTask(tasks[0]);
    double best = 0;
    for (const auto& e : log.epochs) best = std::max(best, e.val_bleu4);
    CHECK(log.best_val_bleu4 == best);
    CHECK(Bleu4(s.Predict(tasks[0].val)) == doctest::Approx(best));
  }

  TEST_CASE("sequence grids are lower triangular and reproducible") {
    const auto tasks = SynthTasks();
    RunConfig cfg;
    cfg.task_order = {1, 2};
    cfg.augment.mode = AugmentMode::kBoth;
    cfg.augment.factor = 3;
    cfg.memory.replay_every = 2;
    auto run = [&](const RunConfig& c) {
      TrainSession s(c, MakeLearner(c.learner));
      return RunSequence(s, tasks);
    };
    const auto a = run(cfg), b = run(cfg);
    REQUIRE(a.steps.size() == 2);
    CHECK(a.steps[0].report.rows.size() == 2);
    CHECK(a.steps[1].report.rows.size() == 3);
    for (GridMetric m : {GridMetric::kBleu4, GridMetric::kRougeL, GridMetric::kCiderD})
      CHECK(GridToCsv(a.steps, m) == GridToCsv(b.steps, m));
    CHECK(SequenceToJson(a) == SequenceToJson(b));
    CHECK(a.counters.non_train_inputs == 0);
    const std::string csv = GridToCsv(a.steps, GridMetric::kBleu4);
    CHECK(csv.rfind("eval,+1,+2\n", 0) == 0);

    RunConfig single = cfg;
    single.task_order = {1};
    const auto one = run(single);
    CHECK(one.steps[0].report.rows[0].scores == a.steps[0].report.rows[0].scores);

    RunConfig unknown = cfg;
    unknown.task_order = {1, 9};
    ExpectError(ErrorCode::kConfig, [&] { run(unknown); });
    RunConfig dup = cfg;
    dup.task_order = {1, 1};
    ExpectError(ErrorCode::kConfig, [&] { run(dup); });
  }

  TEST_CASE("memory ablation keeps replay out of the memory-off run") {
    const auto tasks = SynthTasks();
    RunConfig cfg;
    cfg.task_order = {1, 2};
    cfg.memory.replay_every = 2;
    RetrievalLearner pretrained;
    const auto ab = AblateMemory(cfg, pretrained, tasks);
    CHECK(ab.without_memory.replay_events == 0);
    CHECK(ab.with_memory.replay_events > 0);
    CHECK(ab.with_memory.steps[0].report.rows[0].scores == ab.without_memory.steps[0].report.rows[0].scores);
    const std::string csv = MemoryAblationToCsv(ab, GridMetric::kBleu4);
    CHECK(csv.find("mem+") != std::string::npos);
    CHECK(csv.find("mem-") != std::string::npos);
  }

  TEST_CASE("fraction subsampling") {
    Task t;
    t.cluster_id = 4;
    for (int i = 0; i < 333; ++i) t.train.push_back({std::to_string(i), nullptr, {}});
    CHECK(SubsampleTask(t, 0.5, 1).train.size() == 166);
    CHECK(SubsampleTask(t, 1.0, 1).train.size() == 333);
    const auto sub = SubsampleTask(t, 0.1, 2);
    CHECK(sub.train.size() == 33);
    CHECK(std::is_sorted(sub.train.begin(), sub.train.end(),
                         [](const Example& a, const Example& b) { return std::stoi(a.image_id) < std::stoi(b.image_id); }));
    CHECK(SubsampleTask(t, 0.1, 3).train.front().image_id != sub.train.front().image_id);
    Task tiny;
    tiny.cluster_id = 7;
    tiny.train.resize(3);
    try {
      SubsampleTask(tiny, 0.1, 1);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("task 7") != std::string::npos);
    }
  }

  TEST_CASE("fraction ablation needs three seeds and averages them") {
    const auto tasks = SynthTasks();
    RunConfig cfg;
    cfg.task_order = {1, 2};
    cfg.seeds = {1, 2};
    RetrievalLearner pretrained;
    ExpectError(ErrorCode::kConfig, [&] { AblateFraction(cfg, pretrained, tasks); });
    cfg.seeds = {5, 5, 5};
    const auto curves = AblateFraction(cfg, pretrained, tasks, {1.0});
    cfg.seeds = {5};
    cfg.memory_enabled = false;
    TrainSession s(cfg, pretrained.Clone());
    const auto single = RunSequence(s, tasks);
    REQUIRE(curves.size() == 1);
    CHECK(curves[0].own_task.at(1).bleu4 == doctest::Approx(single.steps[0].report.rows[0].scores.bleu4));
    CHECK(FractionCurvesToCsv(curves, GridMetric::kBleu4).rfind("cluster,100%", 0) == 0);
  }

  TEST_CASE("caption statistics") {
    const auto st = ComputeCaptionStats({{"a", "cat"}, {"a", "dog", "runs"}});
    CHECK(st.word_types == 4);
    CHECK(st.mean_length == 2.5);
    CHECK(st.median_length == 2.5);
    const auto one = ComputeCaptionStats({{"x", "y", "z"}});
    CHECK(one.mean_length == 3.0);
    CHECK(one.median_length == 3.0);
  }

  TEST_CASE("event log appends json lines") {
    testing::TempDir dir;
    EventLog log(dir.file("events.jsonl"));
    log.Append(R"({"type":"epoch","n":1})");
    log.Append(R"({"type":"batch"})");
    log.Append(R"({"type":"epoch","n":2})");
    CHECK(log.Count("epoch") == 2);
    CHECK(ReadFile(dir.file("events.jsonl")) == log.records()[0] + "\n" + log.records()[1] + "\n" + log.records()[2] + "\n");
  }

  TEST_CASE("exact match rate") {
    const Task t = MakeSynthTask(1, 0, 10, 0, 0, 1, 3, 8, 8);
    RetrievalLearner l;
    testing::WarningCapture quiet;
    TrainSession s(QuietConfig(), l.Clone());
    s.Pretrain(t.train, {});
    CHECK(ExactMatchRate(s.learner(), t.train) == 1.0);
  }
}

}  // namespace
}  // namespace capadapt
