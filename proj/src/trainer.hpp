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

#ifndef CAPADAPT_TRAINER_HPP_
#define CAPADAPT_TRAINER_HPP_

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "augment.hpp"
#include "config.hpp"
#include "corpus.hpp"
#include "learner.hpp"
#include "memory.hpp"
#include "metrics.hpp"
#include "taskgen.hpp"
#include "tokenizer.hpp"

namespace capadapt {

// One image with all its reference captions.
struct Example {
  std::string image_id;
  std::shared_ptr<const ImageBuffer> image;
  std::vector<CaptionRecord> captions;
};

struct Task {
  int cluster_id = 0;
  std::vector<Example> train;
  std::vector<Example> val;
  std::vector<Example> test;
};

// Append-only JSON-lines event log. Records are also kept in memory.
class EventLog {
 public:
  EventLog() = default;
  explicit EventLog(std::string path) : path_(std::move(path)) {}

  void Append(const std::string& json_record);
  std::vector<std::string> records() const;
  std::size_t Count(const std::string& type) const;

 private:
  std::string path_;
  mutable std::mutex mu_;
  std::vector<std::string> records_;
};

struct EarlyStopResult {
  std::vector<double> scores;  // one per epoch
  int best_epoch = 0;          // 1-based; 0 when no epoch beat the incumbent
  int epochs_run = 0;
};

// Best model carried between early-stopping loops.
struct Incumbent {
  double score;
  std::string snapshot;
};

// Runs epochs until `patience` consecutive non-improving validation scores
// (or max_epochs), then restores the best snapshot. A non-null `incumbent`
// seeds the best score and snapshot and receives the final best.
EarlyStopResult TrainWithEarlyStopping(Learner& learner, int patience, int max_epochs,
                                       const std::function<void(int epoch)>& run_epoch,
                                       const std::function<double()>& validate,
                                       Incumbent* incumbent = nullptr);

struct EpochLog {
  int epoch = 0;
  double val_bleu4 = 0;
  std::size_t batches = 0;
  std::size_t samples_observed = 0;  // after expansion, before replay
  std::size_t replay_events = 0;
  std::size_t replayed_samples = 0;
};

struct TaskLog {
  int cluster_id = 0;
  std::vector<EpochLog> epochs;
  int best_epoch = 0;
  double best_val_bleu4 = 0;
  bool single_epoch_fallback = false;
};

struct CaptionStats {
  std::size_t word_types = 0;
  double mean_length = 0;
  double median_length = 0;
};

CaptionStats ComputeCaptionStats(const std::vector<std::vector<std::string>>& captions);

// Mutable state threaded through one run.
class TrainSession {
 public:
  TrainSession(RunConfig config, std::unique_ptr<Learner> learner, EventLog* log = nullptr);

  const RunConfig& config() const { return config_; }
  Learner& learner() { return *learner_; }
  const Learner& learner() const { return *learner_; }
  EpisodicMemory* memory() { return memory_ ? &*memory_ : nullptr; }
  void set_memory(std::optional<EpisodicMemory> m) { memory_ = std::move(m); }
  void set_paraphrasers(std::shared_ptr<ParaphrasePool> pool) { paraphrasers_ = std::move(pool); }
  void set_vocab(std::shared_ptr<const SubwordVocab> vocab) { vocab_ = std::move(vocab); }
  const AugmentCounters& counters() const { return counters_; }
  std::uint64_t global_batches() const { return global_batches_; }
  std::size_t replay_events() const { return replay_events_; }
  // Appends to the event log when one is attached.
  void LogEvent(const std::string& json_record) const {
    if (log_) log_->Append(json_record);
  }

  // Two phases over the base corpus (BeginPretrainPhase(1), then (2)), each
  // early-stopped with patience.pretrain on base-val BLEU-4; phase 2 only
  // replaces the phase-1 model when it beats it. No augmentation, no memory.
  std::vector<EarlyStopResult> Pretrain(const std::vector<Example>& train, const std::vector<Example>& val);

  // Adapts to one task with augmentation, memory and patience.adapt early stopping.
  TaskLog AdaptTask(const Task& task);

  std::vector<std::string> Caption(const ImageBuffer& img) const;
  std::vector<EvalPair> Predict(const std::vector<Example>& examples,
                                std::vector<std::vector<std::string>>* generated = nullptr) const;

  // Feature of an original (non-augmented) image, cached by pointer.
  const Feature& OriginalFeature(const std::shared_ptr<const ImageBuffer>& img);

 private:
  std::vector<std::string> TrainingCaption(const CaptionRecord& cap) const;
  void RunEpoch(const std::vector<Sample>& samples, int task_id, int epoch, EpochLog& log);

  RunConfig config_;
  std::unique_ptr<Learner> learner_;
  EventLog* log_;
  std::optional<EpisodicMemory> memory_;
  std::shared_ptr<ParaphrasePool> paraphrasers_;
  std::shared_ptr<const SubwordVocab> vocab_;
  AugmentCounters counters_;
  std::uint64_t global_batches_ = 0;
  std::size_t replay_events_ = 0;
  std::map<const ImageBuffer*, Feature> feature_cache_;
};

struct GridStep {
  int after_cluster = 0;
  MetricReport report;  // rows: clusters seen so far (in order), then "all"
  CaptionStats caption_stats;
};

struct SequenceResult {
  std::vector<GridStep> steps;
  std::vector<TaskLog> logs;
  AugmentCounters counters;
  std::size_t replay_events = 0;
};

// Adapts tasks in config.task_order; after each, evaluates on the test
// splits of every cluster seen so far plus the micro-average.
SequenceResult RunSequence(TrainSession& session, const std::vector<Task>& tasks);

enum class GridMetric { kBleu4, kRougeL, kCiderD };
std::string_view GridMetricName(GridMetric m);
double MetricOf(const Scores& s, GridMetric m);

// Lower-triangular grid: one column per adaptation step, one row per
// evaluated cluster plus "all".
std::string GridToCsv(const std::vector<GridStep>& steps, GridMetric metric);
std::string SequenceToJson(const SequenceResult& result);

struct MemoryAblation {
  SequenceResult with_memory;
  SequenceResult without_memory;
};

// Same pretrained learner snapshot and seeds; only memory differs.
MemoryAblation AblateMemory(const RunConfig& config, const Learner& pretrained, const std::vector<Task>& tasks);
// Side-by-side (+/-) columns per adaptation step.
std::string MemoryAblationToCsv(const MemoryAblation& a, GridMetric metric);

struct FractionCurve {
  double fraction = 1.0;
  // cluster id -> mean over seeds of its score right after its own task
  std::map<int, Scores> own_task;
  // final grid step averaged over seeds, rows by cluster label
  std::map<std::string, Scores> final_step;
};

// Fractions {0.1, 0.2, 0.5, 1.0}, memory disabled, averaged over exactly
// three seeds.
std::vector<FractionCurve> AblateFraction(const RunConfig& config, const Learner& pretrained,
                                          const std::vector<Task>& tasks,
                                          const std::vector<double>& fractions = {0.1, 0.2, 0.5, 1.0});
std::string FractionCurvesToCsv(const std::vector<FractionCurve>& curves, GridMetric metric);

// floor(fraction * |train|) uniformly chosen training examples.
Task SubsampleTask(const Task& task, double fraction, std::uint64_t seed);

// Share of examples whose generated caption equals one of their references.
double ExactMatchRate(const Learner& learner, const std::vector<Example>& examples);

// Image loading for the CLI paths.
using ImageLoader = std::function<std::shared_ptr<const ImageBuffer>(const ImageRecord&)>;
ImageLoader DirectoryImageLoader(std::string root);

std::vector<Example> ExamplesFromCorpus(const Corpus& corpus, const ImageLoader& loader,
                                        std::optional<Split> only = std::nullopt);
std::vector<Task> BuildTasks(const Corpus& corpus, const ClusterFile& clusters, const ImageLoader& loader);

}  // namespace capadapt

#endif  // CAPADAPT_TRAINER_HPP_
