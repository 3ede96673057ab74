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

#include "trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_map>

#include "common.hpp"
#include "json.hpp"

namespace capadapt {

using nlohmann::json;

void EventLog::Append(const std::string& record) {
  std::lock_guard<std::mutex> lock(mu_);
  records_.push_back(record);
  if (!path_.empty()) {
    std::ofstream out(path_, std::ios::app);
    if (!out) throw IoError("cannot append to event log " + path_);
    out << record << "\n";
  }
}

std::vector<std::string> EventLog::records() const {
  std::lock_guard<std::mutex> lock(mu_);
  return records_;
}

std::size_t EventLog::Count(const std::string& type) const {
  std::lock_guard<std::mutex> lock(mu_);
  const std::string needle = "\"type\":\"" + type + "\"";
  return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(), [&](const std::string& r) {
    return r.find(needle) != std::string::npos;
  }));
}

EarlyStopResult TrainWithEarlyStopping(Learner& learner, int patience, int max_epochs,
                                       const std::function<void(int)>& run_epoch,
                                       const std::function<double()>& validate, Incumbent* incumbent) {
  if (patience < 1) throw ConfigError("patience must be >= 1");
  EarlyStopResult res;
  double best = incumbent ? incumbent->score : -std::numeric_limits<double>::infinity();
  std::string best_snapshot = incumbent ? incumbent->snapshot : std::string();
  int strikes = 0;
  for (int epoch = 1; epoch <= max_epochs; ++epoch) {
    run_epoch(epoch);
    const double score = validate();
    res.scores.push_back(score);
    res.epochs_run = epoch;
    if (score > best) {
      best = score;
      best_snapshot = learner.Snapshot();
      res.best_epoch = epoch;
      strikes = 0;
    } else if (++strikes >= patience) {
      break;
    }
  }
  if (!best_snapshot.empty()) learner.Restore(best_snapshot);
  if (incumbent) {
    incumbent->score = best;
    incumbent->snapshot = std::move(best_snapshot);
  }
  return res;
}

CaptionStats ComputeCaptionStats(const std::vector<std::vector<std::string>>& captions) {
  if (captions.empty()) throw InvalidArgument("caption statistics need at least one caption");
  CaptionStats st;
  std::set<std::string> types;
  std::vector<std::size_t> lengths;
  double total = 0;
  for (const auto& c : captions) {
    types.insert(c.begin(), c.end());
    lengths.push_back(c.size());
    total += static_cast<double>(c.size());
  }
  std::sort(lengths.begin(), lengths.end());
  st.word_types = types.size();
  st.mean_length = total / static_cast<double>(captions.size());
  const std::size_t mid = lengths.size() / 2;
  st.median_length = lengths.size() % 2 ? static_cast<double>(lengths[mid])
                                        : (static_cast<double>(lengths[mid - 1]) + static_cast<double>(lengths[mid])) / 2.0;
  return st;
}

TrainSession::TrainSession(RunConfig config, std::unique_ptr<Learner> learner, EventLog* log)
    : config_(std::move(config)), learner_(std::move(learner)), log_(log) {
  config_.Validate();
  if (!learner_) throw InvalidArgument("training session needs a learner");
  if (config_.memory_enabled) memory_.emplace(config_.memory);

  std::shared_ptr<const Thesaurus> thesaurus;
  if (!config_.thesaurus_path.empty()) thesaurus = std::make_shared<const Thesaurus>(Thesaurus::Load(config_.thesaurus_path));
  auto offline = std::make_shared<OfflineParaphraser>(thesaurus);
  std::vector<std::shared_ptr<ParaphraseProvider>> providers;
  for (const auto& url : config_.paraphrase_urls) providers.push_back(std::make_shared<RemoteParaphraser>(url, offline));
  if (providers.empty()) providers.push_back(offline);
  paraphrasers_ = std::make_shared<ParaphrasePool>(std::move(providers));

  if (!config_.vocab_path.empty()) vocab_ = std::make_shared<const SubwordVocab>(SubwordVocab::Load(config_.vocab_path));
}

const Feature& TrainSession::OriginalFeature(const std::shared_ptr<const ImageBuffer>& img) {
  auto it = feature_cache_.find(img.get());
  if (it == feature_cache_.end()) it = feature_cache_.emplace(img.get(), learner_->Extract(*img)).first;
  return it->second;
}

std::vector<std::string> TrainSession::TrainingCaption(const CaptionRecord& cap) const {
  if (!vocab_) return cap.tokens;
  // Words outside the fixed subword vocabulary surface as [UNK].
  const auto ids = Tokenize(Join(cap.tokens, " "), *vocab_);
  return Detokenize(ids, *vocab_);
}

std::vector<std::string> TrainSession::Caption(const ImageBuffer& img) const {
  return learner_->Generate(learner_->Extract(img));
}

std::vector<EvalPair> TrainSession::Predict(const std::vector<Example>& examples,
                                            std::vector<std::vector<std::string>>* generated) const {
  std::vector<EvalPair> pairs;
  pairs.reserve(examples.size());
  for (const auto& ex : examples) {
    auto it = feature_cache_.find(ex.image.get());
    const auto hyp = it != feature_cache_.end() ? learner_->Generate(it->second) : Caption(*ex.image);
    std::vector<std::string> refs;
    for (const auto& c : ex.captions) refs.push_back(c.text);
    pairs.push_back(MakeEvalPair(ex.image_id, Join(hyp, " "), refs));
    if (generated) generated->push_back(hyp);
  }
  return pairs;
}

std::vector<EarlyStopResult> TrainSession::Pretrain(const std::vector<Example>& train, const std::vector<Example>& val) {
  if (train.empty()) throw InvalidArgument("pretraining needs a non-empty base corpus");
  std::vector<Observation> obs;
  for (const auto& ex : train)
    for (const auto& cap : ex.captions) obs.push_back({OriginalFeature(ex.image), TrainingCaption(cap)});

  std::vector<EarlyStopResult> phases;
  Incumbent incumbent{-std::numeric_limits<double>::infinity(), {}};
  for (int phase = 1; phase <= 2; ++phase) {
    learner_->BeginPretrainPhase(phase);
    auto run_epoch = [&](int epoch) {
      std::vector<std::size_t> order(obs.size());
      std::iota(order.begin(), order.end(), 0);
      Rng rng(MixSeed(MixSeed(config_.primary_seed(), 0x70726574u + phase), static_cast<std::uint64_t>(epoch)));
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[UniformIndex(rng, i)]);
      for (std::size_t b = 0; b < order.size(); b += config_.batch_size) {
        std::vector<Observation> batch;
        for (std::size_t i = b; i < std::min(order.size(), b + config_.batch_size); ++i) batch.push_back(obs[order[i]]);
        learner_->ObserveBatch(batch);
      }
    };
    auto validate = [&]() { return val.empty() ? 0.0 : Bleu4(Predict(val)); };
    EarlyStopResult r;
    if (val.empty()) {
      LogWarning("base validation split is empty; pretraining phase " + std::to_string(phase) + " runs one epoch");
      run_epoch(1);
      r.epochs_run = 1;
      r.best_epoch = 1;
    } else {
      r = TrainWithEarlyStopping(*learner_, config_.patience_pretrain, config_.max_epochs, run_epoch, validate,
                                 &incumbent);
    }
    if (log_) {
      log_->Append(json{{"type", "pretrain_phase"}, {"phase", phase}, {"epochs", r.epochs_run},
                        {"best_epoch", r.best_epoch}, {"val_bleu4", r.scores}}
                       .dump());
    }
    phases.push_back(std::move(r));
  }
  return phases;
}

void TrainSession::RunEpoch(const std::vector<Sample>& samples, int task_id, int epoch, EpochLog& elog) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  const std::uint64_t epoch_seed =
      MixSeed(MixSeed(config_.primary_seed(), static_cast<std::uint64_t>(task_id)), static_cast<std::uint64_t>(epoch));
  Rng rng(epoch_seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[UniformIndex(rng, i)]);

  AugmentConfig da = config_.augment;
  for (std::size_t b = 0; b < order.size(); b += config_.batch_size) {
    std::vector<Sample> batch;
    for (std::size_t i = b; i < std::min(order.size(), b + config_.batch_size); ++i) batch.push_back(samples[order[i]]);

    const auto expanded = ExpandBatch(batch, da, paraphrasers_.get(), epoch_seed, &counters_);
    std::vector<Observation> obs;
    obs.reserve(expanded.size());
    for (const auto& s : expanded) {
      const bool original =
          std::any_of(batch.begin(), batch.end(), [&](const Sample& o) { return o.image == s.image; });
      obs.push_back({original ? OriginalFeature(s.image) : learner_->Extract(*s.image), s.caption});
    }
    elog.samples_observed += obs.size();

    std::size_t replayed = 0;
    ++global_batches_;
    if (memory_) {
      for (const auto& s : batch) memory_->MaybeWrite({OriginalFeature(s.image), s.caption, s.origin_task, global_batches_});
      if (auto replay = memory_->OnNewBatch(config_.batch_size)) {
        for (auto& e : *replay) obs.push_back({std::move(e.feature), std::move(e.caption)});
        replayed = replay->size();
        ++replay_events_;
        ++elog.replay_events;
        elog.replayed_samples += replayed;
      }
    }
    learner_->ObserveBatch(obs);
    ++elog.batches;
    if (log_) {
      log_->Append(json{{"type", "batch"}, {"task", task_id}, {"epoch", epoch}, {"batch", global_batches_},
                        {"originals", batch.size()}, {"expanded", expanded.size()}, {"replayed", replayed}}
                       .dump());
      if (replayed)
        log_->Append(json{{"type", "replay"}, {"task", task_id}, {"batch", global_batches_},
                          {"memory_counter", memory_->batch_counter()}, {"size", replayed}}
                         .dump());
    }
  }
}

TaskLog TrainSession::AdaptTask(const Task& task) {
  if (task.train.empty()) throw InvalidArgument("task " + std::to_string(task.cluster_id) + " has no training data");
  std::vector<Sample> samples;
  for (const auto& ex : task.train)
    for (const auto& cap : ex.captions)
      samples.push_back({ex.image_id, ex.image, TrainingCaption(cap), task.cluster_id, Split::kTrain, 0});

  TaskLog tlog;
  tlog.cluster_id = task.cluster_id;
  auto log_epoch = [&](const EpochLog& e) {
    LogEvent(json{{"type", "epoch"}, {"task", task.cluster_id}, {"epoch", e.epoch}, {"batches", e.batches},
                  {"samples", e.samples_observed}, {"replay_events", e.replay_events}, {"val_bleu4", e.val_bleu4}}
                 .dump());
  };
  auto run_epoch = [&](int epoch) {
    EpochLog e;
    e.epoch = epoch;
    RunEpoch(samples, task.cluster_id, epoch, e);
    tlog.epochs.push_back(e);
  };
  if (task.val.empty()) {
    LogWarning("task " + std::to_string(task.cluster_id) + " has no validation split; training a single epoch");
    tlog.single_epoch_fallback = true;
    run_epoch(1);
    log_epoch(tlog.epochs.back());
    tlog.best_epoch = 1;
  } else {
    auto validate = [&]() {
      const double s = Bleu4(Predict(task.val));
      tlog.epochs.back().val_bleu4 = s;
      log_epoch(tlog.epochs.back());
      return s;
    };
    const auto r = TrainWithEarlyStopping(*learner_, config_.patience_adapt, config_.max_epochs, run_epoch, validate);
    tlog.best_epoch = r.best_epoch;
    tlog.best_val_bleu4 = r.scores.at(static_cast<std::size_t>(r.best_epoch - 1));
  }
  if (log_) {
    json scores = json::array();
    for (const auto& e : tlog.epochs) scores.push_back(e.val_bleu4);
    log_->Append(json{{"type", "task"}, {"task", task.cluster_id}, {"epochs", tlog.epochs.size()},
                      {"best_epoch", tlog.best_epoch}, {"val_bleu4", scores}}
                     .dump());
  }
  return tlog;
}

SequenceResult RunSequence(TrainSession& session, const std::vector<Task>& tasks) {
  std::map<int, const Task*> by_id;
  for (const auto& t : tasks) by_id[t.cluster_id] = &t;
  SequenceResult res;
  std::vector<int> seen;
  for (int cid : session.config().task_order) {
    auto it = by_id.find(cid);
    if (it == by_id.end()) throw ConfigError("task_order names unknown cluster " + std::to_string(cid));
    if (std::find(seen.begin(), seen.end(), cid) != seen.end())
      throw ConfigError("task_order lists cluster " + std::to_string(cid) + " twice");
    res.logs.push_back(session.AdaptTask(*it->second));
    seen.push_back(cid);

    std::vector<ClusterPairs> clusters;
    std::vector<std::vector<std::string>> generated;
    for (int c : seen) {
      const Task& t = *by_id[c];
      if (t.test.empty()) {
        LogWarning("cluster " + std::to_string(c) + " has no test split; left out of the evaluation");
        continue;
      }
      clusters.push_back({std::to_string(c), session.Predict(t.test, &generated)});
    }
    GridStep step;
    step.after_cluster = cid;
    if (!clusters.empty()) {
      step.report = Evaluate(clusters, session.config().micro);
      step.caption_stats = ComputeCaptionStats(generated);
      session.LogEvent(json{{"type", "eval"}, {"after_cluster", cid}, {"report", json::parse(ReportToJson(step.report))}}.dump());
    }
    res.steps.push_back(std::move(step));
  }
  res.counters = session.counters();
  res.replay_events = session.replay_events();
  return res;
}

std::string_view GridMetricName(GridMetric m) {
  switch (m) {
    case GridMetric::kBleu4: return "bleu4";
    case GridMetric::kRougeL: return "rougeL";
    case GridMetric::kCiderD: return "ciderD";
  }
  return "bleu4";
}

double MetricOf(const Scores& s, GridMetric m) {
  switch (m) {
    case GridMetric::kBleu4: return s.bleu4;
    case GridMetric::kRougeL: return s.rougeL;
    case GridMetric::kCiderD: return s.ciderD;
  }
  return 0;
}

namespace {

std::string Cell(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

const ReportRow* FindRow(const MetricReport& r, const std::string& label) {
  for (const auto& row : r.rows)
    if (row.label == label) return &row;
  return nullptr;
}

std::vector<std::string> RowLabels(const std::vector<GridStep>& steps) {
  std::vector<std::string> labels;
  for (const auto& s : steps) labels.push_back(std::to_string(s.after_cluster));
  labels.push_back("all");
  return labels;
}

}  // namespace

std::string GridToCsv(const std::vector<GridStep>& steps, GridMetric metric) {
  std::string out = "eval";
  for (const auto& s : steps) out += ",+" + std::to_string(s.after_cluster);
  out += "\n";
  for (const auto& label : RowLabels(steps)) {
    out += label;
    for (const auto& s : steps) {
      const ReportRow* row = FindRow(s.report, label);
      out += ",";
      if (row) out += Cell(MetricOf(row->scores, metric));
    }
    out += "\n";
  }
  return out;
}

std::string SequenceToJson(const SequenceResult& result) {
  json steps = json::array();
  for (std::size_t i = 0; i < result.steps.size(); ++i) {
    const auto& s = result.steps[i];
    json epochs = json::array();
    const auto& tl = result.logs.at(i);
    for (const auto& e : tl.epochs)
      epochs.push_back({{"epoch", e.epoch}, {"val_bleu4", e.val_bleu4}, {"batches", e.batches},
                        {"samples", e.samples_observed}, {"replay_events", e.replay_events},
                        {"replayed_samples", e.replayed_samples}});
    steps.push_back({{"after_cluster", s.after_cluster},
                     {"report", json::parse(ReportToJson(s.report))},
                     {"caption_stats",
                      {{"word_types", s.caption_stats.word_types},
                       {"mean_length", s.caption_stats.mean_length},
                       {"median_length", s.caption_stats.median_length}}},
                     {"training",
                      {{"epochs", epochs}, {"best_epoch", tl.best_epoch}, {"best_val_bleu4", tl.best_val_bleu4},
                       {"single_epoch_fallback", tl.single_epoch_fallback}}}});
  }
  json doc = {{"steps", steps},
              {"replay_events", result.replay_events},
              {"augment",
               {{"images_augmented", result.counters.images_augmented},
                {"captions_augmented", result.counters.captions_augmented},
                {"non_train_inputs", result.counters.non_train_inputs}}}};
  return doc.dump(1) + "\n";
}

MemoryAblation AblateMemory(const RunConfig& config, const Learner& pretrained, const std::vector<Task>& tasks) {
  MemoryAblation out;
  for (bool enabled : {true, false}) {
    RunConfig cfg = config;
    cfg.memory_enabled = enabled;
    TrainSession session(cfg, pretrained.Clone());
    (enabled ? out.with_memory : out.without_memory) = RunSequence(session, tasks);
  }
  return out;
}

std::string MemoryAblationToCsv(const MemoryAblation& a, GridMetric metric) {
  const auto& on = a.with_memory.steps;
  const auto& off = a.without_memory.steps;
  std::string out = "eval";
  for (const auto& s : on) out += ",+" + std::to_string(s.after_cluster) + " mem+,+" + std::to_string(s.after_cluster) + " mem-";
  out += "\n";
  for (const auto& label : RowLabels(on)) {
    out += label;
    for (std::size_t i = 0; i < on.size(); ++i) {
      for (const auto* steps : {&on, &off}) {
        const ReportRow* row = i < steps->size() ? FindRow((*steps)[i].report, label) : nullptr;
        out += ",";
        if (row) out += Cell(MetricOf(row->scores, metric));
      }
    }
    out += "\n";
  }
  return out;
}

Task SubsampleTask(const Task& task, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("fraction must lie in (0, 1]");
  const auto keep = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(task.train.size()) + 1e-9));
  if (keep == 0)
    throw InvalidArgument("fraction " + std::to_string(fraction) + " leaves task " + std::to_string(task.cluster_id) +
                          " without training samples");
  Task out = task;
  if (keep == task.train.size()) return out;
  std::vector<std::size_t> idx(task.train.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < keep; ++i) std::swap(idx[i], idx[i + UniformIndex(rng, idx.size() - i)]);
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  out.train.clear();
  for (std::size_t i : idx) out.train.push_back(task.train[i]);
  return out;
}

std::vector<FractionCurve> AblateFraction(const RunConfig& config, const Learner& pretrained,
                                          const std::vector<Task>& tasks, const std::vector<double>& fractions) {
  if (config.seeds.size() != 3) throw ConfigError("fraction ablation averages over exactly 3 seeds");
  std::vector<FractionCurve> curves;
  for (double fraction : fractions) {
    FractionCurve curve;
    curve.fraction = fraction;
    std::map<int, Scores> own_sum;
    std::map<std::string, Scores> final_sum;
    for (std::uint64_t seed : config.seeds) {
      RunConfig cfg = config;
      cfg.memory_enabled = false;
      cfg.fraction = fraction;
      cfg.seeds = {seed};
      std::vector<Task> sub;
      for (const auto& t : tasks) sub.push_back(SubsampleTask(t, fraction, MixSeed(seed, static_cast<std::uint64_t>(t.cluster_id))));
      TrainSession session(cfg, pretrained.Clone());
      const auto res = RunSequence(session, sub);
      auto add = [](Scores& acc, const Scores& s) {
        acc.bleu4 += s.bleu4;
        acc.rougeL += s.rougeL;
        acc.ciderD += s.ciderD;
      };
      for (const auto& step : res.steps)
        if (const ReportRow* row = FindRow(step.report, std::to_string(step.after_cluster)))
          add(own_sum[step.after_cluster], row->scores);
      if (!res.steps.empty())
        for (const auto& row : res.steps.back().report.rows) add(final_sum[row.label], row.scores);
    }
    const double n = static_cast<double>(config.seeds.size());
    auto mean = [n](Scores s) { return Scores{s.bleu4 / n, s.rougeL / n, s.ciderD / n}; };
    for (const auto& [k, v] : own_sum) curve.own_task[k] = mean(v);
    for (const auto& [k, v] : final_sum) curve.final_step[k] = mean(v);
    curves.push_back(std::move(curve));
  }
  return curves;
}

std::string FractionCurvesToCsv(const std::vector<FractionCurve>& curves, GridMetric metric) {
  std::string out = "cluster";
  for (const auto& c : curves) {
    char buf[32];
    std::snprintf(buf, sizeof buf, ",%g%%", c.fraction * 100);
    out += buf;
  }
  out += "\n";
  std::set<int> ids;
  for (const auto& c : curves)
    for (const auto& [k, _] : c.own_task) ids.insert(k);
  for (int id : ids) {
    out += std::to_string(id);
    for (const auto& c : curves) {
      out += ",";
      auto it = c.own_task.find(id);
      if (it != c.own_task.end()) out += Cell(MetricOf(it->second, metric));
    }
    out += "\n";
  }
  return out;
}

double ExactMatchRate(const Learner& learner, const std::vector<Example>& examples) {
  if (examples.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& ex : examples) {
    const auto hyp = learner.Generate(learner.Extract(*ex.image));
    hits += std::any_of(ex.captions.begin(), ex.captions.end(), [&](const CaptionRecord& c) { return c.tokens == hyp; });
  }
  return static_cast<double>(hits) / static_cast<double>(examples.size());
}

ImageLoader DirectoryImageLoader(std::string root) {
  auto cache = std::make_shared<std::unordered_map<std::string, std::shared_ptr<const ImageBuffer>>>();
  return [root = std::move(root), cache](const ImageRecord& rec) {
    const std::string path = (std::filesystem::path(root) / rec.file_name).string();
    auto it = cache->find(path);
    if (it != cache->end()) return it->second;
    auto img = std::make_shared<const ImageBuffer>(LoadImageFile(path));
    cache->emplace(path, img);
    return img;
  };
}

std::vector<Example> ExamplesFromCorpus(const Corpus& corpus, const ImageLoader& loader, std::optional<Split> only) {
  std::vector<Example> out;
  for (const auto& rec : corpus.images()) {
    if (only && rec.split != *only) continue;
    out.push_back({rec.image_id, loader(rec), rec.captions});
  }
  return out;
}

std::vector<Task> BuildTasks(const Corpus& corpus, const ClusterFile& clusters, const ImageLoader& loader) {
  std::vector<Task> tasks;
  for (const auto& entry : clusters.clusters) {
    Task t;
    t.cluster_id = entry.cluster_id;
    for (const auto& [split, ids] : entry.image_ids) {
      auto& dst = split == Split::kTrain ? t.train : split == Split::kVal ? t.val : t.test;
      for (const auto& id : ids) {
        const ImageRecord* rec = corpus.Find(id);
        if (!rec) throw IntegrityError("cluster " + std::to_string(entry.cluster_id) + " references unknown image id " + id);
        dst.push_back({rec->image_id, loader(*rec), rec->captions});
      }
    }
    tasks.push_back(std::move(t));
  }
  return tasks;
}

}  // namespace capadapt
