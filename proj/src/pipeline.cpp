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

#include "pipeline.hpp"

#include <algorithm>
#include <filesystem>

#include "common.hpp"
#include "json.hpp"

namespace capadapt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path OutDir(const RunConfig& config) {
  fs::path dir(config.output_dir);
  fs::create_directories(dir / "metrics");
  fs::create_directories(dir / "grids");
  return dir;
}

void Require(const std::string& value, const std::string& key) {
  if (value.empty()) throw ConfigError("config key '" + key + "' is required for this command");
}

void WriteGrids(const fs::path& dir, const std::string& prefix, const std::vector<GridStep>& steps) {
  for (auto m : {GridMetric::kBleu4, GridMetric::kRougeL, GridMetric::kCiderD})
    WriteFileAtomic((dir / "grids" / (prefix + std::string(GridMetricName(m)) + ".csv")).string(), GridToCsv(steps, m));
}

std::unique_ptr<Learner> PretrainedLearner(const RunConfig& config) {
  const fs::path path = fs::path(config.output_dir) / "learner.pretrained";
  if (!fs::exists(path))
    throw StateError("no pretrained learner at " + path.string() + "; run pretrain first");
  return LoadLearner(config, path.string());
}

}  // namespace

PreparedTarget PrepareTarget(const RunConfig& config) {
  Require(config.target_train, "target.train");
  Require(config.target_val, "target.val");
  const Corpus train = LoadCorpus(config.target_train, Split::kTrain);
  const Corpus val = LoadCorpus(config.target_val, Split::kVal);
  const SplitCorpora parts = RemapSplits(train, val, config.holdout_fraction, config.split_seed);
  PreparedTarget out;
  out.corpus = MergeCorpora({&parts.train, &parts.val, &parts.test});
  if (config.quality_filter) {
    auto filtered = ApplyQualityFilter(out.corpus, config.quality_marker);
    out.corpus = std::move(filtered.corpus);
    out.excluded_ids = std::move(filtered.excluded_ids);
  }
  return out;
}

std::string ClusterTableToJson(const std::vector<ClusterTableRow>& rows) {
  json out = json::array();
  for (const auto& r : rows)
    out.push_back({{"cluster", r.label}, {"train", r.train}, {"val", r.val}, {"test", r.test}, {"all", r.all},
                   {"word_types", r.word_types}});
  return out.dump(1) + "\n";
}

std::string RunClustering(const std::string& corpus_path, const std::string& lexicon_path,
                          const std::string& embeddings_path, const ClusterOptions& options,
                          const std::string& out_path) {
  const Corpus corpus = LoadCorpus(corpus_path, Split::kTrain);
  const PosLexicon lexicon = PosLexicon::Load(lexicon_path);
  const EmbeddingTable table = EmbeddingTable::Load(embeddings_path);
  const ClusteringResult result = BuildClusters(corpus, lexicon, table, options);
  for (const auto& kw : result.unembedded_keywords) LogWarning("keyword '" + kw + "' has no embedding; dropped");
  const ClusterFile file = MakeClusterFile(corpus, result);
  WriteFileAtomic(out_path, SerializeClusterFile(file));
  return ClusterTableToJson(ClusterTable(corpus, file));
}

std::vector<Task> LoadTasks(const RunConfig& config) {
  Require(config.tasks_path, "tasks");
  Require(config.target_image_root, "target.image_root");
  const PreparedTarget target = PrepareTarget(config);
  return BuildTasks(target.corpus, LoadClusterFile(config.tasks_path), DirectoryImageLoader(config.target_image_root));
}

std::unique_ptr<Learner> LoadLearner(const RunConfig& config, const std::string& snapshot_path) {
  auto learner = MakeLearner(config.learner);
  learner->Restore(ReadFile(snapshot_path));
  return learner;
}

std::string RunPretrain(const RunConfig& config) {
  Require(config.base_train, "base.train");
  Require(config.base_image_root, "base.image_root");
  const fs::path dir = OutDir(config);
  WriteFileAtomic((dir / "config.snapshot").string(), config.Serialize());
  const auto loader = DirectoryImageLoader(config.base_image_root);
  const auto train = ExamplesFromCorpus(LoadCorpus(config.base_train, Split::kTrain), loader);
  std::vector<Example> val;
  if (!config.base_val.empty()) val = ExamplesFromCorpus(LoadCorpus(config.base_val, Split::kVal), loader);

  EventLog log((dir / "events.jsonl").string());
  TrainSession session(config, MakeLearner(config.learner), &log);
  const auto phases = session.Pretrain(train, val);
  WriteFileAtomic((dir / "learner.pretrained").string(), session.learner().Snapshot());

  json summary = {{"train_images", train.size()}, {"val_images", val.size()}};
  json ph = json::array();
  for (const auto& p : phases) ph.push_back({{"epochs", p.epochs_run}, {"best_epoch", p.best_epoch}, {"val_bleu4", p.scores}});
  summary["phases"] = ph;
  if (!val.empty()) summary["val"] = json::parse(ReportToJson(Evaluate(std::vector<ClusterPairs>{{"base", session.Predict(val)}})));
  WriteFileAtomic((dir / "metrics" / "pretrain.json").string(), summary.dump(1) + "\n");
  return summary.dump(1) + "\n";
}

std::string RunAdapt(const RunConfig& config) {
  const fs::path dir = OutDir(config);
  WriteFileAtomic((dir / "config.snapshot").string(), config.Serialize());
  const auto tasks = LoadTasks(config);
  EventLog log((dir / "events.jsonl").string());
  TrainSession session(config, PretrainedLearner(config), &log);
  const SequenceResult result = RunSequence(session, tasks);
  WriteGrids(dir, "", result.steps);
  const std::string doc = SequenceToJson(result);
  WriteFileAtomic((dir / "metrics" / "sequence.json").string(), doc);
  WriteFileAtomic((dir / "learner.final").string(), session.learner().Snapshot());
  if (session.memory()) session.memory()->Snapshot((dir / "memory.final").string());
  return doc;
}

std::string RunAblateMemory(const RunConfig& config) {
  const fs::path dir = OutDir(config);
  const auto tasks = LoadTasks(config);
  const auto pretrained = PretrainedLearner(config);
  const MemoryAblation a = AblateMemory(config, *pretrained, tasks);
  for (auto m : {GridMetric::kBleu4, GridMetric::kRougeL, GridMetric::kCiderD})
    WriteFileAtomic((dir / "grids" / ("ablation_memory_" + std::string(GridMetricName(m)) + ".csv")).string(),
                    MemoryAblationToCsv(a, m));
  json doc = {{"with_memory", json::parse(SequenceToJson(a.with_memory))},
              {"without_memory", json::parse(SequenceToJson(a.without_memory))}};
  WriteFileAtomic((dir / "metrics" / "ablation_memory.json").string(), doc.dump(1) + "\n");
  return doc.dump(1) + "\n";
}

std::string RunAblateFraction(const RunConfig& config) {
  const fs::path dir = OutDir(config);
  const auto tasks = LoadTasks(config);
  const auto pretrained = PretrainedLearner(config);
  const auto curves = AblateFraction(config, *pretrained, tasks);
  for (auto m : {GridMetric::kBleu4, GridMetric::kRougeL, GridMetric::kCiderD})
    WriteFileAtomic((dir / "grids" / ("ablation_fraction_" + std::string(GridMetricName(m)) + ".csv")).string(),
                    FractionCurvesToCsv(curves, m));
  json doc = json::array();
  auto scores = [](const Scores& s) { return json{{"bleu4", s.bleu4}, {"rougeL", s.rougeL}, {"ciderD", s.ciderD}}; };
  for (const auto& c : curves) {
    json own = json::object(), fin = json::object();
    for (const auto& [k, v] : c.own_task) own[std::to_string(k)] = scores(v);
    for (const auto& [k, v] : c.final_step) fin[k] = scores(v);
    doc.push_back({{"fraction", c.fraction}, {"own_task", own}, {"final_step", fin}});
  }
  WriteFileAtomic((dir / "metrics" / "ablation_fraction.json").string(), doc.dump(1) + "\n");
  return doc.dump(1) + "\n";
}

std::string RunReport(const std::string& run_dir) {
  const fs::path grids = fs::path(run_dir) / "grids";
  if (!fs::is_directory(grids)) throw IoError("no grids directory in " + run_dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(grids))
    if (e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string out;
  for (const auto& f : files) out += "== " + f.stem().string() + "\n" + ReadFile(f.string()) + "\n";
  return out;
}

}  // namespace capadapt
