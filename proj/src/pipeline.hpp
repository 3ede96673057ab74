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

#ifndef CAPADAPT_PIPELINE_HPP_
#define CAPADAPT_PIPELINE_HPP_

#include <memory>
#include <string>
#include <vector>

#include "config.hpp"
#include "corpus.hpp"
#include "learner.hpp"
#include "taskgen.hpp"
#include "trainer.hpp"

namespace capadapt {

// Config-driven workflows behind the CLI. Each writes into
// config.output_dir:
//   config.snapshot, events.jsonl, learner.pretrained, learner.final,
//   memory.final, metrics/*.json, grids/*.csv

// target.train/target.val after split remapping and (optionally) the
// quality filter.
struct PreparedTarget {
  Corpus corpus;
  std::vector<std::string> excluded_ids;
};
PreparedTarget PrepareTarget(const RunConfig& config);

// Clusters the prepared corpus stored at corpus_path and writes the cluster
// file. Returns the per-cluster table as JSON.
std::string RunClustering(const std::string& corpus_path, const std::string& lexicon_path,
                          const std::string& embeddings_path, const ClusterOptions& options,
                          const std::string& out_path);
std::string ClusterTableToJson(const std::vector<ClusterTableRow>& rows);

std::vector<Task> LoadTasks(const RunConfig& config);
std::unique_ptr<Learner> LoadLearner(const RunConfig& config, const std::string& snapshot_path);

// Each returns a JSON summary.
std::string RunPretrain(const RunConfig& config);
std::string RunAdapt(const RunConfig& config);
std::string RunAblateMemory(const RunConfig& config);
std::string RunAblateFraction(const RunConfig& config);

// Concatenated grids of a run directory.
std::string RunReport(const std::string& run_dir);

}  // namespace capadapt

#endif  // CAPADAPT_PIPELINE_HPP_
