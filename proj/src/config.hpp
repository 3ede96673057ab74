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

#ifndef CAPADAPT_CONFIG_HPP_
#define CAPADAPT_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "augment.hpp"
#include "learner.hpp"
#include "memory.hpp"
#include "metrics.hpp"

namespace capadapt {

// All run settings. Loaded from a flat "key = value" file; the key set is
// RunConfig::Keys() and is documented in the README.
struct RunConfig {
  std::size_t batch_size = 32;
  int patience_adapt = 2;
  int patience_pretrain = 20;
  int max_epochs = 100;

  AugmentConfig augment;
  std::string thesaurus_path;
  std::vector<std::string> paraphrase_urls;

  bool memory_enabled = true;
  MemoryConfig memory;

  double fraction = 1.0;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::vector<int> task_order = {1, 2, 3, 4, 5};

  LearnerConfig learner;
  MicroMode micro = MicroMode::kPooled;
  std::string vocab_path;

  std::string output_dir = "run";

  std::string base_train;
  std::string base_val;
  std::string base_image_root;
  std::string target_train;
  std::string target_val;
  std::string target_image_root;
  double holdout_fraction = 0.2;
  std::uint64_t split_seed = 13;
  bool quality_filter = true;
  std::string quality_marker = "Quality issues are too severe to recognize visual content";
  std::string tasks_path;

  void Set(const std::string& key, const std::string& value);
  std::map<std::string, std::string> ToMap() const;
  std::string Serialize() const;
  void Validate() const;

  std::uint64_t primary_seed() const { return seeds.empty() ? 1 : seeds.front(); }

  static RunConfig Parse(std::string_view text);
  static RunConfig Load(const std::string& path);
  static std::vector<std::string> Keys();
};

}  // namespace capadapt

#endif  // CAPADAPT_CONFIG_HPP_
