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

#ifndef CAPADAPT_MEMORY_HPP_
#define CAPADAPT_MEMORY_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "common.hpp"

namespace capadapt {

struct MemoryEntry {
  std::vector<double> feature;
  std::vector<std::string> caption;
  int origin_task = 0;
  std::uint64_t write_step = 0;

  bool operator==(const MemoryEntry&) const = default;
};

struct MemoryConfig {
  double write_prob = 0.2;
  std::uint64_t replay_every = 200;
  std::size_t capacity = 0;  // 0 = unbounded
  std::uint64_t seed = 17;

  void Validate() const;
};

// Sparse episodic memory: Bernoulli writes, one replay batch every
// replay_every training batches. Single writer.
class EpisodicMemory {
 public:
  explicit EpisodicMemory(MemoryConfig config = {});

  // Stores the entry with probability write_prob. A bounded, full memory
  // overwrites a uniformly chosen victim.
  bool MaybeWrite(MemoryEntry entry);

  // Call once per new training batch. Returns a replay batch of
  // min(batch_size, size()) distinct entries when the batch counter is a
  // positive multiple of replay_every and the memory is nonempty.
  std::optional<std::vector<MemoryEntry>> OnNewBatch(std::size_t batch_size);

  const std::vector<MemoryEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::uint64_t batch_counter() const { return batch_counter_; }
  std::uint64_t total_writes() const { return writes_; }
  std::uint64_t total_replays() const { return replays_; }
  const MemoryConfig& config() const { return config_; }

  std::string Serialize() const;
  static EpisodicMemory Deserialize(std::string_view text);
  void Snapshot(const std::string& path) const;
  static EpisodicMemory Restore(const std::string& path);

  bool operator==(const EpisodicMemory& o) const { return Serialize() == o.Serialize(); }

 private:
  MemoryConfig config_;
  Rng rng_;
  std::vector<MemoryEntry> entries_;
  std::uint64_t batch_counter_ = 0;
  std::uint64_t writes_ = 0;
  std::uint64_t replays_ = 0;
};

}  // namespace capadapt

#endif  // CAPADAPT_MEMORY_HPP_
