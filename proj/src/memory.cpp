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

#include "memory.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace capadapt {

namespace {
constexpr std::string_view kMagic = "capadapt-memory 1";
}

void MemoryConfig::Validate() const {
  if (!(write_prob >= 0.0 && write_prob <= 1.0)) throw ConfigError("memory.write_prob must lie in [0, 1]");
  if (replay_every < 1) throw ConfigError("memory.replay_every must be >= 1");
}

EpisodicMemory::EpisodicMemory(MemoryConfig config) : config_(config), rng_(config.seed) {
  config_.Validate();
}

bool EpisodicMemory::MaybeWrite(MemoryEntry entry) {
  if (!(UniformUnit(rng_) < config_.write_prob)) return false;
  entry.write_step = batch_counter_;
  if (config_.capacity > 0 && entries_.size() >= config_.capacity) {
    entries_[UniformIndex(rng_, entries_.size())] = std::move(entry);
  } else {
    entries_.push_back(std::move(entry));
  }
  ++writes_;
  return true;
}

std::optional<std::vector<MemoryEntry>> EpisodicMemory::OnNewBatch(std::size_t batch_size) {
  ++batch_counter_;
  if (batch_counter_ % config_.replay_every != 0 || entries_.empty() || batch_size == 0) return std::nullopt;
  const std::size_t take = std::min(batch_size, entries_.size());
  std::vector<std::size_t> idx(entries_.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<MemoryEntry> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    std::swap(idx[i], idx[i + UniformIndex(rng_, idx.size() - i)]);
    out.push_back(entries_[idx[i]]);
  }
  ++replays_;
  return out;
}

std::string EpisodicMemory::Serialize() const {
  std::ostringstream out;
  char prob[64];
  std::snprintf(prob, sizeof prob, "%a", config_.write_prob);
  out << kMagic << "\n"
      << "write_prob " << prob << "\n"
      << "replay_every " << config_.replay_every << "\n"
      << "capacity " << config_.capacity << "\n"
      << "seed " << config_.seed << "\n"
      << "batch_counter " << batch_counter_ << "\n"
      << "writes " << writes_ << "\n"
      << "replays " << replays_ << "\n"
      << "rng " << rng_ << "\n"
      << "entries " << entries_.size() << "\n";
  for (const auto& e : entries_) {
    nlohmann::json rec = {e.origin_task, e.write_step, e.feature, e.caption};
    out << rec.dump() << "\n";
  }
  out << "end\n";
  return out.str();
}

EpisodicMemory EpisodicMemory::Deserialize(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  auto fail = [](const std::string& why) { return ParseError("corrupt memory snapshot: " + why); };
  if (!std::getline(in, line) || line != kMagic) throw fail("bad header");

  auto field = [&](const char* name) {
    if (!std::getline(in, line)) throw fail(std::string("missing ") + name);
    const std::string prefix = std::string(name) + " ";
    if (line.compare(0, prefix.size(), prefix) != 0) throw fail(std::string("expected ") + name);
    return line.substr(prefix.size());
  };
  auto as_u64 = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(s, &used);
      if (used != s.size()) throw fail("trailing characters in '" + s + "'");
      return static_cast<std::uint64_t>(v);
    } catch (const std::logic_error&) {
      throw fail("bad integer '" + s + "'");
    }
  };

  MemoryConfig cfg;
  cfg.write_prob = std::strtod(field("write_prob").c_str(), nullptr);
  cfg.replay_every = as_u64(field("replay_every"));
  cfg.capacity = as_u64(field("capacity"));
  cfg.seed = as_u64(field("seed"));
  EpisodicMemory mem(cfg);
  mem.batch_counter_ = as_u64(field("batch_counter"));
  mem.writes_ = as_u64(field("writes"));
  mem.replays_ = as_u64(field("replays"));
  {
    std::istringstream rs(field("rng"));
    rs >> mem.rng_;
    if (!rs) throw fail("bad rng state");
  }
  const auto n = as_u64(field("entries"));
  for (std::uint64_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw fail("truncated entries");
    try {
      const auto rec = nlohmann::json::parse(line);
      MemoryEntry e;
      e.origin_task = rec.at(0).get<int>();
      e.write_step = rec.at(1).get<std::uint64_t>();
      e.feature = rec.at(2).get<std::vector<double>>();
      e.caption = rec.at(3).get<std::vector<std::string>>();
      mem.entries_.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw fail(std::string("entry ") + std::to_string(i) + ": " + ex.what());
    }
  }
  if (!std::getline(in, line) || line != "end") throw fail("missing end marker");
  return mem;
}

void EpisodicMemory::Snapshot(const std::string& path) const { WriteFileAtomic(path, Serialize()); }

EpisodicMemory EpisodicMemory::Restore(const std::string& path) { return Deserialize(ReadFile(path)); }

}  // namespace capadapt
