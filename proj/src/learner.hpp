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

#ifndef CAPADAPT_LEARNER_HPP_
#define CAPADAPT_LEARNER_HPP_

#include <deque>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "image.hpp"

namespace capadapt {

inline constexpr std::size_t kHistogramBins = 64;
inline constexpr int kPoolGrid = 8;
inline constexpr std::size_t kFeatureDim = kHistogramBins + kPoolGrid * kPoolGrid;

using Feature = std::vector<double>;

// 64-bin luma histogram (mass-normalized) followed by the 8x8 mean-pooled
// luma grid (scaled to [0,1]), L2-normalized as a whole.
Feature ExtractFeature(const ImageBuffer& img);

struct Observation {
  Feature feature;
  std::vector<std::string> caption;
};

struct LearnerConfig {
  std::string kind = "retrieval";
  std::size_t capacity = 2048;
  // Carried for gradient-based learners; the retrieval learner ignores it.
  double learning_rate = 4e-4;
};

// Contract between the training harness and a captioning model.
class Learner {
 public:
  virtual ~Learner() = default;

  virtual std::string kind() const = 0;
  virtual std::size_t feature_dim() const { return kFeatureDim; }
  virtual Feature Extract(const ImageBuffer& img) const { return ExtractFeature(img); }

  virtual void ObserveBatch(std::span<const Observation> batch) = 0;
  // Throws StateError when nothing has been learned yet.
  virtual std::vector<std::string> Generate(const Feature& feature) const = 0;
  virtual bool trained() const = 0;

  // Two-phase supervised pretraining hook (phase 1: frozen encoder, phase 2:
  // full model). Learners without such a distinction may ignore it.
  virtual void BeginPretrainPhase(int /*phase*/) {}

  virtual std::string Snapshot() const = 0;
  virtual void Restore(std::string_view snapshot) = 0;
  virtual std::unique_ptr<Learner> Clone() const = 0;

  const LearnerConfig& config() const { return config_; }

 protected:
  explicit Learner(LearnerConfig config) : config_(std::move(config)) {}
  LearnerConfig config_;
};

// Nearest-neighbour caption store with FIFO eviction beyond capacity. Equal
// distances resolve to the most recently observed entry. Observing an exact
// (feature, caption) pair already in the store is a no-op.
class RetrievalLearner : public Learner {
 public:
  explicit RetrievalLearner(LearnerConfig config = {});

  std::string kind() const override { return "retrieval"; }
  void ObserveBatch(std::span<const Observation> batch) override;
  std::vector<std::string> Generate(const Feature& feature) const override;
  bool trained() const override { return !store_.empty(); }
  std::string Snapshot() const override;
  void Restore(std::string_view snapshot) override;
  std::unique_ptr<Learner> Clone() const override { return std::make_unique<RetrievalLearner>(*this); }

  std::size_t size() const { return store_.size(); }
  std::size_t capacity() const { return config_.capacity; }
  std::uint64_t inserted() const { return inserted_; }
  const std::deque<Observation>& store() const { return store_; }

 private:
  static std::string KeyOf(const Observation& ob);

  std::deque<Observation> store_;
  std::unordered_set<std::string> keys_;
  std::uint64_t inserted_ = 0;
};

std::unique_ptr<Learner> MakeLearner(const LearnerConfig& config);

}  // namespace capadapt

#endif  // CAPADAPT_LEARNER_HPP_
