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

#ifndef CAPADAPT_AUGMENT_HPP_
#define CAPADAPT_AUGMENT_HPP_

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "common.hpp"
#include "corpus.hpp"
#include "image.hpp"

namespace capadapt {

enum class AugmentMode { kNo, kImg, kTxt, kBoth };

AugmentMode ParseAugmentMode(std::string_view s);
std::string_view AugmentModeName(AugmentMode m);

struct ImageAugmentParams {
  double flip_prob = 0.5;
  double rotate_prob = 0.3;
  double blur_prob = 0.3;
  double clahe_prob = 0.3;
  double grid_prob = 0.3;
  double optical_prob = 0.3;

  double max_rotate_deg = 15.0;
  double blur_sigma_min = 0.5;
  double blur_sigma_max = 1.5;
  int clahe_tiles = 8;
  double clahe_clip = 2.0;
  int grid_nodes = 5;
  double grid_jitter = 0.05;  // fraction of the dimension
  double optical_max_k = 0.05;

  void Validate() const;
};

// Individual transforms. All keep the input dimensions.
ImageBuffer FlipHorizontal(const ImageBuffer& img);
// Counter-clockwise rotation about the centre, bilinear, edge replication.
ImageBuffer Rotate(const ImageBuffer& img, double degrees);
ImageBuffer GaussianBlur(const ImageBuffer& img, double sigma);
// Contrast-limited adaptive histogram equalization of the luma channel.
ImageBuffer Clahe(const ImageBuffer& img, int tiles = 8, double clip_limit = 2.0);
// offsets: nodes x nodes control points, (dx, dy) in pixels, row-major.
ImageBuffer GridDistort(const ImageBuffer& img, int nodes, std::span<const std::array<double, 2>> offsets);
// Radial distortion; k < 0 barrel, k > 0 pincushion.
ImageBuffer OpticalDistort(const ImageBuffer& img, double k);

// Equalization table for one tile histogram, exposed for testing.
std::array<std::uint8_t, 256> ClaheLut(std::span<const std::uint32_t, 256> hist, std::uint32_t area,
                                       double clip_limit);

ImageBuffer AugmentImage(const ImageBuffer& img, const ImageAugmentParams& params, Rng& rng);

class Thesaurus {
 public:
  // word<TAB>syn1,syn2,...
  static Thesaurus Load(const std::string& path);
  static Thesaurus Parse(std::string_view text);

  void Add(const std::string& word, std::vector<std::string> synonyms);
  const std::vector<std::string>* Synonyms(const std::string& word) const;
  bool empty() const { return table_.empty(); }

 private:
  std::unordered_map<std::string, std::vector<std::string>> table_;
};

bool IsStopWord(const std::string& word);

enum class TextEdit { kReplace, kSwap, kDelete, kInsert };

// Single deterministic edits.
std::vector<std::string> SwapTokens(std::vector<std::string> tokens, std::size_t i, std::size_t j);
// Never shrinks below three tokens.
std::vector<std::string> DeleteToken(std::vector<std::string> tokens, std::size_t i);
// Inserts a copy of tokens[src] before position pos.
std::vector<std::string> InsertDuplicate(std::vector<std::string> tokens, std::size_t src, std::size_t pos);

// One randomly chosen edit. Replacement is only offered with a thesaurus.
std::vector<std::string> AugmentText(const std::vector<std::string>& tokens, Rng& rng,
                                     const Thesaurus* thesaurus = nullptr);

class ParaphraseProvider {
 public:
  virtual ~ParaphraseProvider() = default;
  virtual std::string name() const = 0;
  // Up to n paraphrases. Throws ConfigError for n < 1.
  virtual std::vector<std::string> Generate(const std::string& caption, int n, Rng& rng) = 0;
};

// EDA-style composite edits; returns distinct captions different from the source.
class OfflineParaphraser : public ParaphraseProvider {
 public:
  explicit OfflineParaphraser(std::shared_ptr<const Thesaurus> thesaurus = nullptr)
      : thesaurus_(std::move(thesaurus)) {}
  std::string name() const override { return "offline"; }
  std::vector<std::string> Generate(const std::string& caption, int n, Rng& rng) override;

 private:
  std::shared_ptr<const Thesaurus> thesaurus_;
};

// POST <url> {"text", "n"} -> {"paraphrases": [...]}. Falls back to the
// offline provider with a warning when the endpoint fails.
class RemoteParaphraser : public ParaphraseProvider {
 public:
  RemoteParaphraser(std::string url, std::shared_ptr<ParaphraseProvider> fallback, int timeout_ms = 2000);
  std::string name() const override { return "remote:" + url_; }
  std::vector<std::string> Generate(const std::string& caption, int n, Rng& rng) override;

 private:
  std::string url_;
  std::shared_ptr<ParaphraseProvider> fallback_;
  int timeout_ms_;
};

// Spreads requests round-robin over providers.
class ParaphrasePool {
 public:
  explicit ParaphrasePool(std::vector<std::shared_ptr<ParaphraseProvider>> providers);
  // rotation shifts which provider receives the first request.
  std::vector<std::string> Generate(const std::string& caption, int n, Rng& rng, std::size_t rotation = 0);
  std::size_t size() const { return providers_.size(); }

 private:
  std::vector<std::shared_ptr<ParaphraseProvider>> providers_;
};

// A training sample; copies produced by augmentation keep the source image_id.
struct Sample {
  std::string image_id;
  std::shared_ptr<const ImageBuffer> image;
  std::vector<std::string> caption;
  int origin_task = 0;
  Split split = Split::kTrain;
  int copy_index = 0;  // 0 = original
};

struct AugmentConfig {
  AugmentMode mode = AugmentMode::kNo;
  int factor = 10;
  std::uint64_t seed = 1;
  ImageAugmentParams image;

  void Validate() const;
};

struct AugmentCounters {
  std::size_t images_augmented = 0;
  std::size_t captions_augmented = 0;
  std::size_t non_train_inputs = 0;  // samples from val/test seen by ExpandBatch
};

// Each sample contributes itself plus factor-1 copies (mode kNo: itself only).
// Copy RNG streams derive from (seed, round, image_id, copy_index).
std::vector<Sample> ExpandBatch(std::span<const Sample> samples, const AugmentConfig& config,
                                ParaphrasePool* paraphrasers = nullptr, std::uint64_t round = 0,
                                AugmentCounters* counters = nullptr);

}  // namespace capadapt

#endif  // CAPADAPT_AUGMENT_HPP_
