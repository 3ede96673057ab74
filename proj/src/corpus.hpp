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

#ifndef CAPADAPT_CORPUS_HPP_
#define CAPADAPT_CORPUS_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace capadapt {

enum class Split { kTrain, kVal, kTest };

std::string_view SplitName(Split s);
Split ParseSplit(std::string_view tag);

inline constexpr std::string_view kQualityMarker =
    "Quality issues are too severe to recognize visual content";
inline constexpr std::size_t kCaptionsPerImage = 5;

struct CaptionRecord {
  std::string text;
  std::vector<std::string> tokens;

  static CaptionRecord FromText(std::string text);
  bool operator==(const CaptionRecord&) const = default;
};

struct ImageRecord {
  std::string image_id;
  std::string file_name;
  std::vector<CaptionRecord> captions;
  Split split = Split::kTrain;

  bool operator==(const ImageRecord&) const = default;
};

// Immutable after construction. Image ids are unique.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<ImageRecord> images,
                  std::vector<std::string> rejected_ids = {});

  const std::vector<ImageRecord>& images() const { return images_; }
  // Images dropped at load time because no caption referenced them.
  const std::vector<std::string>& rejected_ids() const { return rejected_; }
  std::size_t size() const { return images_.size(); }
  bool empty() const { return images_.empty(); }
  const ImageRecord* Find(const std::string& image_id) const;

  bool operator==(const Corpus& o) const { return images_ == o.images_; }

 private:
  std::vector<ImageRecord> images_;
  std::vector<std::string> rejected_;
  std::unordered_map<std::string, std::size_t> index_;
};

// COCO-caption style: {"images":[{"id","file_name"}],
// "annotations":[{"image_id","caption"}]}. A per-image "split" field, when
// present, overrides `split`.
Corpus LoadCorpus(const std::string& path, Split split);
Corpus ParseCorpus(std::string_view json_text, Split split,
                   const std::string& source_name = "<memory>");
std::string SerializeCorpus(const Corpus& corpus);
void SaveCorpus(const Corpus& corpus, const std::string& path);

// Concatenates corpora; image ids must stay unique.
Corpus MergeCorpora(const std::vector<const Corpus*>& parts);

struct SplitCorpora {
  Corpus train;
  Corpus val;
  Corpus test;
};

// The original validation corpus becomes the test split and a seeded
// holdout_fraction of the training images becomes the new validation split.
SplitCorpora RemapSplits(const Corpus& train, const Corpus& val,
                         double holdout_fraction = 0.2,
                         std::uint64_t seed = 13);

struct FilterResult {
  Corpus corpus;
  std::vector<std::string> excluded_ids;
};

// Images with >= 3 marker captions are dropped; 1-2 marker captions are
// replaced by cycling the surviving captions in order. Test images pass
// through untouched.
FilterResult ApplyQualityFilter(const Corpus& corpus,
                                std::string_view marker = kQualityMarker);

struct CorpusStats {
  std::map<Split, std::size_t> images_per_split;
  std::size_t total_images = 0;
  std::size_t word_types = 0;
};

CorpusStats ComputeStats(const Corpus& corpus);
std::string StatsToJson(const CorpusStats& stats);

}  // namespace capadapt

#endif  // CAPADAPT_CORPUS_HPP_
