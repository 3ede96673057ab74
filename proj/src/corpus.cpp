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

#include "corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "common.hpp"
#include "json.hpp"

namespace capadapt {

using nlohmann::json;

std::string_view SplitName(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split ParseSplit(std::string_view tag) {
  if (tag == "train") return Split::kTrain;
  if (tag == "val") return Split::kVal;
  if (tag == "test") return Split::kTest;
  throw InvalidArgument("unknown split tag '" + std::string(tag) + "'");
}

CaptionRecord CaptionRecord::FromText(std::string text) {
  CaptionRecord rec;
  rec.tokens = WordTokens(text);
  rec.text = std::move(text);
  return rec;
}

Corpus::Corpus(std::vector<ImageRecord> images, std::vector<std::string> rejected_ids)
    : images_(std::move(images)), rejected_(std::move(rejected_ids)) {
  index_.reserve(images_.size());
  for (std::size_t i = 0; i < images_.size(); ++i) {
    if (!index_.emplace(images_[i].image_id, i).second)
      throw IntegrityError("duplicate image id " + images_[i].image_id);
  }
}

const ImageRecord* Corpus::Find(const std::string& image_id) const {
  auto it = index_.find(image_id);
  return it == index_.end() ? nullptr : &images_[it->second];
}

namespace {

std::string IdString(const json& v, const std::string& what) {
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_string()) return v.get<std::string>();
  throw ParseError(what + ": id must be an integer or string");
}

bool AllDigits(const std::string& s) {
  return !s.empty() && s.size() < 18 &&
         std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::string LineOffset(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col) +
         " (offset " + std::to_string(byte) + ")";
}

}  // namespace

Corpus ParseCorpus(std::string_view json_text, Split split, const std::string& source_name) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(source_name + ": malformed JSON at " + LineOffset(json_text, e.byte));
  }
  if (!doc.is_object() || !doc.contains("images") || !doc["images"].is_array())
    throw ParseError(source_name + ": missing 'images' array");
  if (!doc.contains("annotations") || !doc["annotations"].is_array())
    throw ParseError(source_name + ": missing 'annotations' array");

  std::vector<ImageRecord> images;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& entry : doc["images"]) {
    if (!entry.is_object() || !entry.contains("id"))
      throw ParseError(source_name + ": image entry without 'id'");
    ImageRecord rec;
    rec.image_id = IdString(entry["id"], source_name);
    rec.file_name = entry.value("file_name", std::string());
    rec.split = entry.contains("split") ? ParseSplit(entry["split"].get<std::string>()) : split;
    if (!index.emplace(rec.image_id, images.size()).second)
      throw IntegrityError(source_name + ": duplicate image id " + rec.image_id);
    images.push_back(std::move(rec));
  }
  for (const auto& ann : doc["annotations"]) {
    if (!ann.is_object() || !ann.contains("image_id") || !ann.contains("caption") ||
        !ann["caption"].is_string())
      throw ParseError(source_name + ": annotation needs 'image_id' and string 'caption'");
    const std::string id = IdString(ann["image_id"], source_name);
    auto it = index.find(id);
    if (it == index.end())
      throw IntegrityError(source_name + ": annotation references unknown image id " + id);
    images[it->second].captions.push_back(CaptionRecord::FromText(ann["caption"].get<std::string>()));
  }

  std::vector<ImageRecord> kept;
  std::vector<std::string> rejected;
  kept.reserve(images.size());
  for (auto& rec : images) {
    if (rec.captions.empty()) {
      rejected.push_back(rec.image_id);
    } else {
      kept.push_back(std::move(rec));
    }
  }
  return Corpus(std::move(kept), std::move(rejected));
}

Corpus LoadCorpus(const std::string& path, Split split) {
  return ParseCorpus(ReadFile(path), split, path);
}

std::string SerializeCorpus(const Corpus& corpus) {
  json images = json::array();
  json annotations = json::array();
  std::int64_t ann_id = 0;
  for (const auto& rec : corpus.images()) {
    json id = AllDigits(rec.image_id) ? json(std::stoll(rec.image_id)) : json(rec.image_id);
    images.push_back({{"id", id}, {"file_name", rec.file_name}, {"split", SplitName(rec.split)}});
    for (const auto& cap : rec.captions)
      annotations.push_back({{"id", ann_id++}, {"image_id", id}, {"caption", cap.text}});
  }
  json doc = {{"images", images}, {"annotations", annotations}};
  return doc.dump(1) + "\n";
}

void SaveCorpus(const Corpus& corpus, const std::string& path) {
  WriteFileAtomic(path, SerializeCorpus(corpus));
}

Corpus MergeCorpora(const std::vector<const Corpus*>& parts) {
  std::vector<ImageRecord> all;
  for (const Corpus* c : parts)
    all.insert(all.end(), c->images().begin(), c->images().end());
  return Corpus(std::move(all));
}

SplitCorpora RemapSplits(const Corpus& train, const Corpus& val, double holdout_fraction,
                         std::uint64_t seed) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
    throw InvalidArgument("holdout fraction must lie in (0, 1)");
  if (train.empty()) throw InvalidArgument("cannot remap splits of an empty training corpus");
  for (const auto& rec : val.images()) {
    if (train.Find(rec.image_id))
      throw IntegrityError("image id " + rec.image_id + " occurs in both train and val");
  }

  const std::size_t n = train.size();
  const auto n_val = static_cast<std::size_t>(std::floor(holdout_fraction * static_cast<double>(n) + 1e-9));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[UniformIndex(rng, i)]);
  std::vector<bool> to_val(n, false);
  for (std::size_t i = 0; i < n_val; ++i) to_val[order[i]] = true;

  std::vector<ImageRecord> out_train, out_val, out_test;
  for (std::size_t i = 0; i < n; ++i) {
    ImageRecord rec = train.images()[i];
    rec.split = to_val[i] ? Split::kVal : Split::kTrain;
    (to_val[i] ? out_val : out_train).push_back(std::move(rec));
  }
  for (ImageRecord rec : val.images()) {
    rec.split = Split::kTest;
    out_test.push_back(std::move(rec));
  }
  return {Corpus(std::move(out_train)), Corpus(std::move(out_val)), Corpus(std::move(out_test))};
}

FilterResult ApplyQualityFilter(const Corpus& corpus, std::string_view marker) {
  const std::string want = Trim(marker);
  FilterResult result;
  std::vector<ImageRecord> kept;
  for (const auto& rec : corpus.images()) {
    if (rec.split == Split::kTest) {
      kept.push_back(rec);
      continue;
    }
    std::vector<CaptionRecord> survivors;
    std::size_t marked = 0;
    for (const auto& cap : rec.captions) {
      if (Trim(cap.text) == want) {
        ++marked;
      } else {
        survivors.push_back(cap);
      }
    }
    if (marked >= 3 || survivors.empty()) {
      result.excluded_ids.push_back(rec.image_id);
      continue;
    }
    ImageRecord out = rec;
    if (marked > 0) {
      const std::size_t n_survivors = survivors.size();
      for (std::size_t i = 0; survivors.size() < kCaptionsPerImage; ++i)
        survivors.push_back(survivors[i % n_survivors]);
      out.captions = std::move(survivors);
    }
    kept.push_back(std::move(out));
  }
  result.corpus = Corpus(std::move(kept));
  return result;
}

CorpusStats ComputeStats(const Corpus& corpus) {
  if (corpus.empty()) throw InvalidArgument("statistics requested for an empty corpus");
  CorpusStats stats;
  std::set<std::string> types;
  for (const auto& rec : corpus.images()) {
    ++stats.images_per_split[rec.split];
    for (const auto& cap : rec.captions) types.insert(cap.tokens.begin(), cap.tokens.end());
  }
  stats.total_images = corpus.size();
  stats.word_types = types.size();
  return stats;
}

std::string StatsToJson(const CorpusStats& stats) {
  json per_split = json::object();
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    auto it = stats.images_per_split.find(s);
    per_split[std::string(SplitName(s))] = it == stats.images_per_split.end() ? 0 : it->second;
  }
  json doc = {{"images", per_split}, {"total_images", stats.total_images},
              {"word_types", stats.word_types}};
  return doc.dump(1);
}

}  // namespace capadapt
