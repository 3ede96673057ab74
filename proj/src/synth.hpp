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

#ifndef CAPADAPT_SYNTH_HPP_
#define CAPADAPT_SYNTH_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "image.hpp"
#include "trainer.hpp"

namespace capadapt {

// Small deterministic stand-in for a captioned image collection: each
// group has its own keywords, caption vocabulary and visual signature.
struct SynthOptions {
  int groups = 5;
  int train_images_per_group = 24;
  int val_images_per_group = 6;
  int captions_per_image = 5;
  int width = 32;
  int height = 32;
  std::uint64_t seed = 1;
  // Every 8th image gets one marker caption and every 20th gets three.
  bool quality_markers = true;
  std::size_t embedding_dim = 8;
};

struct SynthDataset {
  Corpus train;
  Corpus val;
  std::map<std::string, ImageBuffer> images;  // by file name
  std::vector<std::vector<std::string>> group_keywords;
  std::string lexicon;     // word<TAB>TAG
  std::string embeddings;  // token v1 ... vd
  std::string thesaurus;   // word<TAB>syn,syn
  std::string vocab;       // one subword per line
};

// Number of keyword groups available.
int SynthGroupCount();
const std::vector<std::string>& SynthKeywords(int group);

// Image with the visual signature of `group` and per-image detail from `seed`.
ImageBuffer SynthImage(int group, std::uint64_t seed, int width, int height);
// Caption variant `variant` (0-based) describing `keyword`.
std::string SynthCaption(const std::string& keyword, int variant);

SynthDataset MakeSynthDataset(const SynthOptions& options);
// Writes train.json, val.json, images/, lexicon.tsv, embeddings.txt,
// thesaurus.tsv, vocab.txt and a ready-to-use capadapt.conf.
void WriteSynthDataset(const SynthDataset& data, const std::string& dir);

// In-memory task of distinct images whose captions name one group's keywords.
Task MakeSynthTask(int cluster_id, int group, std::size_t train_images, std::size_t val_images,
                   std::size_t test_images, int captions_per_image, std::uint64_t seed, int width = 24,
                   int height = 24);

}  // namespace capadapt

#endif  // CAPADAPT_SYNTH_HPP_
