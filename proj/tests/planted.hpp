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

#ifndef CAPADAPT_TESTS_PLANTED_HPP_
#define CAPADAPT_TESTS_PLANTED_HPP_

#include <set>
#include <string>
#include <vector>

#include "common.hpp"
#include "corpus.hpp"
#include "synth.hpp"
#include "taskgen.hpp"

namespace capadapt::testing {

// 100 images x 5 captions over five keyword groups. Group 0 also carries a
// phrase seen exactly 15 times and group 1 one seen exactly 14 times. The
// last two images mix captions of groups 3 and 4.
struct PlantedCorpus {
  Corpus corpus;
  PosLexicon lexicon;
  EmbeddingTable embeddings{8};
  std::vector<std::set<std::string>> groups;
  std::string boundary_in = "zebra";
  std::string boundary_out = "yak";
};

inline PlantedCorpus MakePlantedCorpus(std::uint64_t seed = 5) {
  PlantedCorpus p;
  p.lexicon.Set("a", PosTag::kDet);
  p.lexicon.Set("of", PosTag::kOther);
  p.lexicon.Set("photo", PosTag::kOther);
  Rng rng(seed);
  auto add_word = [&](const std::string& w, int group) {
    if (p.embeddings.Find(w)) return;
    std::vector<double> v(8, 0.0);
    for (double& x : v) x = 0.2 * (UniformUnit(rng) - 0.5);
    v[static_cast<std::size_t>(group)] += 10.0;
    p.embeddings.Add(w, v);
  };
  for (int g = 0; g < 5; ++g) {
    const auto& kws = SynthKeywords(g);
    p.groups.emplace_back(kws.begin(), kws.end());
    for (const auto& kw : kws)
      for (const auto& w : SplitWhitespace(kw)) add_word(w, g);
  }
  add_word(p.boundary_in, 0);
  add_word(p.boundary_out, 1);
  p.groups[0].insert(p.boundary_in);

  std::vector<ImageRecord> images;
  int zebra = 0, yak = 0;
  for (int i = 0; i < 100; ++i) {
    const int g = i / 20;
    ImageRecord rec;
    rec.image_id = std::to_string(i + 1);
    rec.file_name = rec.image_id + ".png";
    for (int j = 0; j < 5; ++j) {
      int cg = g;
      if (i >= 98 && j % 2 == 1) cg = 3;
      std::string text;
      if (g == 0 && j == 4 && zebra < 15) {
        text = "a photo of a " + p.boundary_in;
        ++zebra;
      } else if (g == 1 && j == 4 && yak < 14) {
        text = "a photo of a " + p.boundary_out;
        ++yak;
      } else {
        text = "a photo of a " + SynthKeywords(cg)[static_cast<std::size_t>((i + j) % 4)];
      }
      rec.captions.push_back(CaptionRecord::FromText(text));
    }
    images.push_back(std::move(rec));
  }
  p.corpus = Corpus(std::move(images));
  return p;
}

// True when every cluster's keyword set equals one planted group.
inline bool RecoversPlantedGroups(const ClusteringResult& r, const PlantedCorpus& p) {
  std::set<std::set<std::string>> got, want(p.groups.begin(), p.groups.end());
  for (const auto& c : r.clusters) got.emplace(c.keywords.begin(), c.keywords.end());
  return got == want;
}

}  // namespace capadapt::testing

#endif  // CAPADAPT_TESTS_PLANTED_HPP_
