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

#include "synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "common.hpp"

namespace capadapt {

namespace fs = std::filesystem;

namespace {

const std::vector<std::vector<std::string>>& Groups() {
  static const std::vector<std::vector<std::string>> groups = {
      {"coffee mug", "cutting board", "kitchen counter", "soup bowl"},
      {"denim jacket", "wool sweater", "cotton scarf", "leather boot"},
      {"cereal box", "pasta sauce", "soda bottle", "cookie jar"},
      {"remote control", "computer screen", "phone charger", "game controller"},
      {"gift card", "bank statement", "paper receipt", "birthday envelope"},
  };
  return groups;
}

const std::vector<std::string>& Templates() {
  static const std::vector<std::string> templates = {
      "this is a {}",          "a {} held up close", "there is a {} here",
      "the {} is visible",     "a {} shown clearly", "someone is holding a {}",
      "it looks like a {}",
  };
  return templates;
}

const std::vector<std::string>& BaseNouns() {
  static const std::vector<std::string> nouns = {"object", "item", "thing", "product"};
  return nouns;
}

constexpr const char* kFunctionWords[][2] = {
    {"a", "DET"},        {"an", "DET"},        {"the", "DET"},       {"this", "DET"},
    {"is", "VERB"},      {"are", "VERB"},      {"held", "VERB"},     {"shown", "VERB"},
    {"holding", "VERB"}, {"looks", "VERB"},    {"recognize", "VERB"}, {"up", "OTHER"},
    {"close", "ADJ"},    {"there", "OTHER"},   {"here", "OTHER"},    {"visible", "ADJ"},
    {"clearly", "OTHER"}, {"someone", "OTHER"}, {"it", "OTHER"},     {"like", "OTHER"},
    {"too", "OTHER"},    {"severe", "ADJ"},    {"to", "OTHER"},      {"visual", "ADJ"},
};

std::string Fill(const std::string& tmpl, const std::string& word) {
  std::string out = tmpl;
  out.replace(out.find("{}"), 2, word);
  return out;
}

std::string FormatId(int n) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%d", n);
  return buf;
}

}  // namespace

int SynthGroupCount() { return static_cast<int>(Groups().size()); }

const std::vector<std::string>& SynthKeywords(int group) {
  if (group < 0 || group >= SynthGroupCount()) throw InvalidArgument("synthetic group out of range");
  return Groups()[static_cast<std::size_t>(group)];
}

std::string SynthCaption(const std::string& keyword, int variant) {
  const auto& t = Templates();
  return Fill(t[static_cast<std::size_t>(variant) % t.size()], keyword);
}

ImageBuffer SynthImage(int group, std::uint64_t seed, int width, int height) {
  if (width < 8 || height < 8) throw InvalidArgument("synthetic images need at least 8x8 pixels");
  ImageBuffer img(width, height);
  Rng rng(MixSeed(seed, static_cast<std::uint64_t>(group) + 1));
  const double base = 25.0 + 45.0 * (group % 5);
  const double tint[3] = {0.9 + 0.1 * UniformUnit(rng), 0.9 + 0.1 * UniformUnit(rng), 0.9 + 0.1 * UniformUnit(rng)};
  // Groups past the fifth get a striped texture (used for the base corpus).
  const double stripes = group >= 5 ? 40.0 : 0.0;
  constexpr int kBlocks = 4;
  double block[kBlocks][kBlocks];
  for (auto& row : block)
    for (double& v : row) v = (UniformUnit(rng) - 0.5) * 40.0;
  const double angle = 0.6 * group;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = static_cast<double>(x) / width, v = static_cast<double>(y) / height;
      const double ramp = 30.0 * (std::cos(angle) * u + std::sin(angle) * v);
      const double level = base + ramp + block[y * kBlocks / height][x * kBlocks / width] + (y % 2 ? stripes : -stripes);
      for (int c = 0; c < 3; ++c)
        img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(level * tint[c]), 0L, 255L));
    }
  }
  return img;
}

SynthDataset MakeSynthDataset(const SynthOptions& o) {
  if (o.groups < 1 || o.groups > SynthGroupCount())
    throw InvalidArgument("synthetic groups must lie in [1, " + std::to_string(SynthGroupCount()) + "]");
  if (o.train_images_per_group < 1 || o.val_images_per_group < 0 || o.captions_per_image < 1)
    throw InvalidArgument("synthetic image and caption counts must be positive");
  SynthDataset d;
  std::vector<ImageRecord> train, val;
  std::set<std::string> words;
  int next_id = 1;
  int global = 0;
  for (int g = 0; g < o.groups; ++g) {
    const auto& kws = SynthKeywords(g);
    d.group_keywords.push_back(kws);
    const int per_group = o.train_images_per_group + o.val_images_per_group;
    for (int i = 0; i < per_group; ++i, ++global) {
      ImageRecord rec;
      rec.image_id = FormatId(next_id++);
      rec.file_name = "img_" + rec.image_id + ".png";
      rec.split = i < o.train_images_per_group ? Split::kTrain : Split::kVal;
      const int markers = !o.quality_markers ? 0 : global % 20 == 19 ? 3 : global % 8 == 7 ? 1 : 0;
      for (int c = 0; c < o.captions_per_image; ++c) {
        const std::string text = c < markers ? std::string(kQualityMarker)
                                             : SynthCaption(kws[static_cast<std::size_t>(i + c) % kws.size()], i + 2 * c);
        rec.captions.push_back(CaptionRecord::FromText(text));
        for (const auto& w : rec.captions.back().tokens) words.insert(w);
      }
      d.images[rec.file_name] = SynthImage(g, MixSeed(o.seed, static_cast<std::uint64_t>(global)), o.width, o.height);
      (rec.split == Split::kTrain ? train : val).push_back(std::move(rec));
    }
  }
  d.train = Corpus(std::move(train));
  d.val = Corpus(std::move(val));

  for (const auto& fw : kFunctionWords) d.lexicon += std::string(fw[0]) + "\t" + fw[1] + "\n";

  Rng rng(MixSeed(o.seed, 0x656d62));
  std::vector<std::vector<double>> centres;
  for (int g = 0; g < o.groups; ++g) {
    std::vector<double> c(o.embedding_dim);
    for (double& v : c) v = 4.0 * (UniformUnit(rng) - 0.5);
    centres.push_back(std::move(c));
  }
  auto emit = [&](const std::string& word, const std::vector<double>& centre, double noise) {
    d.embeddings += word;
    for (double v : centre) {
      char buf[32];
      std::snprintf(buf, sizeof buf, " %.6f", v + noise * (UniformUnit(rng) - 0.5));
      d.embeddings += buf;
    }
    d.embeddings += "\n";
  };
  std::set<std::string> embedded;
  for (int g = 0; g < o.groups; ++g)
    for (const auto& kw : d.group_keywords[static_cast<std::size_t>(g)])
      for (const auto& w : SplitWhitespace(kw))
        if (embedded.insert(w).second) emit(w, centres[static_cast<std::size_t>(g)], 0.2);
  const std::vector<double> origin(o.embedding_dim, 0.0);
  for (const auto& w : words)
    if (embedded.insert(w).second) emit(w, origin, 2.0);

  d.thesaurus =
      "holding\tcarrying,gripping\n"
      "visible\tapparent\n"
      "shown\tdisplayed\n"
      "clearly\tplainly\n"
      "close\tnear\n"
      "mug\tcup\n"
      "jacket\tcoat\n"
      "sweater\tjumper\n"
      "screen\tdisplay,monitor\n"
      "receipt\tslip\n"
      "bottle\tflask\n";

  d.vocab = "[PAD]\n[UNK]\n";
  for (const auto& w : words) d.vocab += w + "\n";
  for (const char* piece : {"##s", "##es", "##ing", "##ed", "##er", "##ly"}) d.vocab += std::string(piece) + "\n";
  return d;
}

void WriteSynthDataset(const SynthDataset& data, const std::string& dir) {
  const fs::path root = fs::absolute(dir);
  fs::create_directories(root / "images");
  for (const auto& [name, img] : data.images) SaveImageFile(img, (root / "images" / name).string());
  SaveCorpus(data.train, (root / "train.json").string());
  SaveCorpus(data.val, (root / "val.json").string());

  // A generic base corpus over disjoint images for pretraining.
  std::vector<ImageRecord> base_train, base_val;
  const auto& nouns = BaseNouns();
  int n = 0;
  for (int g = 0; g < static_cast<int>(data.group_keywords.size()); ++g) {
    for (int i = 0; i < 10; ++i, ++n) {
      ImageRecord rec;
      rec.image_id = "base" + FormatId(n);
      rec.file_name = "base_" + FormatId(n) + ".png";
      rec.split = i < 8 ? Split::kTrain : Split::kVal;
      for (int c = 0; c < 5; ++c)
        rec.captions.push_back(CaptionRecord::FromText(SynthCaption(nouns[static_cast<std::size_t>(i + c) % nouns.size()], i + c)));
      SaveImageFile(SynthImage(g + 5, MixSeed(0x62617365, static_cast<std::uint64_t>(n)), 32, 32),
                    (root / "images" / rec.file_name).string());
      (rec.split == Split::kTrain ? base_train : base_val).push_back(std::move(rec));
    }
  }
  SaveCorpus(Corpus(std::move(base_train)), (root / "base_train.json").string());
  SaveCorpus(Corpus(std::move(base_val)), (root / "base_val.json").string());

  WriteFileAtomic((root / "lexicon.tsv").string(), data.lexicon);
  WriteFileAtomic((root / "embeddings.txt").string(), data.embeddings);
  WriteFileAtomic((root / "thesaurus.tsv").string(), data.thesaurus);
  WriteFileAtomic((root / "vocab.txt").string(), data.vocab);

  std::string order;
  for (std::size_t g = 1; g <= data.group_keywords.size(); ++g) order += (g > 1 ? "," : "") + std::to_string(g);
  const std::string conf =
      "# Generated by capadapt synth.\n"
      "base.train = " + (root / "base_train.json").string() + "\n" +
      "base.val = " + (root / "base_val.json").string() + "\n" +
      "base.image_root = " + (root / "images").string() + "\n" +
      "target.train = " + (root / "train.json").string() + "\n" +
      "target.val = " + (root / "val.json").string() + "\n" +
      "target.image_root = " + (root / "images").string() + "\n" +
      "tasks = " + (root / "clusters.json").string() + "\n" +
      "task_order = " + order + "\n" +
      "da.thesaurus = " + (root / "thesaurus.tsv").string() + "\n" +
      "output_dir = " + (root / "run").string() + "\n" +
      "patience.pretrain = 3\n"
      "max_epochs = 20\n"
      "memory.replay_every = 4\n";
  WriteFileAtomic((root / "capadapt.conf").string(), conf);
}

Task MakeSynthTask(int cluster_id, int group, std::size_t train_images, std::size_t val_images,
                   std::size_t test_images, int captions_per_image, std::uint64_t seed, int width, int height) {
  const auto& kws = SynthKeywords(group);
  Task t;
  t.cluster_id = cluster_id;
  std::size_t idx = 0;
  auto make = [&](std::size_t count, std::vector<Example>& dst) {
    for (std::size_t i = 0; i < count; ++i, ++idx) {
      Example ex;
      ex.image_id = "t" + std::to_string(cluster_id) + "_" + std::to_string(idx);
      ex.image = std::make_shared<const ImageBuffer>(SynthImage(group, MixSeed(seed, idx), width, height));
      for (int c = 0; c < captions_per_image; ++c)
        ex.captions.push_back(CaptionRecord::FromText(
            SynthCaption(kws[(idx + static_cast<std::size_t>(c)) % kws.size()], static_cast<int>(idx) + 2 * c)));
      dst.push_back(std::move(ex));
    }
  };
  make(train_images, t.train);
  make(val_images, t.val);
  make(test_images, t.test);
  return t;
}

}  // namespace capadapt
