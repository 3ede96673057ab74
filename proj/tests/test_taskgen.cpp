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

#include <cmath>
#include <map>
#include <set>

#include "planted.hpp"
#include "taskgen.hpp"
#include "test_util.hpp"

namespace capadapt {
namespace {

using testing::ExpectError;
using testing::MakeImage;

std::vector<std::string> Surfaces(const std::vector<NounPhrase>& nps) {
  std::vector<std::string> out;
  for (const auto& np : nps) out.push_back(np.surface);
  return out;
}

std::vector<std::vector<double>> RandomPoints(Rng& rng, std::size_t n, std::size_t d) {
  std::vector<std::vector<double>> pts(n, std::vector<double>(d));
  const std::size_t centres = 1 + UniformIndex(rng, 6);
  std::vector<std::vector<double>> c(centres, std::vector<double>(d));
  for (auto& v : c)
    for (double& x : v) x = 20.0 * UniformUnit(rng) - 10.0;
  for (auto& p : pts) {
    const auto& base = c[UniformIndex(rng, centres)];
    for (std::size_t j = 0; j < d; ++j) p[j] = base[j] + 3.0 * (UniformUnit(rng) - 0.5);
  }
  return pts;
}

ClusterSpec Spec(int id, std::vector<std::string> kws) { return {id, std::move(kws), {}}; }

TEST_SUITE("taskgen") {
  TEST_CASE("noun phrase chunking with the shipped lexicon") {
    const auto lex = PosLexicon::Load(testing::DataPath("../../data/lexicon.tsv"));
    CHECK(Surfaces(ExtractNounPhrases(CaptionRecord::FromText("a gift card on a wooden countertop"), lex)) ==
          std::vector<std::string>{"gift card", "wooden countertop"});
    CHECK(ExtractNounPhrases(CaptionRecord::FromText(""), lex).empty());
  }

  TEST_CASE("chunker pattern") {
    PosLexicon lex;
    lex.Set("the", PosTag::kDet);
    lex.Set("red", PosTag::kAdj);
    lex.Set("is", PosTag::kVerb);
    lex.Set("big", PosTag::kAdj);
    const std::vector<std::string> toks{"the", "red", "mug", "is", "big", "red", "box", "big"};
    CHECK(Surfaces(ExtractNounPhrases(toks, lex)) == std::vector<std::string>{"red mug", "big red box"});
    const std::vector<std::string> adjs{"red", "big"};
    CHECK(ExtractNounPhrases(adjs, lex).empty());
  }

  TEST_CASE("lexicon parsing") {
    const auto lex = PosLexicon::Parse("# comment\nthe\tDET\nred\tADJ\n\nrun\tVERB\n");
    CHECK(lex.Tag("red") == PosTag::kAdj);
    CHECK(lex.Tag("unknown") == PosTag::kNoun);
    ExpectError(ErrorCode::kParse, [] { PosLexicon::Parse("the DET\n"); });
    ExpectError(ErrorCode::kParse, [] { PosLexicon::Parse("the\tXYZ\n"); });
  }

  TEST_CASE("keyword threshold is inclusive") {
    const PhraseCounts counts{{"cat", 20}, {"hot dog", 15}, {"sky", 3}, {"tree", 14}};
    const auto kws = SelectKeywords(counts);
    REQUIRE(kws.size() == 2);
    CHECK(kws[0] == KeywordCandidate{"cat", 20});
    CHECK(kws[1] == KeywordCandidate{"hot dog", 15});
    const auto ties = SelectKeywords({{"b", 4}, {"a", 4}, {"c", 9}}, 1);
    CHECK(ties[0].surface == "c");
    CHECK(ties[1].surface == "a");
  }

  TEST_CASE("embedding parsing and keyword averaging") {
    const auto t = EmbeddingTable::Parse("gift 1 2 3\ncard 3 4 5\napple 0.5 -1 2\n");
    CHECK(t.dim() == 3);
    CHECK(*EmbedKeyword("apple", t) == std::vector<double>{0.5, -1, 2});
    CHECK(*EmbedKeyword("gift card", t) == std::vector<double>{2, 3, 4});
    CHECK(*EmbedKeyword("zzqq card", t) == std::vector<double>{3, 4, 5});
    CHECK_FALSE(EmbedKeyword("zzqq", t).has_value());
    ExpectError(ErrorCode::kParse, [] { EmbeddingTable::Parse("a 1 2\nb 1 2 3\n"); });
    ExpectError(ErrorCode::kParse, [] { EmbeddingTable::Parse("a 1 x\n"); });
    ExpectError(ErrorCode::kParse, [] { EmbeddingTable::Parse("a\n"); });
  }

  TEST_CASE("k-means degenerate and blob cases") {
    const std::vector<std::vector<double>> three{{0, 0}, {5, 5}, {9, 1}};
    const auto r = KMeans(three, 3, 1);
    CHECK(std::set<int>(r.labels.begin(), r.labels.end()).size() == 3);
    CHECK(Wcss(three, r.labels, r.centroids) == 0.0);

    Rng rng(2);
    std::vector<std::vector<double>> blobs;
    for (int i = 0; i < 40; ++i) {
      const double off = i < 20 ? -100.0 : 100.0;
      blobs.push_back({off + UniformUnit(rng), off + UniformUnit(rng)});
    }
    const auto b = KMeans(blobs, 2, 9);
    for (int i = 0; i < 40; ++i) CHECK(b.labels[i] == b.labels[i < 20 ? 0 : 39]);
    CHECK(b.labels[0] != b.labels[39]);
    const auto again = KMeans(blobs, 2, 9);
    CHECK(again.labels == b.labels);
    CHECK(again.centroids == b.centroids);

    ExpectError(ErrorCode::kInvalidArgument, [&] { KMeans(three, 4, 1); });
    ExpectError(ErrorCode::kInvalidArgument, [] { KMeans({{0.0, NAN}, {1.0, 1.0}}, 1, 1); });
  }

  TEST_CASE("k-means wcss never increases") {
    Rng rng(2024);
    for (int inst = 0; inst < 100; ++inst) {
      const std::size_t d = 1 + UniformIndex(rng, 10);
      const std::size_t n = 5 + UniformIndex(rng, 196);
      const int k = 1 + static_cast<int>(UniformIndex(rng, 5));
      const auto pts = RandomPoints(rng, n, d);
      const auto r = KMeans(pts, k, inst);
      REQUIRE_FALSE(r.wcss_trace.empty());
      for (std::size_t i = 1; i < r.wcss_trace.size(); ++i)
        CHECK(r.wcss_trace[i] <= r.wcss_trace[i - 1] + 1e-9 * (1.0 + r.wcss_trace[i - 1]));
    }
  }

  TEST_CASE("assignment favours the currently smaller cluster") {
    std::vector<ImageRecord> imgs;
    for (int i = 1; i <= 10; ++i) imgs.push_back(MakeImage(std::to_string(i), {"a red cat"}));
    for (int i = 11; i <= 15; ++i) imgs.push_back(MakeImage(std::to_string(i), {"a hot dog"}));
    imgs.push_back(MakeImage("16", {"a cat", "the hot dog"}));
    imgs.push_back(MakeImage("17", {"a tree"}));
    imgs.push_back(MakeImage("18", {"scattered"}));
    const auto a = AssignImages(Corpus(imgs), {Spec(1, {"cat"}), Spec(2, {"hot dog"})});
    CHECK(a.cluster_of.at("16") == 2);
    CHECK(a.cluster_of.at("1") == 1);
    CHECK(a.unassigned == std::vector<std::string>{"17", "18"});
  }

  TEST_CASE("ties go to the lower cluster id and longest match wins") {
    const Corpus c({MakeImage("1", {"a hot dog", "a dog"})});
    CHECK(AssignImages(c, {Spec(1, {"dog"}), Spec(2, {"hot dog"})}).cluster_of.at("1") == 1);
    const Corpus only_long({MakeImage("1", {"a hot dog"})});
    CHECK(AssignImages(only_long, {Spec(1, {"dog"}), Spec(2, {"hot dog"})}).cluster_of.at("1") == 2);
    ExpectError(ErrorCode::kInvalidArgument, [&] { AssignImages(c, {Spec(1, {"dog"}), Spec(2, {"dog"})}); });
  }

  TEST_CASE("numeric image ids are processed in numeric order") {
    CHECK(ImageIdLess("9", "10"));
    CHECK_FALSE(ImageIdLess("10", "9"));
    CHECK(ImageIdLess("a10", "a9"));
  }

  TEST_CASE("planted keyword groups are recovered") {
    testing::WarningCapture quiet;
    const auto p = testing::MakePlantedCorpus();
    const auto r = BuildClusters(p.corpus, p.lexicon, p.embeddings, {});
    bool in = false, out = false;
    for (const auto& kw : r.keywords) {
      in |= kw.surface == p.boundary_in && kw.frequency == 15;
      out |= kw.surface == p.boundary_out;
    }
    CHECK(in);
    CHECK_FALSE(out);
    CHECK(testing::RecoversPlantedGroups(r, p));
    CHECK(r.assignment.cluster_of.size() + r.assignment.unassigned.size() == p.corpus.size());
    const auto again = BuildClusters(p.corpus, p.lexicon, p.embeddings, {});
    CHECK(again.assignment.cluster_of == r.assignment.cluster_of);
  }

  TEST_CASE("cluster file round-trips and tabulates") {
    testing::WarningCapture quiet;
    const auto p = testing::MakePlantedCorpus();
    const auto r = BuildClusters(p.corpus, p.lexicon, p.embeddings, {});
    const ClusterFile f = MakeClusterFile(p.corpus, r);
    const ClusterFile back = ParseClusterFile(SerializeClusterFile(f));
    REQUIRE(back.clusters.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(back.clusters[i].cluster_id == f.clusters[i].cluster_id);
      CHECK(back.clusters[i].keywords == f.clusters[i].keywords);
      CHECK(back.clusters[i].image_ids == f.clusters[i].image_ids);
    }
    const auto table = ClusterTable(p.corpus, f);
    REQUIRE(table.size() == 6);
    CHECK(table.back().label == "all");
    CHECK(table.back().train == 100);
    ExpectError(ErrorCode::kParse, [] { ParseClusterFile("{}"); });
    ExpectError(ErrorCode::kIntegrity, [&] {
      ClusterFile bad = f;
      bad.clusters[0].image_ids[Split::kTrain].push_back("999");
      ClusterTable(p.corpus, bad);
    });
  }
}

}  // namespace
}  // namespace capadapt
