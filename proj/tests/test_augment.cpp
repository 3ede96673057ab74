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

#include <fstream>
#include <set>
#include <thread>

#include "augment.hpp"
#include "httplib.h"
#include "json.hpp"
#include "test_util.hpp"

namespace capadapt {
namespace {

using testing::ExpectError;

ImageBuffer Pattern(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  ImageBuffer img(w, h);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(UniformIndex(rng, 256));
  return img;
}

std::size_t EditDistance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::vector<Sample> MakeSamples(std::size_t n, Split split = Split::kTrain) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.image_id = "img" + std::to_string(i);
    s.image = std::make_shared<const ImageBuffer>(Pattern(12, 10, i));
    s.caption = {"a", "red", "coffee", "mug", "on", "the", "kitchen", "table", "number", std::to_string(i)};
    s.split = split;
    out.push_back(std::move(s));
  }
  return out;
}

ImageAugmentParams NoOps() {
  ImageAugmentParams p;
  p.flip_prob = p.rotate_prob = p.blur_prob = p.clahe_prob = p.grid_prob = p.optical_prob = 0.0;
  return p;
}

class FixedProvider : public ParaphraseProvider {
 public:
  explicit FixedProvider(std::string tag) : tag_(std::move(tag)) {}
  std::string name() const override { return tag_; }
  std::vector<std::string> Generate(const std::string&, int n, Rng&) override {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back(tag_ + " " + std::to_string(i));
    ++calls;
    return out;
  }
  int calls = 0;

 private:
  std::string tag_;
};

TEST_SUITE("augment") {
  TEST_CASE("flip twice is the identity") {
    const ImageBuffer img = Pattern(9, 7, 1);
    CHECK(FlipHorizontal(img) != img);
    CHECK(FlipHorizontal(FlipHorizontal(img)) == img);
  }

  TEST_CASE("zero-parameter transforms are identities") {
    const ImageBuffer img = Pattern(16, 12, 2);
    CHECK(Rotate(img, 0.0) == img);
    CHECK(OpticalDistort(img, 0.0) == img);
    const std::vector<std::array<double, 2>> zero(25, {0.0, 0.0});
    CHECK(GridDistort(img, 5, zero) == img);
    Rng rng(3);
    for (int i = 0; i < 20; ++i) CHECK(AugmentImage(img, NoOps(), rng) == img);
  }

  TEST_CASE("transforms keep dimensions") {
    const ImageBuffer img = Pattern(17, 11, 4);
    ImageAugmentParams all;
    all.flip_prob = all.rotate_prob = all.blur_prob = all.clahe_prob = all.grid_prob = all.optical_prob = 1.0;
    Rng rng(5);
    for (int i = 0; i < 10; ++i) {
      const ImageBuffer out = AugmentImage(img, all, rng);
      CHECK(out.width == 17);
      CHECK(out.height == 11);
      CHECK(out.valid());
    }
    CHECK(Rotate(img, 90.0).valid());
    CHECK(GaussianBlur(img, 1.5).valid());
  }

  TEST_CASE("clahe matches the reference on grey images") {
    std::ifstream in(testing::DataPath("clahe_fixtures.json"));
    REQUIRE(in.good());
    const auto doc = nlohmann::json::parse(in);
    REQUIRE(doc.size() == 4);
    for (const auto& [name, fx] : doc.items()) {
      CAPTURE(name);
      const int w = fx["width"].get<int>(), h = fx["height"].get<int>();
      const auto input = fx["input"].get<std::vector<int>>();
      const auto want = fx["output"].get<std::vector<int>>();
      ImageBuffer img(w, h);
      for (std::size_t i = 0; i < input.size(); ++i)
        for (int c = 0; c < 3; ++c) img.pixels[3 * i + c] = static_cast<std::uint8_t>(input[i]);
      const ImageBuffer out = Clahe(img, 8, 2.0);
      int mismatches = 0;
      for (std::size_t i = 0; i < want.size(); ++i)
        for (int c = 0; c < 3; ++c) mismatches += out.pixels[3 * i + c] != want[i];
      CHECK(mismatches == 0);
    }
  }

  TEST_CASE("clahe on a constant image stays constant") {
    const ImageBuffer img(16, 16, 97);
    const ImageBuffer out = Clahe(img);
    for (auto p : out.pixels) CHECK(p == out.pixels[0]);
  }

  TEST_CASE("text edits") {
    CHECK(SwapTokens({"a", "red", "car"}, 1, 2) == std::vector<std::string>{"a", "car", "red"});
    CHECK(DeleteToken({"a", "red", "car"}, 1) == std::vector<std::string>{"a", "red", "car"});
    CHECK(DeleteToken({"a", "big", "red", "car"}, 1) == std::vector<std::string>{"a", "red", "car"});
    CHECK(InsertDuplicate({"a", "car"}, 1, 0) == std::vector<std::string>{"car", "a", "car"});
    Rng rng(1);
    CHECK(AugmentText({}, rng).empty());
  }

  TEST_CASE("text augmentation stays within edit distance two") {
    const std::vector<std::string> src{"a", "small", "red", "coffee", "mug", "on", "the", "wooden", "kitchen", "table"};
    Thesaurus th = Thesaurus::Parse("small\tlittle,tiny\nred\tcrimson\nmug\tcup\n");
    Rng rng(42);
    for (int i = 0; i < 1000; ++i) {
      const auto out = AugmentText(src, rng, i % 2 ? &th : nullptr);
      CHECK(EditDistance(src, out) <= 2);
      CHECK(out.size() >= 3);
    }
  }

  TEST_CASE("stop words are never replaced") {
    const std::vector<std::string> src{"the", "a", "on"};
    Thesaurus th = Thesaurus::Parse("the\tthis\na\tone\non\tupon\n");
    CHECK(IsStopWord("the"));
    Rng rng(6);
    for (int i = 0; i < 200; ++i)
      for (const auto& t : AugmentText(src, rng, &th)) CHECK((t == "the" || t == "a" || t == "on"));
  }

  TEST_CASE("offline paraphrases are distinct") {
    OfflineParaphraser p;
    Rng rng(7);
    const auto out = p.Generate("a small red coffee mug on the wooden kitchen table", 3, rng);
    REQUIRE(out.size() == 3);
    CHECK(std::set<std::string>(out.begin(), out.end()).size() == 3);
    for (const auto& s : out) CHECK(s != "a small red coffee mug on the wooden kitchen table");
    ExpectError(ErrorCode::kConfig, [&] { p.Generate("a b c", 0, rng); });
  }

  TEST_CASE("paraphrase pool splits requests round-robin") {
    auto a = std::make_shared<FixedProvider>("a");
    auto b = std::make_shared<FixedProvider>("b");
    ParaphrasePool pool({a, b});
    Rng rng(1);
    const auto out = pool.Generate("x", 4, rng);
    REQUIRE(out.size() == 4);
    CHECK(std::count_if(out.begin(), out.end(), [](const std::string& s) { return s[0] == 'a'; }) == 2);
    CHECK(pool.Generate("x", 1, rng, 1) == std::vector<std::string>{"b 0"});
    ExpectError(ErrorCode::kConfig, [] { ParaphrasePool({}); });
  }

  TEST_CASE("remote paraphraser and its fallback") {
    httplib::Server srv;
    srv.Post("/paraphrase", [](const httplib::Request& req, httplib::Response& res) {
      const auto body = nlohmann::json::parse(req.body);
      nlohmann::json out = {{"paraphrases", nlohmann::json::array()}};
      for (int i = 0; i < body["n"].get<int>(); ++i) out["paraphrases"].push_back("remote " + std::to_string(i));
      res.set_content(out.dump(), "application/json");
    });
    const int port = srv.bind_to_any_port("127.0.0.1");
    std::thread t([&] { srv.listen_after_bind(); });
    srv.wait_until_ready();
    auto fallback = std::make_shared<FixedProvider>("local");
    RemoteParaphraser remote("http://127.0.0.1:" + std::to_string(port) + "/paraphrase", fallback);
    Rng rng(1);
    CHECK(remote.Generate("a mug", 2, rng) == std::vector<std::string>{"remote 0", "remote 1"});
    srv.stop();
    t.join();

    testing::WarningCapture warnings;
    CHECK(remote.Generate("a mug", 2, rng) == std::vector<std::string>{"local 0", "local 1"});
    CHECK_FALSE(warnings.messages.empty());
  }

  TEST_CASE("expansion multiplies each batch tenfold") {
    const auto batch = MakeSamples(32);
    for (AugmentMode mode : {AugmentMode::kImg, AugmentMode::kTxt, AugmentMode::kBoth}) {
      AugmentConfig cfg;
      cfg.mode = mode;
      const auto out = ExpandBatch(batch, cfg);
      CHECK(out.size() == 320);
    }
    AugmentConfig none;
    CHECK(ExpandBatch(batch, none).size() == 32);
    AugmentConfig one;
    one.mode = AugmentMode::kBoth;
    one.factor = 1;
    const auto same = ExpandBatch(batch, one);
    REQUIRE(same.size() == 32);
    for (std::size_t i = 0; i < 32; ++i) {
      CHECK(same[i].image == batch[i].image);
      CHECK(same[i].caption == batch[i].caption);
    }
    AugmentConfig bad;
    bad.factor = 0;
    ExpectError(ErrorCode::kConfig, [&] { ExpandBatch(batch, bad); });
  }

  TEST_CASE("expansion pairing on a three-sample batch") {
    const auto batch = MakeSamples(3);
    AugmentConfig cfg;
    cfg.mode = AugmentMode::kBoth;
    cfg.image.flip_prob = 1.0;
    const auto out = ExpandBatch(batch, cfg);
    REQUIRE(out.size() == 30);
    for (std::size_t s = 0; s < 3; ++s) {
      CHECK(out[s * 10].copy_index == 0);
      CHECK(out[s * 10].image == batch[s].image);
      CHECK(out[s * 10].caption == batch[s].caption);
      for (int c = 1; c < 10; ++c) {
        const Sample& copy = out[s * 10 + c];
        CHECK(copy.image_id == batch[s].image_id);
        CHECK(copy.copy_index == c);
        CHECK(copy.image != batch[s].image);
        CHECK(copy.caption != batch[s].caption);
      }
    }
    AugmentConfig img_only = cfg;
    img_only.mode = AugmentMode::kImg;
    const auto img = ExpandBatch(batch, img_only);
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(img[i].caption == batch[i / 10].caption);
    AugmentConfig txt_only = cfg;
    txt_only.mode = AugmentMode::kTxt;
    const auto txt = ExpandBatch(batch, txt_only);
    for (std::size_t i = 0; i < txt.size(); ++i) CHECK(txt[i].image == batch[i / 10].image);
  }

  TEST_CASE("expansion is deterministic and counts non-train inputs") {
    const auto batch = MakeSamples(4);
    AugmentConfig cfg;
    cfg.mode = AugmentMode::kBoth;
    const auto a = ExpandBatch(batch, cfg, nullptr, 3);
    const auto b = ExpandBatch(batch, cfg, nullptr, 3);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(*a[i].image == *b[i].image);
      CHECK(a[i].caption == b[i].caption);
    }
    AugmentCounters counters;
    ExpandBatch(batch, cfg, nullptr, 0, &counters);
    CHECK(counters.non_train_inputs == 0);
    CHECK(counters.images_augmented == 36);
    ExpandBatch(MakeSamples(2, Split::kVal), cfg, nullptr, 0, &counters);
    CHECK(counters.non_train_inputs == 2);
  }

  TEST_CASE("mode names") {
    CHECK(ParseAugmentMode("both") == AugmentMode::kBoth);
    CHECK(AugmentModeName(AugmentMode::kTxt) == "txt");
    ExpectError(ErrorCode::kConfig, [] { ParseAugmentMode("all"); });
  }
}

}  // namespace
}  // namespace capadapt
