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
#include <future>
#include <set>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "image.hpp"
#include "json.hpp"
#include "service.hpp"
#include "synth.hpp"
#include "test_util.hpp"

namespace capadapt {
namespace {

using json = nlohmann::json;
using testing::ExpectError;

std::string Png(int group, std::uint64_t seed) { return EncodePng(SynthImage(group, seed, 16, 16)); }

// Retrieval learner that already knows a handful of group-0 images.
std::unique_ptr<Learner> Pretrained() {
  auto l = MakeLearner({});
  const Task t = MakeSynthTask(1, 0, 8, 0, 0, 1, 99, 16, 16);
  std::vector<Observation> obs;
  for (const auto& ex : t.train) obs.push_back({l->Extract(*ex.image), ex.captions[0].tokens});
  l->ObserveBatch(obs);
  return l;
}

ServiceOptions Options(const testing::TempDir& dir, std::size_t auto_flush = 0) {
  ServiceOptions o;
  o.run_dir = dir.file("run");
  o.auto_flush = auto_flush;
  o.config.memory.replay_every = 2;
  return o;
}

std::vector<Task> TwoTasks() {
  return {MakeSynthTask(1, 0, 8, 2, 3, 2, 5, 16, 16), MakeSynthTask(2, 1, 8, 2, 3, 2, 6, 16, 16)};
}

TEST_SUITE("service") {
  TEST_CASE("caption, feedback, flush, re-caption") {
    testing::TempDir dir;
    testing::WarningCapture quiet;
    FeedbackService svc(Options(dir), Pretrained());
    const std::string img = Png(3, 1234);
    const CaptionReply first = svc.Caption(img);
    CHECK(first.feature_id == Sha256Hex(img));
    CHECK_FALSE(first.caption.empty());
    const std::string fix = "a bright purple umbrella next to a bench";
    CHECK(first.caption != fix);
    CHECK(svc.Feedback(first.feature_id, "", fix) == 1);
    CHECK(svc.Caption(img).caption == first.caption);
    const FlushReply r = svc.Flush();
    CHECK(r.update_id == 1);
    CHECK(r.samples_trained == 1);
    CHECK(svc.queue_length() == 0);
    CHECK(svc.Caption(img).caption == fix);
  }

  TEST_CASE("error statuses") {
    testing::TempDir dir;
    testing::WarningCapture quiet;
    FeedbackService untrained(Options(dir), nullptr);
    ExpectError(ErrorCode::kState, [&] { untrained.Caption(Png(0, 1)); });

    testing::TempDir dir2;
    FeedbackService svc(Options(dir2), Pretrained());
    ExpectError(ErrorCode::kParse, [&] { svc.Caption("definitely not an image"); });
    ExpectError(ErrorCode::kNotFound, [&] { svc.Feedback(std::string(64, 'a'), "", "a cat"); });
    ExpectError(ErrorCode::kNotFound, [&] { svc.Feedback("../state.json", "", "a cat"); });
    ExpectError(ErrorCode::kNotFound, [&] { svc.Feedback("", "no-such-image", "a cat"); });
    const auto id = svc.Caption(Png(0, 1)).feature_id;
    ExpectError(ErrorCode::kInvalidArgument, [&] { svc.Feedback(id, "", "   "); });
    ExpectError(ErrorCode::kInvalidArgument, [&] { svc.Feedback(id, "x", "a cat"); });
    ExpectError(ErrorCode::kInvalidArgument, [&] { svc.Feedback("", "", "a cat"); });
    ExpectError(ErrorCode::kState, [&] { svc.Flush(); });
    ExpectError(ErrorCode::kState, [&] { svc.Advance(); });
    CHECK(svc.HistoryJson() == "[]");
  }

  TEST_CASE("a second update while one is in flight is busy") {
    testing::TempDir dir;
    testing::WarningCapture quiet;
    FeedbackService svc(Options(dir), Pretrained());
    svc.Feedback(svc.Caption(Png(1, 2)).feature_id, "", "a green kettle");
    bool saw_busy = false;
    svc.set_update_hook([&] {
      auto second = std::async(std::launch::async, [&] { svc.Flush(); });
      try {
        second.get();
      } catch (const Error& e) {
        saw_busy = e.code() == ErrorCode::kBusy;
      }
      CHECK(json::parse(svc.StateJson())["update_in_flight"] == true);
    });
    CHECK(svc.Flush().update_id == 1);
    CHECK(saw_busy);
  }

  TEST_CASE("restart preserves queued feedback and committed updates") {
    testing::TempDir dir;
    testing::WarningCapture quiet;
    const std::string a = Png(2, 7), b = Png(4, 8);
    {
      FeedbackService svc(Options(dir), Pretrained());
      svc.Feedback(svc.Caption(a).feature_id, "", "a yellow raincoat");
      svc.Flush();
      svc.Feedback(svc.Caption(b).feature_id, "", "a stack of old newspapers");
    }
    FeedbackService again(Options(dir), nullptr);
    REQUIRE(again.queue_length() == 1);
    CHECK(again.queue()[0].caption == "a stack of old newspapers");
    CHECK(again.queue()[0].feedback_id == 2);
    CHECK(again.Caption(a).caption == "a yellow raincoat");
    CHECK(again.Flush().update_id == 2);
    CHECK(again.Caption(b).caption == "a stack of old newspapers");
    const auto st = json::parse(again.StateJson());
    CHECK(st["update_count"] == 2);
    CHECK(st["queue_length"] == 0);
  }

  TEST_CASE("torn final queue record is dropped on restart") {
    testing::TempDir dir;
    testing::WarningCapture warnings;
    {
      FeedbackService svc(Options(dir), Pretrained());
      svc.Feedback(svc.Caption(Png(2, 9)).feature_id, "", "a red scarf");
    }
    {
      std::ofstream out(dir.file("run/feedback.jsonl"), std::ios::app);
      out << "{\"op\":\"queued\",\"feedb";
    }
    FeedbackService again(Options(dir), Pretrained());
    CHECK(again.queue_length() == 1);
    CHECK(warnings.Contains("incomplete"));
  }

  TEST_CASE("auto flush drains the queue at the threshold") {
    testing::TempDir dir;
    testing::WarningCapture quiet;
    FeedbackService svc(Options(dir, 32), Pretrained());
    std::size_t last = 0;
    for (int i = 0; i < 32; ++i) {
      const auto id = svc.Caption(Png(i % 5, 100 + i)).feature_id;
      last = svc.Feedback(id, "", "object number " + std::to_string(i));
      if (i < 31) CHECK(last == static_cast<std::size_t>(i + 1));
    }
    CHECK(last == 0);
    CHECK(json::parse(svc.StateJson())["update_count"] == 1);
  }

  TEST_CASE("image augmentation multiplies flushed samples tenfold") {
    testing::TempDir dir;
    testing::WarningCapture quiet;
    ServiceOptions o = Options(dir);
    o.config.augment.mode = AugmentMode::kImg;
    FeedbackService svc(o, Pretrained());
    for (int i = 0; i < 4; ++i) svc.Feedback(svc.Caption(Png(1, 50 + i)).feature_id, "", "a thing " + std::to_string(i));
    CHECK(svc.Flush().samples_trained == 40);
  }

  TEST_CASE("trained feedback is logged with its update") {
    testing::TempDir dir;
    testing::WarningCapture quiet;
    FeedbackService svc(Options(dir), Pretrained());
    for (int i = 0; i < 3; ++i) svc.Feedback(svc.Caption(Png(2, 70 + i)).feature_id, "", "a lamp " + std::to_string(i));
    svc.Flush();
    std::set<std::uint64_t> trained;
    std::istringstream in(ReadFile(dir.file("run/events.jsonl")));
    for (std::string line; std::getline(in, line);) {
      const auto rec = json::parse(line);
      if (rec["type"] == "feedback_trained") {
        CHECK(rec["update_id"] == 1);
        trained.insert(rec["feedback_id"].get<std::uint64_t>());
      }
    }
    CHECK(trained == std::set<std::uint64_t>{1, 2, 3});
  }

  TEST_CASE("snapshots rotate") {
    testing::TempDir dir;
    testing::WarningCapture quiet;
    FeedbackService svc(Options(dir), Pretrained());
    for (int i = 0; i < 4; ++i) {
      svc.Feedback(svc.Caption(Png(3, 200 + i)).feature_id, "", "a plant " + std::to_string(i));
      svc.Flush();
    }
    std::size_t files = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir.file("run/snapshots"))) files += e.is_regular_file();
    CHECK(files == 4);
    CHECK(std::filesystem::exists(dir.file("run/snapshots/learner-4.txt")));
    CHECK_FALSE(std::filesystem::exists(dir.file("run/snapshots/learner-2.txt")));
  }

  TEST_CASE("advancing through tasks grows the history") {
    testing::TempDir dir;
    testing::WarningCapture quiet;
    ServiceOptions o = Options(dir);
    o.tasks = TwoTasks();
    o.config.task_order = {1, 2};
    FeedbackService svc(o, Pretrained());
    CHECK(svc.HistoryJson() == "[]");
    const auto h1 = json::parse(svc.Advance());
    const auto h2 = json::parse(svc.Advance());
    CHECK(h1["cluster"] == 1);
    CHECK(h1["report"]["rows"].size() == 2);
    CHECK(h2["report"]["rows"].size() == 3);
    ExpectError(ErrorCode::kState, [&] { svc.Advance(); });

    svc.Feedback("", o.tasks[0].train[0].image_id, "a corrected caption");
    svc.Flush();
    const auto hist = json::parse(svc.HistoryJson());
    REQUIRE(hist.size() == 3);
    for (std::size_t i = 1; i < hist.size(); ++i)
      CHECK(hist[i]["timestamp"].get<std::int64_t>() > hist[i - 1]["timestamp"].get<std::int64_t>());
    CHECK(hist[2]["kind"] == "flush");

    FeedbackService again(o, nullptr);
    CHECK(json::parse(again.HistoryJson()) == hist);
    ExpectError(ErrorCode::kState, [&] { again.Advance(); });
  }

  TEST_CASE("http endpoints") {
    testing::TempDir dir;
    testing::WarningCapture quiet;
    ServiceOptions o = Options(dir);
    o.tasks = TwoTasks();
    o.config.task_order = {1, 2};
    FeedbackService svc(o, Pretrained());
    ServiceServer server(svc);
    const int port = server.Bind("127.0.0.1", 0);
    std::thread runner([&] { server.Run(); });
    server.WaitUntilReady();
    httplib::Client cli("127.0.0.1", port);

    const std::string img = Png(4, 31);
    auto res = cli.Post("/caption", img, "application/octet-stream");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->get_header_value("Access-Control-Allow-Origin") == "*");
    const auto cap = json::parse(res->body);
    const std::string fid = cap["feature_id"];

    httplib::MultipartFormDataItems parts{{"image", img, "photo.png", "image/png"}};
    res = cli.Post("/caption", parts);
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(json::parse(res->body)["feature_id"] == fid);

    CHECK(cli.Post("/caption", "garbage", "application/octet-stream")->status == 400);
    CHECK(cli.Post("/updates/flush", "", "application/json")->status == 409);
    CHECK(cli.Post("/feedback", R"({"feature_id": "abc", "corrected_caption": "x y"})", "application/json")->status == 404);
    CHECK(cli.Post("/feedback", json{{"feature_id", fid}, {"corrected_caption", ""}}.dump(), "application/json")->status == 422);
    CHECK(cli.Post("/feedback", "{not json", "application/json")->status == 400);

    res = cli.Post("/feedback", json{{"feature_id", fid}, {"corrected_caption", "a tiny blue teapot"}}.dump(),
                   "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(json::parse(res->body)["queue_length"] == 1);

    svc.set_update_hook([&] {
      httplib::Client inner("127.0.0.1", port);
      auto busy = inner.Post("/updates/flush", "", "application/json");
      REQUIRE(busy);
      CHECK(busy->status == 423);
    });
    res = cli.Post("/updates/flush", "", "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(json::parse(res->body)["update_id"] == 1);
    svc.set_update_hook(nullptr);

    res = cli.Post("/caption", img, "application/octet-stream");
    CHECK(json::parse(res->body)["caption"] == "a tiny blue teapot");

    CHECK(cli.Post("/tasks/advance", "", "application/json")->status == 200);
    CHECK(cli.Post("/tasks/advance", "", "application/json")->status == 200);
    CHECK(cli.Post("/tasks/advance", "", "application/json")->status == 409);
    res = cli.Get("/metrics/history");
    REQUIRE(res);
    CHECK(json::parse(res->body).size() == 3);
    res = cli.Get("/session/state");
    REQUIRE(res);
    CHECK(json::parse(res->body)["update_count"] == 3);
    res = cli.Options("/feedback");
    REQUIRE(res);
    CHECK(res->status == 204);

    server.Stop();
    runner.join();
  }

  TEST_CASE("status mapping") {
    CHECK(HttpStatusFor(ErrorCode::kParse) == 400);
    CHECK(HttpStatusFor(ErrorCode::kNotFound) == 404);
    CHECK(HttpStatusFor(ErrorCode::kState) == 409);
    CHECK(HttpStatusFor(ErrorCode::kInvalidArgument) == 422);
    CHECK(HttpStatusFor(ErrorCode::kBusy) == 423);
    CHECK(HttpStatusFor(ErrorCode::kIo) == 500);
    CHECK(Sha256Hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }
}

}  // namespace
}  // namespace capadapt
