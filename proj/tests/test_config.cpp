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

#include "config.hpp"
#include "test_util.hpp"

namespace capadapt {
namespace {

using testing::ExpectError;

TEST_SUITE("config") {
  TEST_CASE("defaults") {
    const RunConfig c;
    CHECK(c.batch_size == 32);
    CHECK(c.patience_adapt == 2);
    CHECK(c.patience_pretrain == 20);
    CHECK(c.augment.factor == 10);
    CHECK(c.memory.write_prob == 0.2);
    CHECK(c.memory.replay_every == 200);
    CHECK(c.learner.learning_rate == 4e-4);
    CHECK(c.learner.capacity == 2048);
    CHECK_NOTHROW(c.Validate());
  }

  TEST_CASE("parsing key value files") {
    const RunConfig c = RunConfig::Parse(
        "# comment\n batch_size = 16\nda.mode = both\nmemory.enabled = off\nseeds = 4, 5, 6\n"
        "task_order = 3,1,2,5,4\neval.micro = weighted\ntarget.quality_marker = bad photo\n");
    CHECK(c.batch_size == 16);
    CHECK(c.augment.mode == AugmentMode::kBoth);
    CHECK_FALSE(c.memory_enabled);
    CHECK(c.seeds == std::vector<std::uint64_t>{4, 5, 6});
    CHECK(c.task_order == std::vector<int>{3, 1, 2, 5, 4});
    CHECK(c.micro == MicroMode::kItemWeighted);
    CHECK(c.quality_marker == "bad photo");
    CHECK(c.primary_seed() == 4);
  }

  TEST_CASE("serialization round-trips every key") {
    RunConfig c;
    c.Set("da.mode", "txt");
    c.Set("fraction", "0.2");
    c.Set("memory.capacity", "100");
    c.Set("da.paraphrase_urls", "http://a/p,http://b/p");
    const RunConfig back = RunConfig::Parse(c.Serialize());
    CHECK(back.Serialize() == c.Serialize());
    CHECK(back.paraphrase_urls.size() == 2);
    CHECK(RunConfig::Keys().size() == c.ToMap().size());
  }

  TEST_CASE("bad keys and values") {
    RunConfig c;
    ExpectError(ErrorCode::kConfig, [&] { c.Set("bogus", "1"); });
    ExpectError(ErrorCode::kConfig, [&] { c.Set("batch_size", "abc"); });
    ExpectError(ErrorCode::kConfig, [&] { c.Set("batch_size", "-3"); });
    ExpectError(ErrorCode::kConfig, [&] { c.Set("memory.enabled", "maybe"); });
    ExpectError(ErrorCode::kConfig, [&] { c.Set("eval.micro", "macro"); });
    ExpectError(ErrorCode::kConfig, [] { RunConfig::Parse("no equals sign\n"); });
  }

  TEST_CASE("validation invariants") {
    auto invalid = [](const std::string& key, const std::string& value) {
      RunConfig c;
      c.Set(key, value);
      ExpectError(ErrorCode::kConfig, [&] { c.Validate(); });
    };
    invalid("batch_size", "0");
    invalid("patience.adapt", "0");
    invalid("fraction", "0");
    invalid("fraction", "1.5");
    invalid("da.factor", "0");
    invalid("da.flip_prob", "1.2");
    invalid("memory.write_prob", "-0.1");
    invalid("memory.replay_every", "0");
  }
}

}  // namespace
}  // namespace capadapt
