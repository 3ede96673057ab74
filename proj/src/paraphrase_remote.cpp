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

#include <chrono>

#include "augment.hpp"
#include "httplib.h"
#include "json.hpp"

namespace capadapt {

RemoteParaphraser::RemoteParaphraser(std::string url, std::shared_ptr<ParaphraseProvider> fallback, int timeout_ms)
    : url_(std::move(url)), fallback_(std::move(fallback)), timeout_ms_(timeout_ms) {
  if (!fallback_) fallback_ = std::make_shared<OfflineParaphraser>();
}

std::vector<std::string> RemoteParaphraser::Generate(const std::string& caption, int n, Rng& rng) {
  if (n < 1) throw ConfigError("paraphrase count must be >= 1");
  // url = scheme://host[:port]/path
  const auto scheme_end = url_.find("://");
  const auto path_start = url_.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  const std::string base = path_start == std::string::npos ? url_ : url_.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url_.substr(path_start);
  try {
    httplib::Client cli(base);
    cli.set_connection_timeout(std::chrono::milliseconds(timeout_ms_));
    cli.set_read_timeout(std::chrono::milliseconds(timeout_ms_));
    const nlohmann::json req = {{"text", caption}, {"n", n}};
    auto res = cli.Post(path, req.dump(), "application/json");
    if (!res) throw IoError("request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw IoError("HTTP status " + std::to_string(res->status));
    const auto body = nlohmann::json::parse(res->body);
    std::vector<std::string> out = body.at("paraphrases").get<std::vector<std::string>>();
    if (out.size() > static_cast<std::size_t>(n)) out.resize(n);
    return out;
  } catch (const std::exception& e) {
    LogWarning("paraphrase endpoint " + url_ + " unavailable (" + e.what() + "); using " + fallback_->name());
  }
  return fallback_->Generate(caption, n, rng);
}

}  // namespace capadapt
