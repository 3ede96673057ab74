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

#include "learner.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "common.hpp"
#include "json.hpp"

namespace capadapt {

Feature ExtractFeature(const ImageBuffer& img) {
  if (img.width <= 0 || img.height <= 0 || !img.valid())
    throw InvalidArgument("feature extraction needs a non-empty image");
  const int w = img.width, h = img.height;
  std::vector<double> luma(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      luma[static_cast<std::size_t>(y) * w + x] = Luma(img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2));

  Feature f(kFeatureDim, 0.0);
  for (double v : luma) {
    const auto bin = std::min<std::size_t>(kHistogramBins - 1, static_cast<std::size_t>(v / 4.0));
    f[bin] += 1.0;
  }
  for (std::size_t b = 0; b < kHistogramBins; ++b) f[b] /= static_cast<double>(luma.size());

  for (int gy = 0; gy < kPoolGrid; ++gy) {
    const int r0 = gy * h / kPoolGrid, r1 = std::max((gy + 1) * h / kPoolGrid, r0 + 1);
    for (int gx = 0; gx < kPoolGrid; ++gx) {
      const int c0 = gx * w / kPoolGrid, c1 = std::max((gx + 1) * w / kPoolGrid, c0 + 1);
      double sum = 0;
      for (int y = r0; y < r1; ++y)
        for (int x = c0; x < c1; ++x) sum += luma[static_cast<std::size_t>(y) * w + x];
      f[kHistogramBins + gy * kPoolGrid + gx] = sum / ((r1 - r0) * (c1 - c0)) / 255.0;
    }
  }
  double norm = 0;
  for (double v : f) norm += v * v;
  norm = std::sqrt(norm);
  for (double& v : f) v /= norm;
  return f;
}

RetrievalLearner::RetrievalLearner(LearnerConfig config) : Learner(std::move(config)) {
  if (config_.capacity == 0) throw ConfigError("learner.capacity must be >= 1");
}

void RetrievalLearner::ObserveBatch(std::span<const Observation> batch) {
  for (const auto& ob : batch)
    if (ob.feature.size() != feature_dim())
      throw InvalidArgument("observation feature has dimension " + std::to_string(ob.feature.size()) +
                            ", learner expects " + std::to_string(feature_dim()));
  for (const auto& ob : batch) {
    if (!keys_.insert(KeyOf(ob)).second) continue;
    store_.push_back(ob);
    ++inserted_;
    if (store_.size() > config_.capacity) {
      keys_.erase(KeyOf(store_.front()));
      store_.pop_front();
    }
  }
}

std::string RetrievalLearner::KeyOf(const Observation& ob) {
  std::string key(reinterpret_cast<const char*>(ob.feature.data()), ob.feature.size() * sizeof(double));
  for (const auto& w : ob.caption) key += '\0' + w;
  return key;
}

std::vector<std::string> RetrievalLearner::Generate(const Feature& feature) const {
  if (store_.empty()) throw StateError("untrained learner");
  if (feature.size() != feature_dim()) throw InvalidArgument("query feature has the wrong dimension");
  const Observation* best = nullptr;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& ob : store_) {
    double d = 0;
    for (std::size_t i = 0; i < feature.size(); ++i) {
      const double diff = feature[i] - ob.feature[i];
      d += diff * diff;
    }
    if (d <= best_d) {
      best_d = d;
      best = &ob;
    }
  }
  return best->caption;
}

std::string RetrievalLearner::Snapshot() const {
  std::ostringstream out;
  out << "capadapt-retrieval 1\n"
      << "capacity " << config_.capacity << "\n"
      << "inserted " << inserted_ << "\n"
      << "entries " << store_.size() << "\n";
  for (const auto& ob : store_) out << nlohmann::json{ob.feature, ob.caption}.dump() << "\n";
  out << "end\n";
  return out.str();
}

void RetrievalLearner::Restore(std::string_view snapshot) {
  std::istringstream in{std::string(snapshot)};
  auto fail = [](const std::string& why) { return ParseError("corrupt learner snapshot: " + why); };
  std::string line, key;
  if (!std::getline(in, line) || line != "capadapt-retrieval 1") throw fail("bad header");
  std::size_t capacity = 0, entries = 0;
  std::uint64_t inserted = 0;
  if (!(in >> key >> capacity) || key != "capacity") throw fail("capacity");
  if (!(in >> key >> inserted) || key != "inserted") throw fail("inserted");
  if (!(in >> key >> entries) || key != "entries") throw fail("entries");
  std::getline(in, line);
  if (capacity == 0 || entries > capacity) throw fail("inconsistent sizes");
  std::deque<Observation> store;
  for (std::size_t i = 0; i < entries; ++i) {
    if (!std::getline(in, line)) throw fail("truncated");
    try {
      const auto rec = nlohmann::json::parse(line);
      Observation ob{rec.at(0).get<Feature>(), rec.at(1).get<std::vector<std::string>>()};
      if (ob.feature.size() != feature_dim()) throw fail("feature dimension");
      store.push_back(std::move(ob));
    } catch (const nlohmann::json::exception& e) {
      throw fail(e.what());
    }
  }
  if (!std::getline(in, line) || line != "end") throw fail("missing end marker");
  std::unordered_set<std::string> keys;
  for (const auto& ob : store)
    if (!keys.insert(KeyOf(ob)).second) throw fail("duplicate entry");
  config_.capacity = capacity;
  inserted_ = inserted;
  store_ = std::move(store);
  keys_ = std::move(keys);
}

std::unique_ptr<Learner> MakeLearner(const LearnerConfig& config) {
  if (config.kind == "retrieval") return std::make_unique<RetrievalLearner>(config);
  throw ConfigError("unknown learner.kind '" + config.kind + "'");
}

}  // namespace capadapt
