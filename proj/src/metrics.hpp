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

#ifndef CAPADAPT_METRICS_HPP_
#define CAPADAPT_METRICS_HPP_

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace capadapt {

// Scoring tokenization: lowercase, ASCII punctuation to spaces, whitespace split.
std::vector<std::string> ScoringTokens(std::string_view text);

struct EvalPair {
  std::string image_id;
  std::vector<std::string> hypothesis;
  std::vector<std::vector<std::string>> references;
};

EvalPair MakeEvalPair(std::string image_id, std::string_view hypothesis,
                      const std::vector<std::string>& references);

// Corpus BLEU-4, uniform weights, closest-reference brevity penalty, no smoothing.
double Bleu4(std::span<const EvalPair> pairs);
// Mean over pairs of the best per-reference LCS F-measure (beta 1.2).
double RougeL(std::span<const EvalPair> pairs);
// CIDEr-D with IDF over the references of `pairs`, sigma 6, scaled by 10.
double CiderD(std::span<const EvalPair> pairs);

struct Scores {
  double bleu4 = 0;
  double rougeL = 0;
  double ciderD = 0;
  bool operator==(const Scores&) const = default;
};

Scores ScoreAll(std::span<const EvalPair> pairs);

struct ClusterPairs {
  std::string label;  // cluster id
  std::vector<EvalPair> pairs;
};

enum class MicroMode { kPooled, kItemWeighted };

// kPooled scores the union of all pairs once (IDF statistics pooled);
// kItemWeighted averages per-cluster scores weighted by item count.
Scores MicroAverage(std::span<const ClusterPairs> clusters, MicroMode mode = MicroMode::kPooled);

struct ReportRow {
  std::string label;  // cluster id or "all"
  std::size_t items = 0;
  Scores scores;
  bool cider_degenerate = false;  // single-item corpus: every IDF is zero
};

struct MetricReport {
  std::vector<ReportRow> rows;  // clusters in input order, then "all"
  MicroMode mode = MicroMode::kPooled;
};

MetricReport Evaluate(std::span<const ClusterPairs> clusters, MicroMode mode = MicroMode::kPooled);
std::string ReportToJson(const MetricReport& report);
std::string ReportToCsv(const MetricReport& report);

}  // namespace capadapt

#endif  // CAPADAPT_METRICS_HPP_
