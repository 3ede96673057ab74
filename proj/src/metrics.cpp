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

#include "metrics.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <unordered_map>

#include "common.hpp"
#include "json.hpp"

namespace capadapt {

namespace {

constexpr int kMaxN = 4;
constexpr double kRougeBeta = 1.2;
constexpr double kCiderSigma = 6.0;

using NgramCounts = std::unordered_map<std::string, int>;

// n-grams keyed by their tokens joined with a unit separator.
NgramCounts CountNgrams(const std::vector<std::string>& tokens, int n) {
  NgramCounts counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (int j = 1; j < n; ++j) {
      key += '\x1f';
      key += tokens[i + j];
    }
    ++counts[key];
  }
  return counts;
}

std::size_t Lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

void RequirePairs(std::span<const EvalPair> pairs) {
  if (pairs.empty()) throw InvalidArgument("metric needs at least one evaluation pair");
  for (const auto& p : pairs)
    if (p.references.empty())
      throw InvalidArgument("evaluation pair " + p.image_id + " has no references");
}

}  // namespace

std::vector<std::string> ScoringTokens(std::string_view text) {
  std::string cleaned(text);
  for (auto& ch : cleaned) {
    auto c = static_cast<unsigned char>(ch);
    ch = (c < 0x80 && std::ispunct(c)) ? ' ' : static_cast<char>(std::tolower(c));
  }
  return SplitWhitespace(cleaned);
}

EvalPair MakeEvalPair(std::string image_id, std::string_view hypothesis,
                      const std::vector<std::string>& references) {
  EvalPair p;
  p.image_id = std::move(image_id);
  p.hypothesis = ScoringTokens(hypothesis);
  for (const auto& r : references) p.references.push_back(ScoringTokens(r));
  return p;
}

double Bleu4(std::span<const EvalPair> pairs) {
  RequirePairs(pairs);
  std::array<std::size_t, kMaxN> matched{}, guessed{};
  std::size_t hyp_len = 0, ref_len = 0;
  for (const auto& p : pairs) {
    const std::size_t h = p.hypothesis.size();
    hyp_len += h;
    std::size_t best = p.references.front().size();
    for (const auto& r : p.references) {
      const auto diff = [h](std::size_t l) { return l > h ? l - h : h - l; };
      if (diff(r.size()) < diff(best) || (diff(r.size()) == diff(best) && r.size() < best)) best = r.size();
    }
    ref_len += best;
    for (int n = 1; n <= kMaxN; ++n) {
      const NgramCounts hyp = CountNgrams(p.hypothesis, n);
      NgramCounts max_ref;
      for (const auto& r : p.references)
        for (const auto& [g, c] : CountNgrams(r, n)) max_ref[g] = std::max(max_ref[g], c);
      for (const auto& [g, c] : hyp) {
        auto it = max_ref.find(g);
        if (it != max_ref.end()) matched[n - 1] += static_cast<std::size_t>(std::min(c, it->second));
      }
      if (h >= static_cast<std::size_t>(n)) guessed[n - 1] += h - n + 1;
    }
  }
  if (hyp_len == 0) return 0.0;
  double log_sum = 0;
  for (int n = 0; n < kMaxN; ++n) {
    if (guessed[n] == 0 || matched[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matched[n]) / static_cast<double>(guessed[n]));
  }
  const double bp = hyp_len >= ref_len
                        ? 1.0
                        : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return bp * std::exp(log_sum / kMaxN);
}

double RougeL(std::span<const EvalPair> pairs) {
  RequirePairs(pairs);
  const double b2 = kRougeBeta * kRougeBeta;
  double total = 0;
  for (const auto& p : pairs) {
    double best = 0;
    for (const auto& r : p.references) {
      const std::size_t m = Lcs(p.hypothesis, r);
      if (m == 0) continue;
      const double prec = static_cast<double>(m) / static_cast<double>(p.hypothesis.size());
      const double rec = static_cast<double>(m) / static_cast<double>(r.size());
      best = std::max(best, ((1 + b2) * prec * rec) / (rec + b2 * prec));
    }
    total += best;
  }
  return total / static_cast<double>(pairs.size());
}

double CiderD(std::span<const EvalPair> pairs) {
  RequirePairs(pairs);
  const double log_docs = std::log(static_cast<double>(pairs.size()));

  std::unordered_map<std::string, int> df;
  for (const auto& p : pairs) {
    std::set<std::string> seen;
    for (const auto& r : p.references)
      for (int n = 1; n <= kMaxN; ++n)
        for (const auto& [g, _] : CountNgrams(r, n)) seen.insert(g);
    for (const auto& g : seen) ++df[g];
  }

  struct Weighted {
    std::array<std::unordered_map<std::string, double>, kMaxN> vec;
    std::array<double, kMaxN> norm{};
    std::size_t length = 0;
  };
  auto weigh = [&](const std::vector<std::string>& tokens) {
    Weighted w;
    w.length = tokens.size();
    for (int n = 1; n <= kMaxN; ++n) {
      for (const auto& [g, c] : CountNgrams(tokens, n)) {
        auto it = df.find(g);
        const double d = it == df.end() ? 1.0 : std::max(1, it->second);
        const double v = c * (log_docs - std::log(d));
        w.vec[n - 1][g] = v;
        w.norm[n - 1] += v * v;
      }
      w.norm[n - 1] = std::sqrt(w.norm[n - 1]);
    }
    return w;
  };

  double total = 0;
  for (const auto& p : pairs) {
    const Weighted hyp = weigh(p.hypothesis);
    std::array<double, kMaxN> per_n{};
    for (const auto& r : p.references) {
      const Weighted ref = weigh(r);
      const double delta = static_cast<double>(hyp.length) - static_cast<double>(ref.length);
      const double penalty = std::exp(-(delta * delta) / (2 * kCiderSigma * kCiderSigma));
      for (int n = 0; n < kMaxN; ++n) {
        double dot = 0;
        for (const auto& [g, hv] : hyp.vec[n]) {
          auto it = ref.vec[n].find(g);
          if (it != ref.vec[n].end()) dot += std::min(hv, it->second) * it->second;
        }
        if (hyp.norm[n] != 0 && ref.norm[n] != 0) dot /= hyp.norm[n] * ref.norm[n];
        per_n[n] += dot * penalty;
      }
    }
    double mean = 0;
    for (double v : per_n) mean += v;
    mean /= kMaxN;
    total += 10.0 * mean / static_cast<double>(p.references.size());
  }
  return total / static_cast<double>(pairs.size());
}

Scores ScoreAll(std::span<const EvalPair> pairs) {
  return {Bleu4(pairs), RougeL(pairs), CiderD(pairs)};
}

Scores MicroAverage(std::span<const ClusterPairs> clusters, MicroMode mode) {
  if (clusters.empty()) throw InvalidArgument("micro-average needs at least one cluster");
  if (mode == MicroMode::kPooled) {
    std::vector<EvalPair> pooled;
    for (const auto& c : clusters) pooled.insert(pooled.end(), c.pairs.begin(), c.pairs.end());
    return ScoreAll(pooled);
  }
  Scores acc;
  std::size_t items = 0;
  for (const auto& c : clusters) {
    const Scores s = ScoreAll(c.pairs);
    const auto w = static_cast<double>(c.pairs.size());
    acc.bleu4 += w * s.bleu4;
    acc.rougeL += w * s.rougeL;
    acc.ciderD += w * s.ciderD;
    items += c.pairs.size();
  }
  const auto n = static_cast<double>(items);
  return {acc.bleu4 / n, acc.rougeL / n, acc.ciderD / n};
}

MetricReport Evaluate(std::span<const ClusterPairs> clusters, MicroMode mode) {
  MetricReport report;
  report.mode = mode;
  std::size_t items = 0;
  for (const auto& c : clusters) {
    report.rows.push_back({c.label, c.pairs.size(), ScoreAll(c.pairs), c.pairs.size() == 1});
    items += c.pairs.size();
  }
  if (clusters.size() == 1) {
    ReportRow all = report.rows.front();
    all.label = "all";
    report.rows.push_back(all);
  } else {
    report.rows.push_back({"all", items, MicroAverage(clusters, mode), items == 1});
  }
  return report;
}

std::string ReportToJson(const MetricReport& report) {
  using nlohmann::json;
  json rows = json::array();
  for (const auto& r : report.rows) {
    json row = {{"cluster", r.label}, {"items", r.items}, {"bleu4", r.scores.bleu4},
                {"rougeL", r.scores.rougeL}, {"ciderD", r.scores.ciderD}};
    if (r.cider_degenerate) row["ciderD_degenerate"] = true;
    rows.push_back(row);
  }
  json doc = {{"rows", rows},
              {"micro", report.mode == MicroMode::kPooled ? "pooled" : "item_weighted"},
              {"absent_metrics", {"METEOR", "SPICE"}}};
  return doc.dump(1);
}

std::string ReportToCsv(const MetricReport& report) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s,%s,%s,%s,%s\n", "cluster", "items", "bleu4", "rougeL", "ciderD");
  out += buf;
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%.6f,%.6f,%.6f\n", r.label.c_str(), r.items,
                  r.scores.bleu4, r.scores.rougeL, r.scores.ciderD);
    out += buf;
  }
  return out;
}

}  // namespace capadapt
