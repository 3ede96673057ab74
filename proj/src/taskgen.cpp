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

#include "taskgen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "common.hpp"
#include "json.hpp"

namespace capadapt {

using nlohmann::json;

PosTag ParsePosTag(std::string_view tag) {
  const std::string t = ToLower(Trim(tag));
  if (t == "det") return PosTag::kDet;
  if (t == "adj") return PosTag::kAdj;
  if (t == "noun") return PosTag::kNoun;
  if (t == "verb") return PosTag::kVerb;
  if (t == "other") return PosTag::kOther;
  throw ParseError("unknown POS tag '" + std::string(tag) + "'");
}

PosLexicon PosLexicon::Parse(std::string_view text) {
  PosLexicon lex;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError("lexicon line " + std::to_string(line_no) + ": expected word<TAB>TAG");
    lex.Set(ToLower(Trim(line.substr(0, tab))), ParsePosTag(line.substr(tab + 1)));
  }
  return lex;
}

PosLexicon PosLexicon::Load(const std::string& path) { return Parse(ReadFile(path)); }

PosTag PosLexicon::Tag(const std::string& word) const {
  auto it = tags_.find(word);
  return it == tags_.end() ? PosTag::kNoun : it->second;
}

std::vector<NounPhrase> ExtractNounPhrases(std::span<const std::string> tokens,
                                           const PosLexicon& lexicon) {
  std::vector<NounPhrase> out;
  std::size_t i = 0;
  while (i < tokens.size()) {
    std::size_t j = i;
    std::size_t last_noun = SIZE_MAX;
    for (; j < tokens.size(); ++j) {
      const PosTag tag = lexicon.Tag(tokens[j]);
      if (tag == PosTag::kNoun) {
        last_noun = j;
      } else if (tag != PosTag::kAdj) {
        break;
      }
    }
    if (last_noun != SIZE_MAX) {
      NounPhrase np;
      np.tokens.assign(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                       tokens.begin() + static_cast<std::ptrdiff_t>(last_noun + 1));
      np.surface = Join(np.tokens, " ");
      out.push_back(std::move(np));
    }
    i = std::max(j, i + 1);
  }
  return out;
}

std::vector<NounPhrase> ExtractNounPhrases(const CaptionRecord& caption, const PosLexicon& lexicon) {
  return ExtractNounPhrases(std::span<const std::string>(caption.tokens), lexicon);
}

PhraseCounts CountNounPhrases(const Corpus& corpus, const PosLexicon& lexicon) {
  PhraseCounts counts;
  for (const auto& rec : corpus.images())
    for (const auto& cap : rec.captions)
      for (const auto& np : ExtractNounPhrases(cap, lexicon)) ++counts[np.surface];
  return counts;
}

std::vector<KeywordCandidate> SelectKeywords(const PhraseCounts& counts, std::size_t min_freq) {
  std::vector<KeywordCandidate> out;
  for (const auto& [surface, freq] : counts)
    if (freq >= min_freq) out.push_back({surface, freq});
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.frequency != b.frequency ? a.frequency > b.frequency : a.surface < b.surface;
  });
  return out;
}

void EmbeddingTable::Add(const std::string& token, std::vector<double> vec) {
  if (dim_ == 0) dim_ = vec.size();
  if (vec.size() != dim_)
    throw ParseError("embedding for '" + token + "' has dimension " + std::to_string(vec.size()) +
                     ", expected " + std::to_string(dim_));
  vectors_[token] = std::move(vec);
}

const std::vector<double>* EmbeddingTable::Find(const std::string& token) const {
  auto it = vectors_.find(token);
  return it == vectors_.end() ? nullptr : &it->second;
}

EmbeddingTable EmbeddingTable::Parse(std::string_view text, const std::string& source) {
  EmbeddingTable table;
  std::size_t pos = 0, line_no = 0;
  std::vector<double> vec;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::size_t sp = line.find(' ');
    if (line.empty()) continue;
    if (sp == std::string_view::npos)
      throw ParseError(source + ":" + std::to_string(line_no) + ": token without vector");
    std::string token(line.substr(0, sp));
    vec.clear();
    const char* p = line.data() + sp;
    const char* last = line.data() + line.size();
    while (p < last) {
      while (p < last && (*p == ' ' || *p == '\t')) ++p;
      if (p == last) break;
      double v = 0;
      auto [next, ec] = std::from_chars(p, last, v);
      if (ec != std::errc() || !std::isfinite(v))
        throw ParseError(source + ":" + std::to_string(line_no) + ": bad float in vector for '" + token + "'");
      vec.push_back(v);
      p = next;
    }
    // word2vec-style "<count> <dim>" header
    if (line_no == 1 && vec.size() == 1 &&
        std::all_of(token.begin(), token.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
      continue;
    try {
      table.Add(token, vec);
    } catch (const Error& e) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return table;
}

EmbeddingTable EmbeddingTable::Load(const std::string& path) { return Parse(ReadFile(path), path); }

std::optional<std::vector<double>> EmbedKeyword(const std::string& surface, const EmbeddingTable& table) {
  std::vector<double> sum;
  std::size_t found = 0;
  for (const auto& word : SplitWhitespace(surface)) {
    const auto* v = table.Find(word);
    if (!v) continue;
    if (sum.empty()) sum.assign(v->size(), 0.0);
    for (std::size_t i = 0; i < v->size(); ++i) sum[i] += (*v)[i];
    ++found;
  }
  if (found == 0) return std::nullopt;
  for (auto& x : sum) x /= static_cast<double>(found);
  return sum;
}

namespace {

double SquaredDistance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

int Nearest(const std::vector<double>& p, const std::vector<std::vector<double>>& centroids) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = SquaredDistance(p, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

std::vector<std::vector<double>> PlusPlusSeeds(const std::vector<std::vector<double>>& points, int k, Rng& rng) {
  std::vector<std::vector<double>> centroids;
  centroids.push_back(points[UniformIndex(rng, points.size())]);
  std::vector<double> d2(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) d2[i] = SquaredDistance(points[i], centroids[0]);
  while (static_cast<int>(centroids.size()) < k) {
    double total = 0;
    for (double d : d2) total += d;
    std::size_t pick = 0;
    if (total <= 0) {
      // All remaining mass is zero (duplicates); fall back to uniform.
      pick = UniformIndex(rng, points.size());
    } else {
      const double target = UniformUnit(rng) * total;
      double acc = 0;
      pick = points.size() - 1;
      for (std::size_t i = 0; i < points.size(); ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0) {
          pick = i;
          break;
        }
      }
    }
    centroids.push_back(points[pick]);
    for (std::size_t i = 0; i < points.size(); ++i)
      d2[i] = std::min(d2[i], SquaredDistance(points[i], centroids.back()));
  }
  return centroids;
}

}  // namespace

double Wcss(const std::vector<std::vector<double>>& points, const std::vector<int>& labels,
            const std::vector<std::vector<double>>& centroids) {
  double s = 0;
  for (std::size_t i = 0; i < points.size(); ++i) s += SquaredDistance(points[i], centroids[labels[i]]);
  return s;
}

KMeansResult KMeans(const std::vector<std::vector<double>>& points, int k, std::uint64_t seed,
                    int max_iterations) {
  if (k < 1) throw InvalidArgument("k-means needs k >= 1");
  if (points.size() < static_cast<std::size_t>(k))
    throw InvalidArgument("k-means needs at least k=" + std::to_string(k) + " points, got " +
                          std::to_string(points.size()));
  const std::size_t dim = points.front().size();
  for (const auto& p : points) {
    if (p.size() != dim) throw InvalidArgument("k-means points differ in dimension");
    for (double x : p)
      if (!std::isfinite(x)) throw InvalidArgument("k-means point is not finite");
  }

  Rng rng(seed);
  KMeansResult res;
  res.centroids = PlusPlusSeeds(points, k, rng);
  res.labels.assign(points.size(), -1);

  for (int iter = 0; iter < max_iterations; ++iter) {
    std::vector<int> labels(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) labels[i] = Nearest(points[i], res.centroids);

    std::vector<std::size_t> sizes(k, 0);
    for (int l : labels) ++sizes[l];
    for (int c = 0; c < k; ++c) {
      if (sizes[c] != 0) continue;
      // Refill from the point farthest from its centroid in a cluster that
      // can spare one.
      std::size_t far = SIZE_MAX;
      double far_d = -1;
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (sizes[labels[i]] < 2) continue;
        const double d = SquaredDistance(points[i], res.centroids[labels[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      --sizes[labels[far]];
      labels[far] = c;
      sizes[c] = 1;
    }

    const bool stable = labels == res.labels;
    res.labels = std::move(labels);
    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < points.size(); ++i)
      for (std::size_t d = 0; d < dim; ++d) sums[res.labels[i]][d] += points[i][d];
    for (int c = 0; c < k; ++c)
      for (std::size_t d = 0; d < dim; ++d) sums[c][d] /= static_cast<double>(sizes[c]);
    res.centroids = std::move(sums);
    res.wcss_trace.push_back(Wcss(points, res.labels, res.centroids));
    res.iterations = iter + 1;
    if (stable) break;
  }
  return res;
}

bool ImageIdLess(const std::string& a, const std::string& b) {
  auto digits = [](const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  if (digits(a) && digits(b) && a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

namespace {

struct KeywordIndex {
  // first token -> (keyword tokens, cluster id), longest first
  std::unordered_map<std::string, std::vector<std::pair<std::vector<std::string>, int>>> by_head;

  explicit KeywordIndex(const std::vector<ClusterSpec>& clusters) {
    std::set<std::string> seen;
    for (const auto& spec : clusters) {
      for (const auto& kw : spec.keywords) {
        if (!seen.insert(kw).second)
          throw InvalidArgument("keyword '" + kw + "' belongs to more than one cluster");
        auto toks = SplitWhitespace(kw);
        if (toks.empty()) continue;
        by_head[toks.front()].emplace_back(std::move(toks), spec.cluster_id);
      }
    }
    for (auto& [_, list] : by_head)
      std::stable_sort(list.begin(), list.end(),
                       [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
  }

  void Match(const std::vector<std::string>& tokens, std::set<int>& hits) const {
    std::size_t i = 0;
    while (i < tokens.size()) {
      std::size_t advance = 1;
      auto it = by_head.find(tokens[i]);
      if (it != by_head.end()) {
        for (const auto& [kw, cluster] : it->second) {
          if (i + kw.size() <= tokens.size() &&
              std::equal(kw.begin(), kw.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
            hits.insert(cluster);
            advance = kw.size();
            break;
          }
        }
      }
      i += advance;
    }
  }
};

}  // namespace

TaskAssignment AssignImages(const Corpus& corpus, const std::vector<ClusterSpec>& clusters) {
  KeywordIndex index(clusters);
  std::vector<const ImageRecord*> order;
  for (const auto& rec : corpus.images()) order.push_back(&rec);
  std::sort(order.begin(), order.end(),
            [](const ImageRecord* a, const ImageRecord* b) { return ImageIdLess(a->image_id, b->image_id); });

  std::map<int, std::size_t> sizes;
  for (const auto& spec : clusters) sizes[spec.cluster_id] = 0;
  TaskAssignment out;
  for (const ImageRecord* rec : order) {
    std::set<int> hits;
    for (const auto& cap : rec->captions) index.Match(cap.tokens, hits);
    if (hits.empty()) {
      out.unassigned.push_back(rec->image_id);
      continue;
    }
    int chosen = *hits.begin();
    for (int c : hits)
      if (sizes[c] < sizes[chosen]) chosen = c;  // ascending scan keeps the lower id on ties
    ++sizes[chosen];
    out.cluster_of[rec->image_id] = chosen;
  }
  return out;
}

ClusteringResult BuildClusters(const Corpus& corpus, const PosLexicon& lexicon,
                               const EmbeddingTable& embeddings, const ClusterOptions& options) {
  ClusteringResult res;
  res.keywords = SelectKeywords(CountNounPhrases(corpus, lexicon), options.min_freq);

  std::vector<std::string> surfaces;
  std::vector<std::vector<double>> points;
  for (const auto& kw : res.keywords) {
    auto v = EmbedKeyword(kw.surface, embeddings);
    if (!v) {
      res.unembedded_keywords.push_back(kw.surface);
      continue;
    }
    surfaces.push_back(kw.surface);
    points.push_back(std::move(*v));
  }
  if (points.size() < static_cast<std::size_t>(options.k))
    throw InvalidArgument("only " + std::to_string(points.size()) +
                          " embeddable keywords; cannot form " + std::to_string(options.k) + " clusters");

  const KMeansResult km = KMeans(points, options.k, options.seed);
  res.clusters.resize(options.k);
  for (int c = 0; c < options.k; ++c) {
    res.clusters[c].cluster_id = c + 1;
    res.clusters[c].centroid = km.centroids[c];
  }
  // surfaces are already in (frequency desc, surface asc) order
  for (std::size_t i = 0; i < surfaces.size(); ++i) res.clusters[km.labels[i]].keywords.push_back(surfaces[i]);
  res.assignment = AssignImages(corpus, res.clusters);
  return res;
}

ClusterFile MakeClusterFile(const Corpus& corpus, const ClusteringResult& result) {
  ClusterFile file;
  std::map<int, std::size_t> pos;
  for (const auto& spec : result.clusters) {
    pos[spec.cluster_id] = file.clusters.size();
    file.clusters.push_back({spec.cluster_id, spec.keywords, {{Split::kTrain, {}}, {Split::kVal, {}}, {Split::kTest, {}}}});
  }
  std::vector<const ImageRecord*> order;
  for (const auto& rec : corpus.images()) order.push_back(&rec);
  std::sort(order.begin(), order.end(),
            [](const ImageRecord* a, const ImageRecord* b) { return ImageIdLess(a->image_id, b->image_id); });
  for (const ImageRecord* rec : order) {
    auto it = result.assignment.cluster_of.find(rec->image_id);
    if (it == result.assignment.cluster_of.end()) continue;
    file.clusters[pos[it->second]].image_ids[rec->split].push_back(rec->image_id);
  }
  file.unassigned = result.assignment.unassigned;
  return file;
}

std::string SerializeClusterFile(const ClusterFile& file) {
  json clusters = json::object();
  for (const auto& c : file.clusters) {
    json ids = json::object();
    for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
      auto it = c.image_ids.find(s);
      ids[std::string(SplitName(s))] = it == c.image_ids.end() ? json::array() : json(it->second);
    }
    clusters[std::to_string(c.cluster_id)] = {{"keywords", c.keywords}, {"image_ids", ids}};
  }
  json doc = {{"clusters", clusters}, {"unassigned", file.unassigned}};
  return doc.dump(1) + "\n";
}

ClusterFile ParseClusterFile(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("cluster file: ") + e.what());
  }
  if (!doc.contains("clusters") || !doc["clusters"].is_object())
    throw ParseError("cluster file: missing 'clusters' object");
  ClusterFile file;
  for (const auto& [key, val] : doc["clusters"].items()) {
    ClusterEntry entry;
    try {
      entry.cluster_id = std::stoi(key);
    } catch (const std::exception&) {
      throw ParseError("cluster file: cluster key '" + key + "' is not an integer");
    }
    entry.keywords = val.value("keywords", std::vector<std::string>{});
    if (val.contains("image_ids")) {
      for (const auto& [split, ids] : val["image_ids"].items()) {
        auto& out = entry.image_ids[ParseSplit(split)];
        for (const auto& id : ids)
          out.push_back(id.is_string() ? id.get<std::string>() : std::to_string(id.get<std::int64_t>()));
      }
    }
    file.clusters.push_back(std::move(entry));
  }
  std::sort(file.clusters.begin(), file.clusters.end(),
            [](const auto& a, const auto& b) { return a.cluster_id < b.cluster_id; });
  if (doc.contains("unassigned"))
    for (const auto& id : doc["unassigned"])
      file.unassigned.push_back(id.is_string() ? id.get<std::string>() : std::to_string(id.get<std::int64_t>()));
  return file;
}

ClusterFile LoadClusterFile(const std::string& path) { return ParseClusterFile(ReadFile(path)); }

std::vector<ClusterTableRow> ClusterTable(const Corpus& corpus, const ClusterFile& file) {
  std::vector<ClusterTableRow> rows;
  ClusterTableRow total{"all"};
  std::set<std::string> all_types;
  for (const auto& c : file.clusters) {
    ClusterTableRow row{std::to_string(c.cluster_id)};
    std::set<std::string> types;
    for (const auto& [split, ids] : c.image_ids) {
      std::size_t& slot = split == Split::kTrain ? row.train : split == Split::kVal ? row.val : row.test;
      slot += ids.size();
      for (const auto& id : ids) {
        const ImageRecord* rec = corpus.Find(id);
        if (!rec) throw IntegrityError("cluster file references unknown image id " + id);
        for (const auto& cap : rec->captions) types.insert(cap.tokens.begin(), cap.tokens.end());
      }
    }
    row.all = row.train + row.val + row.test;
    row.word_types = types.size();
    all_types.insert(types.begin(), types.end());
    total.train += row.train;
    total.val += row.val;
    total.test += row.test;
    total.all += row.all;
    rows.push_back(row);
  }
  total.word_types = all_types.size();
  rows.push_back(total);
  return rows;
}

}  // namespace capadapt
