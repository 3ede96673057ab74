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

#ifndef CAPADAPT_TASKGEN_HPP_
#define CAPADAPT_TASKGEN_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "corpus.hpp"

namespace capadapt {

enum class PosTag { kDet, kAdj, kNoun, kVerb, kOther };

PosTag ParsePosTag(std::string_view tag);

// word<TAB>TAG table. Words missing from the table are nouns.
class PosLexicon {
 public:
  PosLexicon() = default;
  static PosLexicon Load(const std::string& path);
  static PosLexicon Parse(std::string_view text);

  void Set(const std::string& word, PosTag tag) { tags_[word] = tag; }
  PosTag Tag(const std::string& word) const;
  std::size_t size() const { return tags_.size(); }

 private:
  std::unordered_map<std::string, PosTag> tags_;
};

struct NounPhrase {
  std::vector<std::string> tokens;
  std::string surface;
};

// Maximal (ADJ|NOUN)* NOUN runs over the caption's word tokens.
std::vector<NounPhrase> ExtractNounPhrases(std::span<const std::string> tokens,
                                           const PosLexicon& lexicon);
std::vector<NounPhrase> ExtractNounPhrases(const CaptionRecord& caption,
                                           const PosLexicon& lexicon);

using PhraseCounts = std::map<std::string, std::size_t>;

PhraseCounts CountNounPhrases(const Corpus& corpus, const PosLexicon& lexicon);

struct KeywordCandidate {
  std::string surface;
  std::size_t frequency = 0;
  bool operator==(const KeywordCandidate&) const = default;
};

// Surfaces with frequency >= min_freq, ordered by (frequency desc, surface asc).
std::vector<KeywordCandidate> SelectKeywords(const PhraseCounts& counts, std::size_t min_freq = 15);

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  // token followed by d floats per line; d is taken from the first record.
  static EmbeddingTable Load(const std::string& path);
  static EmbeddingTable Parse(std::string_view text, const std::string& source = "<memory>");

  void Add(const std::string& token, std::vector<double> vec);
  const std::vector<double>* Find(const std::string& token) const;
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

// Mean of the in-vocabulary constituent vectors; nullopt when none is known.
std::optional<std::vector<double>> EmbedKeyword(const std::string& surface,
                                                const EmbeddingTable& table);

struct KMeansResult {
  std::vector<int> labels;
  std::vector<std::vector<double>> centroids;
  // WCSS after each Lloyd iteration, starting with the iteration that
  // follows k-means++ seeding.
  std::vector<double> wcss_trace;
  int iterations = 0;
};

KMeansResult KMeans(const std::vector<std::vector<double>>& points, int k, std::uint64_t seed,
                    int max_iterations = 100);

double Wcss(const std::vector<std::vector<double>>& points, const std::vector<int>& labels,
            const std::vector<std::vector<double>>& centroids);

struct ClusterSpec {
  int cluster_id = 0;  // 1-based
  std::vector<std::string> keywords;
  std::vector<double> centroid;
};

struct TaskAssignment {
  std::map<std::string, int> cluster_of;
  std::vector<std::string> unassigned;
};

// Numeric order for all-digit ids, lexicographic otherwise.
bool ImageIdLess(const std::string& a, const std::string& b);

TaskAssignment AssignImages(const Corpus& corpus, const std::vector<ClusterSpec>& clusters);

struct ClusterOptions {
  int k = 5;
  std::size_t min_freq = 15;
  std::uint64_t seed = 7;
};

struct ClusteringResult {
  std::vector<KeywordCandidate> keywords;        // all selected candidates
  std::vector<std::string> unembedded_keywords;  // dropped: no known constituent
  std::vector<ClusterSpec> clusters;
  TaskAssignment assignment;
};

ClusteringResult BuildClusters(const Corpus& corpus, const PosLexicon& lexicon,
                               const EmbeddingTable& embeddings, const ClusterOptions& options);

// Per-cluster image ids by split, as persisted in the cluster file.
struct ClusterEntry {
  int cluster_id = 0;
  std::vector<std::string> keywords;
  std::map<Split, std::vector<std::string>> image_ids;
};

struct ClusterFile {
  std::vector<ClusterEntry> clusters;
  std::vector<std::string> unassigned;
};

ClusterFile MakeClusterFile(const Corpus& corpus, const ClusteringResult& result);
std::string SerializeClusterFile(const ClusterFile& file);
ClusterFile ParseClusterFile(std::string_view json_text);
ClusterFile LoadClusterFile(const std::string& path);

struct ClusterTableRow {
  std::string label;  // cluster id or "all"
  std::size_t train = 0, val = 0, test = 0, all = 0;
  std::size_t word_types = 0;
};

// Per-cluster split counts and word types plus an "all" row.
std::vector<ClusterTableRow> ClusterTable(const Corpus& corpus, const ClusterFile& file);

}  // namespace capadapt

#endif  // CAPADAPT_TASKGEN_HPP_
