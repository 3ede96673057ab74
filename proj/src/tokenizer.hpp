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

#ifndef CAPADAPT_TOKENIZER_HPP_
#define CAPADAPT_TOKENIZER_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace capadapt {

inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::size_t kMaxWordChars = 100;

// Fixed WordPiece vocabulary; continuation pieces carry a "##" prefix.
class SubwordVocab {
 public:
  static SubwordVocab Load(const std::string& path);
  static SubwordVocab Parse(std::string_view text);
  static SubwordVocab FromTokens(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  int unk_id() const { return unk_id_; }
  // -1 when absent
  int Find(std::string_view token) const;
  const std::string& Token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  int unk_id_ = -1;
};

// Lowercase, whitespace split, punctuation split off, greedy longest-match
// per word. Words that cannot be fully covered become a single [UNK].
std::vector<int> Tokenize(std::string_view text, const SubwordVocab& vocab);

// Pre-tokenized words as Tokenize sees them.
std::vector<std::string> PreTokenize(std::string_view text);

// Joins "##" continuations back onto their word.
std::vector<std::string> Detokenize(std::span<const int> ids, const SubwordVocab& vocab);

}  // namespace capadapt

#endif  // CAPADAPT_TOKENIZER_HPP_
