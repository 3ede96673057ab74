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

#include "tokenizer.hpp"

#include <cctype>
#include <sstream>

#include "common.hpp"

namespace capadapt {

SubwordVocab SubwordVocab::FromTokens(std::vector<std::string> tokens) {
  SubwordVocab v;
  v.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.ids_.emplace(v.tokens_[i], static_cast<int>(i)).second)
      throw ParseError("duplicate vocabulary token '" + v.tokens_[i] + "' at line " + std::to_string(i + 1));
  }
  v.unk_id_ = v.Find(kUnkToken);
  if (v.unk_id_ < 0) throw ParseError("vocabulary has no [UNK] token");
  return v;
}

SubwordVocab SubwordVocab::Parse(std::string_view text) {
  std::vector<std::string> tokens;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return FromTokens(std::move(tokens));
}

SubwordVocab SubwordVocab::Load(const std::string& path) { return Parse(ReadFile(path)); }

int SubwordVocab::Find(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? -1 : it->second;
}

namespace {

bool IsPunct(unsigned char c) { return c < 0x80 && std::ispunct(c); }

// Byte offsets of UTF-8 code point starts, plus the end offset.
std::vector<std::size_t> CharBoundaries(const std::string& w) {
  std::vector<std::size_t> b;
  for (std::size_t i = 0; i < w.size(); ++i)
    if ((static_cast<unsigned char>(w[i]) & 0xC0) != 0x80) b.push_back(i);
  b.push_back(w.size());
  return b;
}

}  // namespace

std::vector<std::string> PreTokenize(std::string_view text) {
  std::vector<std::string> words;
  for (const auto& chunk : SplitWhitespace(ToLower(text))) {
    std::string cur;
    for (char ch : chunk) {
      if (IsPunct(static_cast<unsigned char>(ch))) {
        if (!cur.empty()) words.push_back(std::move(cur));
        cur.clear();
        words.emplace_back(1, ch);
      } else {
        cur.push_back(ch);
      }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
  }
  return words;
}

std::vector<int> Tokenize(std::string_view text, const SubwordVocab& vocab) {
  std::vector<int> ids;
  for (const auto& word : PreTokenize(text)) {
    const auto bounds = CharBoundaries(word);
    const std::size_t n_chars = bounds.size() - 1;
    if (n_chars > kMaxWordChars) {
      ids.push_back(vocab.unk_id());
      continue;
    }
    std::vector<int> pieces;
    std::size_t start = 0;
    bool ok = true;
    while (start < n_chars) {
      int found = -1;
      std::size_t end = n_chars;
      for (; end > start; --end) {
        std::string piece = word.substr(bounds[start], bounds[end] - bounds[start]);
        if (start > 0) piece.insert(0, "##");
        found = vocab.Find(piece);
        if (found >= 0) break;
      }
      if (found < 0) {
        ok = false;
        break;
      }
      pieces.push_back(found);
      start = end;
    }
    if (ok) {
      ids.insert(ids.end(), pieces.begin(), pieces.end());
    } else {
      ids.push_back(vocab.unk_id());
    }
  }
  return ids;
}

std::vector<std::string> Detokenize(std::span<const int> ids, const SubwordVocab& vocab) {
  std::vector<std::string> words;
  for (int id : ids) {
    const std::string& tok = vocab.Token(id);
    if (tok.size() > 2 && tok.compare(0, 2, "##") == 0 && !words.empty()) {
      words.back() += tok.substr(2);
    } else {
      words.push_back(tok);
    }
  }
  return words;
}

}  // namespace capadapt
