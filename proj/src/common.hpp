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

#ifndef CAPADAPT_COMMON_HPP_
#define CAPADAPT_COMMON_HPP_

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace capadapt {

// Mirrors the cap_status values of the C API.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kParse = 2,
  kIntegrity = 3,
  kIo = 4,
  kConfig = 5,
  kState = 6,
  kNotFound = 7,
  kBusy = 8,
  kInternal = 9,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline Error ParseError(const std::string& m) { return {ErrorCode::kParse, m}; }
inline Error IntegrityError(const std::string& m) { return {ErrorCode::kIntegrity, m}; }
inline Error IoError(const std::string& m) { return {ErrorCode::kIo, m}; }
inline Error ConfigError(const std::string& m) { return {ErrorCode::kConfig, m}; }
inline Error StateError(const std::string& m) { return {ErrorCode::kState, m}; }
inline Error InvalidArgument(const std::string& m) { return {ErrorCode::kInvalidArgument, m}; }

using Rng = std::mt19937_64;

std::string ToLower(std::string_view s);
std::string Trim(std::string_view s);
std::string Join(const std::vector<std::string>& parts, std::string_view sep);
std::vector<std::string> SplitWhitespace(std::string_view s);

// Lowercased runs of ASCII alphanumerics (bytes >= 0x80 count as word
// characters so UTF-8 words stay whole).
std::vector<std::string> WordTokens(std::string_view text);

// Stable 64-bit FNV-1a; unlike std::hash it is identical across platforms.
std::uint64_t Fnv1a(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t SplitMix64(std::uint64_t x);
std::uint64_t MixSeed(std::uint64_t a, std::uint64_t b);

// Warnings go to stderr unless a sink is installed (tests capture them).
void LogWarning(const std::string& message);
void SetWarningSink(std::function<void(const std::string&)> sink);

std::string ReadFile(const std::string& path);
void WriteFileAtomic(const std::string& path, std::string_view content);

// Uniform index in [0, n) drawn from raw engine output, so the sequence
// does not depend on the standard library's distribution implementation.
std::size_t UniformIndex(Rng& rng, std::size_t n);
// Uniform double in [0, 1) with 53 random bits.
double UniformUnit(Rng& rng);

}  // namespace capadapt

#endif  // CAPADAPT_COMMON_HPP_
