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

#include "augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>
#include <tuple>

namespace capadapt {

AugmentMode ParseAugmentMode(std::string_view s) {
  const std::string m = ToLower(s);
  if (m == "no" || m == "none") return AugmentMode::kNo;
  if (m == "img") return AugmentMode::kImg;
  if (m == "txt") return AugmentMode::kTxt;
  if (m == "both") return AugmentMode::kBoth;
  throw ConfigError("unknown augmentation mode '" + std::string(s) + "' (no|img|txt|both)");
}

std::string_view AugmentModeName(AugmentMode m) {
  switch (m) {
    case AugmentMode::kNo: return "no";
    case AugmentMode::kImg: return "img";
    case AugmentMode::kTxt: return "txt";
    case AugmentMode::kBoth: return "both";
  }
  return "no";
}

void ImageAugmentParams::Validate() const {
  for (double p : {flip_prob, rotate_prob, blur_prob, clahe_prob, grid_prob, optical_prob})
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("augmentation probabilities must lie in [0, 1]");
  if (clahe_tiles < 1 || grid_nodes < 2) throw ConfigError("invalid CLAHE tile or grid node count");
  if (blur_sigma_min <= 0 || blur_sigma_max < blur_sigma_min) throw ConfigError("invalid blur sigma range");
}

namespace {

std::uint8_t Clamp8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

std::uint8_t RoundEven8(float v) {
  return static_cast<std::uint8_t>(std::clamp(std::nearbyint(v), 0.0f, 255.0f));
}

// Bilinear sample with coordinates clamped to the image (edge replication).
void SampleBilinear(const ImageBuffer& img, double x, double y, std::uint8_t* out) {
  x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double fx = x - x0, fy = y - y0;
  for (int c = 0; c < 3; ++c) {
    const double top = img.at(x0, y0, c) * (1 - fx) + img.at(x1, y0, c) * fx;
    const double bot = img.at(x0, y1, c) * (1 - fx) + img.at(x1, y1, c) * fx;
    out[c] = Clamp8(top * (1 - fy) + bot * fy);
  }
}

template <typename Map>
ImageBuffer Remap(const ImageBuffer& img, Map&& source_of) {
  ImageBuffer out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      auto [sx, sy] = source_of(x, y);
      SampleBilinear(img, sx, sy, &out.pixels[(static_cast<std::size_t>(y) * img.width + x) * 3]);
    }
  }
  return out;
}

}  // namespace

ImageBuffer FlipHorizontal(const ImageBuffer& img) {
  ImageBuffer out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(img.width - 1 - x, y, c) = img.at(x, y, c);
  return out;
}

ImageBuffer Rotate(const ImageBuffer& img, double degrees) {
  const double rad = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  const double cx = (img.width - 1) / 2.0, cy = (img.height - 1) / 2.0;
  return Remap(img, [&](int x, int y) {
    const double dx = x - cx, dy = y - cy;
    return std::pair{cs * dx - sn * dy + cx, sn * dx + cs * dy + cy};
  });
}

ImageBuffer GaussianBlur(const ImageBuffer& img, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) sum += kernel[i + radius] = std::exp(-(i * i) / (2 * sigma * sigma));
  for (auto& k : kernel) k /= sum;

  const int w = img.width, h = img.height;
  std::vector<double> tmp(img.pixels.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * img.at(std::clamp(x + i, 0, w - 1), y, c);
        tmp[(static_cast<std::size_t>(y) * w + x) * 3 + c] = acc;
      }
  ImageBuffer out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[i + radius] * tmp[(static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x) * 3 + c];
        out.at(x, y, c) = Clamp8(acc);
      }
  return out;
}

std::array<std::uint8_t, 256> ClaheLut(std::span<const std::uint32_t, 256> hist_in, std::uint32_t area,
                                       double clip_limit) {
  std::array<std::uint32_t, 256> hist;
  std::copy(hist_in.begin(), hist_in.end(), hist.begin());
  const auto limit = std::max<std::uint32_t>(1, static_cast<std::uint32_t>(clip_limit * area / 256.0));
  std::uint32_t excess = 0;
  for (auto& b : hist) {
    if (b > limit) {
      excess += b - limit;
      b = limit;
    }
  }
  const std::uint32_t batch = excess / 256;
  const std::uint32_t residual = excess % 256;
  for (auto& b : hist) b += batch;
  if (residual) {
    const std::uint32_t step = std::max<std::uint32_t>(256 / residual, 1);
    for (std::uint32_t i = 0, left = residual; i < 256 && left > 0; i += step, --left) ++hist[i];
  }
  // Single precision and round-half-even, as in OpenCV.
  const float scale = 255.0f / static_cast<float>(area);
  std::array<std::uint8_t, 256> lut;
  std::uint32_t cdf = 0;
  for (int i = 0; i < 256; ++i) {
    cdf += hist[i];
    lut[i] = RoundEven8(static_cast<float>(cdf) * scale);
  }
  return lut;
}

ImageBuffer Clahe(const ImageBuffer& img, int tiles, double clip_limit) {
  const int w = img.width, h = img.height;
  const int tx_n = std::min(tiles, w), ty_n = std::min(tiles, h);
  auto x_lo = [&](int t) { return t * w / tx_n; };
  auto y_lo = [&](int t) { return t * h / ty_n; };

  std::vector<double> ycc(static_cast<std::size_t>(w) * h * 3);
  std::vector<std::uint8_t> luma(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double r = img.at(x, y, 0), g = img.at(x, y, 1), b = img.at(x, y, 2);
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double Y = 0.299 * r + 0.587 * g + 0.114 * b;
      ycc[3 * i] = Y;
      ycc[3 * i + 1] = 128 - 0.168736 * r - 0.331264 * g + 0.5 * b;
      ycc[3 * i + 2] = 128 + 0.5 * r - 0.418688 * g - 0.081312 * b;
      luma[i] = Clamp8(Y);
    }

  std::vector<std::array<std::uint8_t, 256>> luts(static_cast<std::size_t>(tx_n) * ty_n);
  for (int ty = 0; ty < ty_n; ++ty)
    for (int tx = 0; tx < tx_n; ++tx) {
      std::array<std::uint32_t, 256> hist{};
      for (int y = y_lo(ty); y < y_lo(ty + 1); ++y)
        for (int x = x_lo(tx); x < x_lo(tx + 1); ++x) ++hist[luma[static_cast<std::size_t>(y) * w + x]];
      const auto area = static_cast<std::uint32_t>((x_lo(tx + 1) - x_lo(tx)) * (y_lo(ty + 1) - y_lo(ty)));
      luts[static_cast<std::size_t>(ty) * tx_n + tx] = ClaheLut(hist, area, clip_limit);
    }

  // Tile-centre interpolation weights, in single precision as in OpenCV.
  auto coord = [](int p, int n_tiles, int extent) {
    const float f = static_cast<float>(p) * (static_cast<float>(n_tiles) / static_cast<float>(extent)) - 0.5f;
    const int t0 = static_cast<int>(std::floor(f));
    return std::tuple{std::max(t0, 0), std::min(t0 + 1, n_tiles - 1), f - static_cast<float>(t0)};
  };

  ImageBuffer out(w, h);
  for (int y = 0; y < h; ++y) {
    const auto [ty, ty1, fy] = coord(y, ty_n, h);
    for (int x = 0; x < w; ++x) {
      const auto [tx, tx1, fx] = coord(x, tx_n, w);
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const std::uint8_t v = luma[i];
      auto lut = [&](int a, int b) { return static_cast<float>(luts[static_cast<std::size_t>(b) * tx_n + a][v]); };
      const float eq = (lut(tx, ty) * (1.0f - fx) + lut(tx1, ty) * fx) * (1.0f - fy) +
                       (lut(tx, ty1) * (1.0f - fx) + lut(tx1, ty1) * fx) * fy;
      const double Y = ycc[3 * i] + (RoundEven8(eq) - v);
      const double cb = ycc[3 * i + 1] - 128, cr = ycc[3 * i + 2] - 128;
      out.at(x, y, 0) = Clamp8(Y + 1.402 * cr);
      out.at(x, y, 1) = Clamp8(Y - 0.344136 * cb - 0.714136 * cr);
      out.at(x, y, 2) = Clamp8(Y + 1.772 * cb);
    }
  }
  return out;
}

ImageBuffer GridDistort(const ImageBuffer& img, int nodes, std::span<const std::array<double, 2>> offsets) {
  if (nodes < 2 || offsets.size() != static_cast<std::size_t>(nodes) * nodes)
    throw InvalidArgument("grid distortion needs nodes x nodes offsets");
  const double sx = nodes > 1 ? (img.width - 1) / static_cast<double>(nodes - 1) : 1.0;
  const double sy = nodes > 1 ? (img.height - 1) / static_cast<double>(nodes - 1) : 1.0;
  return Remap(img, [&](int x, int y) {
    const double gx = sx > 0 ? x / sx : 0, gy = sy > 0 ? y / sy : 0;
    const int i0 = std::min(static_cast<int>(gx), nodes - 2), j0 = std::min(static_cast<int>(gy), nodes - 2);
    const double fx = gx - i0, fy = gy - j0;
    auto off = [&](int i, int j, int c) { return offsets[static_cast<std::size_t>(j) * nodes + i][c]; };
    double d[2];
    for (int c = 0; c < 2; ++c)
      d[c] = (off(i0, j0, c) * (1 - fx) + off(i0 + 1, j0, c) * fx) * (1 - fy) +
             (off(i0, j0 + 1, c) * (1 - fx) + off(i0 + 1, j0 + 1, c) * fx) * fy;
    return std::pair{x + d[0], y + d[1]};
  });
}

ImageBuffer OpticalDistort(const ImageBuffer& img, double k) {
  const double cx = (img.width - 1) / 2.0, cy = (img.height - 1) / 2.0;
  const double nx = std::max(cx, 1.0), ny = std::max(cy, 1.0);
  return Remap(img, [&](int x, int y) {
    const double u = (x - cx) / nx, v = (y - cy) / ny;
    const double scale = 1 + k * (u * u + v * v);
    return std::pair{cx + u * scale * nx, cy + v * scale * ny};
  });
}

ImageBuffer AugmentImage(const ImageBuffer& img, const ImageAugmentParams& p, Rng& rng) {
  if (!img.valid()) throw InvalidArgument("cannot augment an invalid image");
  auto coin = [&](double prob) { return UniformUnit(rng) < prob; };
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * UniformUnit(rng); };

  ImageBuffer out = img;
  if (coin(p.flip_prob)) out = FlipHorizontal(out);
  if (coin(p.rotate_prob)) out = Rotate(out, uniform(-p.max_rotate_deg, p.max_rotate_deg));
  if (coin(p.blur_prob)) out = GaussianBlur(out, uniform(p.blur_sigma_min, p.blur_sigma_max));
  if (coin(p.clahe_prob)) out = Clahe(out, p.clahe_tiles, p.clahe_clip);
  if (coin(p.grid_prob)) {
    std::vector<std::array<double, 2>> offsets(static_cast<std::size_t>(p.grid_nodes) * p.grid_nodes);
    for (auto& o : offsets) {
      o[0] = uniform(-p.grid_jitter, p.grid_jitter) * out.width;
      o[1] = uniform(-p.grid_jitter, p.grid_jitter) * out.height;
    }
    out = GridDistort(out, p.grid_nodes, offsets);
  }
  if (coin(p.optical_prob)) out = OpticalDistort(out, uniform(-p.optical_max_k, p.optical_max_k));
  return out;
}

Thesaurus Thesaurus::Parse(std::string_view text) {
  Thesaurus t;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError("thesaurus line " + std::to_string(line_no) + ": expected word<TAB>synonyms");
    std::vector<std::string> syns;
    std::istringstream ss(line.substr(tab + 1));
    std::string s;
    while (std::getline(ss, s, ',')) {
      s = ToLower(Trim(s));
      if (!s.empty()) syns.push_back(s);
    }
    t.Add(ToLower(Trim(line.substr(0, tab))), std::move(syns));
  }
  return t;
}

Thesaurus Thesaurus::Load(const std::string& path) { return Parse(ReadFile(path)); }

void Thesaurus::Add(const std::string& word, std::vector<std::string> synonyms) {
  if (!synonyms.empty()) table_[word] = std::move(synonyms);
}

const std::vector<std::string>* Thesaurus::Synonyms(const std::string& word) const {
  auto it = table_.find(word);
  return it == table_.end() ? nullptr : &it->second;
}

bool IsStopWord(const std::string& word) {
  static const std::unordered_set<std::string> kStop = {
      "a", "an", "the", "of", "on", "in", "at", "to", "and", "or", "is", "are", "with",
      "for", "from", "by", "this", "that", "it", "its", "be", "as", "some", "there"};
  return kStop.count(word) > 0;
}

std::vector<std::string> SwapTokens(std::vector<std::string> tokens, std::size_t i, std::size_t j) {
  if (i < tokens.size() && j < tokens.size()) std::swap(tokens[i], tokens[j]);
  return tokens;
}

std::vector<std::string> DeleteToken(std::vector<std::string> tokens, std::size_t i) {
  if (tokens.size() > 3 && i < tokens.size()) tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(i));
  return tokens;
}

std::vector<std::string> InsertDuplicate(std::vector<std::string> tokens, std::size_t src, std::size_t pos) {
  if (src < tokens.size() && pos <= tokens.size()) {
    std::string w = tokens[src];
    tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(pos), std::move(w));
  }
  return tokens;
}

std::vector<std::string> AugmentText(const std::vector<std::string>& tokens, Rng& rng, const Thesaurus* thesaurus) {
  if (tokens.empty()) return tokens;
  std::vector<TextEdit> edits = {TextEdit::kSwap, TextEdit::kDelete, TextEdit::kInsert};
  if (thesaurus && !thesaurus->empty()) edits.insert(edits.begin(), TextEdit::kReplace);
  const TextEdit edit = edits[UniformIndex(rng, edits.size())];
  const std::size_t n = tokens.size();
  switch (edit) {
    case TextEdit::kReplace: {
      std::vector<std::size_t> eligible;
      for (std::size_t i = 0; i < n; ++i)
        if (!IsStopWord(tokens[i]) && thesaurus->Synonyms(tokens[i])) eligible.push_back(i);
      if (eligible.empty()) return tokens;
      const std::size_t i = eligible[UniformIndex(rng, eligible.size())];
      const auto& syns = *thesaurus->Synonyms(tokens[i]);
      std::vector<std::string> out = tokens;
      out[i] = syns[UniformIndex(rng, syns.size())];
      return out;
    }
    case TextEdit::kSwap: {
      if (n < 2) return tokens;
      const std::size_t i = UniformIndex(rng, n);
      std::size_t j = UniformIndex(rng, n - 1);
      if (j >= i) ++j;
      return SwapTokens(tokens, i, j);
    }
    case TextEdit::kDelete:
      return DeleteToken(tokens, UniformIndex(rng, n));
    case TextEdit::kInsert: {
      const std::size_t src = UniformIndex(rng, n);
      return InsertDuplicate(tokens, src, UniformIndex(rng, n + 1));
    }
  }
  return tokens;
}

std::vector<std::string> OfflineParaphraser::Generate(const std::string& caption, int n, Rng& rng) {
  if (n < 1) throw ConfigError("paraphrase count must be >= 1");
  const auto tokens = WordTokens(caption);
  const std::string source = Join(tokens, " ");
  std::vector<std::string> out;
  std::set<std::string> seen = {source};
  for (int attempt = 0; attempt < 20 * n && static_cast<int>(out.size()) < n; ++attempt) {
    std::string cand = Join(AugmentText(tokens, rng, thesaurus_.get()), " ");
    if (seen.insert(cand).second) out.push_back(std::move(cand));
  }
  return out;
}

ParaphrasePool::ParaphrasePool(std::vector<std::shared_ptr<ParaphraseProvider>> providers)
    : providers_(std::move(providers)) {
  if (providers_.empty()) throw ConfigError("paraphrase pool needs at least one provider");
}

std::vector<std::string> ParaphrasePool::Generate(const std::string& caption, int n, Rng& rng, std::size_t rotation) {
  if (n < 1) throw ConfigError("paraphrase count must be >= 1");
  const std::size_t p = providers_.size();
  std::vector<int> share(p, 0);
  for (int j = 0; j < n; ++j) ++share[(rotation + j) % p];
  std::vector<std::string> out;
  for (std::size_t k = 0; k < p; ++k) {
    const std::size_t idx = (rotation + k) % p;
    if (share[idx] == 0) continue;
    auto got = providers_[idx]->Generate(caption, share[idx], rng);
    if (got.size() > static_cast<std::size_t>(share[idx])) got.resize(share[idx]);
    out.insert(out.end(), got.begin(), got.end());
  }
  return out;
}

void AugmentConfig::Validate() const {
  if (factor < 1) throw ConfigError("augmentation factor must be >= 1");
  image.Validate();
}

std::vector<Sample> ExpandBatch(std::span<const Sample> samples, const AugmentConfig& config,
                                ParaphrasePool* paraphrasers, std::uint64_t round, AugmentCounters* counters) {
  config.Validate();
  std::vector<Sample> out;
  if (config.mode == AugmentMode::kNo || config.factor == 1) {
    out.assign(samples.begin(), samples.end());
    if (counters)
      for (const auto& s : samples) counters->non_train_inputs += s.split != Split::kTrain;
    return out;
  }
  const bool do_img = config.mode == AugmentMode::kImg || config.mode == AugmentMode::kBoth;
  const bool do_txt = config.mode == AugmentMode::kTxt || config.mode == AugmentMode::kBoth;
  const int copies = config.factor - 1;

  static OfflineParaphraser default_offline;
  out.reserve(samples.size() * config.factor);
  for (std::size_t si = 0; si < samples.size(); ++si) {
    const Sample& src = samples[si];
    if (counters && src.split != Split::kTrain) ++counters->non_train_inputs;
    const std::uint64_t sample_seed = MixSeed(MixSeed(config.seed, round), Fnv1a(src.image_id));
    out.push_back(src);

    std::vector<std::vector<std::string>> captions;
    if (do_txt) {
      const std::string text = Join(src.caption, " ");
      Rng rng(MixSeed(sample_seed, Fnv1a(text)));
      std::vector<std::string> para;
      if (!src.caption.empty()) {
        para = paraphrasers ? paraphrasers->Generate(text, copies, rng, si)
                            : default_offline.Generate(text, copies, rng);
      }
      for (const auto& p : para) captions.push_back(WordTokens(p));
      while (static_cast<int>(captions.size()) < copies) captions.push_back(AugmentText(src.caption, rng));
    }
    for (int c = 1; c <= copies; ++c) {
      Sample copy = src;
      copy.copy_index = c;
      if (do_img && src.image) {
        Rng rng(MixSeed(sample_seed, static_cast<std::uint64_t>(c)));
        copy.image = std::make_shared<const ImageBuffer>(AugmentImage(*src.image, config.image, rng));
        if (counters) ++counters->images_augmented;
      }
      if (do_txt) {
        copy.caption = std::move(captions[c - 1]);
        if (counters) ++counters->captions_augmented;
      }
      out.push_back(std::move(copy));
    }
  }
  return out;
}

}  // namespace capadapt
