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

#include "image.hpp"

#include <png.h>

#include <cctype>
#include <cstring>
#include <filesystem>

#include "common.hpp"

namespace capadapt {

ImageBuffer::ImageBuffer(int w, int h, std::uint8_t fill)
    : width(w), height(h),
      pixels(static_cast<std::size_t>(w > 0 ? w : 0) * (h > 0 ? h : 0) * 3, fill) {}

namespace {

class PnmReader {
 public:
  explicit PnmReader(std::span<const std::uint8_t> b) : bytes_(b) {}

  long Number() {
    SkipSpaceAndComments();
    long v = 0;
    bool any = false;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > 1 << 20) throw ParseError("PNM header value too large");
      any = true;
    }
    if (!any) throw ParseError("PNM header truncated");
    return v;
  }
  void SkipOneSpace() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw ParseError("PNM header malformed");
    ++pos_;
  }
  std::size_t pos() const { return pos_; }

 private:
  void SkipSpaceAndComments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 2;
};

ImageBuffer DecodePnm(std::span<const std::uint8_t> bytes) {
  const char kind = static_cast<char>(bytes[1]);
  PnmReader rd(bytes);
  const long w = rd.Number();
  const long h = rd.Number();
  const long maxval = rd.Number();
  if (w <= 0 || h <= 0) throw ParseError("PNM image has zero area");
  if (maxval != 255) throw ParseError("only 8-bit PNM images are supported");
  ImageBuffer img(static_cast<int>(w), static_cast<int>(h));
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (kind == '3') {
    for (std::size_t i = 0; i < n * 3; ++i) {
      long v = rd.Number();
      if (v > 255) throw ParseError("PPM sample out of range");
      img.pixels[i] = static_cast<std::uint8_t>(v);
    }
    return img;
  }
  rd.SkipOneSpace();
  const std::size_t channels = kind == '6' ? 3 : 1;
  if (bytes.size() - rd.pos() < n * channels) throw ParseError("PNM pixel data truncated");
  const std::uint8_t* src = bytes.data() + rd.pos();
  if (channels == 3) {
    std::memcpy(img.pixels.data(), src, n * 3);
  } else {
    for (std::size_t i = 0; i < n; ++i) img.pixels[3 * i] = img.pixels[3 * i + 1] = img.pixels[3 * i + 2] = src[i];
  }
  return img;
}

ImageBuffer DecodePng(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw ParseError(std::string("PNG decode failed: ") + image.message);
  image.format = PNG_FORMAT_RGB;
  if (image.width == 0 || image.height == 0 || image.width > (1u << 15) || image.height > (1u << 15)) {
    png_image_free(&image);
    throw ParseError("PNG dimensions out of range");
  }
  ImageBuffer img(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw ParseError("PNG decode failed: " + msg);
  }
  return img;
}

}  // namespace

ImageBuffer DecodeImage(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return DecodePng(bytes);
  if (bytes.size() >= 3 && bytes[0] == 'P' && (bytes[1] == '3' || bytes[1] == '5' || bytes[1] == '6'))
    return DecodePnm(bytes);
  throw ParseError("unrecognized image format (expected PNG or PPM/PGM)");
}

ImageBuffer LoadImageFile(const std::string& path) {
  const std::string data = ReadFile(path);
  try {
    return DecodeImage({reinterpret_cast<const std::uint8_t*>(data.data()), data.size()});
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

std::string EncodePpm(const ImageBuffer& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  return out;
}

std::string EncodePng(const ImageBuffer& img) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.pixels.data(), 0, nullptr))
    throw IoError(std::string("PNG encode failed: ") + image.message);
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.pixels.data(), 0, nullptr))
    throw IoError(std::string("PNG encode failed: ") + image.message);
  out.resize(size);
  return out;
}

void SaveImageFile(const ImageBuffer& img, const std::string& path) {
  const auto ext = ToLower(std::filesystem::path(path).extension().string());
  WriteFileAtomic(path, ext == ".png" ? EncodePng(img) : EncodePpm(img));
}

}  // namespace capadapt
