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

#ifndef CAPADAPT_IMAGE_HPP_
#define CAPADAPT_IMAGE_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace capadapt {

// Interleaved RGB8, row-major.
struct ImageBuffer {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  ImageBuffer() = default;
  ImageBuffer(int w, int h, std::uint8_t fill = 0);

  bool valid() const {
    return width > 0 && height > 0 &&
           pixels.size() == static_cast<std::size_t>(width) * height * 3;
  }
  std::uint8_t& at(int x, int y, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  bool operator==(const ImageBuffer&) const = default;
};

// Binary/ASCII PPM, binary PGM and PNG. Throws ParseError on anything else.
ImageBuffer DecodeImage(std::span<const std::uint8_t> bytes);
ImageBuffer LoadImageFile(const std::string& path);

std::string EncodePpm(const ImageBuffer& img);
std::string EncodePng(const ImageBuffer& img);
void SaveImageFile(const ImageBuffer& img, const std::string& path);

// ITU-R BT.601 luma in [0, 255].
inline double Luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

}  // namespace capadapt

#endif  // CAPADAPT_IMAGE_HPP_
