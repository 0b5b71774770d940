// Copyright 2026 The FaceGCN Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "facegcn/png_io.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include <png.h>

#include "facegcn/errors.h"

namespace facegcn {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open(const std::string& path, const char* mode) {
  File f(std::fopen(path.c_str(), mode));
  if (!f) throw std::runtime_error("png: cannot open '" + path + "'");
  return f;
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void write_rows(const std::string& path, Index height, Index width, int color_type, int channels,
                const std::vector<std::uint8_t>& bytes) {
  File f = open(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png: cannot allocate writer");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("png: write failed for '" + path + "'");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (Index i = 0; i < height; ++i) {
    png_write_row(png, bytes.data() + i * width * channels);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png(const std::string& path, const ad::Tensor& image) {
  if (image.rank() != 3 || image.dim(2) != 3) {
    throw ContractViolation("write_png: expected an [H, W, 3] image, got " +
                            ad::shape_string(image.shape()));
  }
  std::vector<std::uint8_t> bytes(image.size());
  for (Index i = 0; i < image.size(); ++i) bytes[i] = to_byte(image[i]);
  write_rows(path, image.dim(0), image.dim(1), PNG_COLOR_TYPE_RGB, 3, bytes);
}

void write_mask_png(const std::string& path, const render::Mask& mask, Index height, Index width) {
  if (mask.size() != height * width) {
    throw ContractViolation("write_mask_png: mask size does not match " + std::to_string(height) +
                            "x" + std::to_string(width));
  }
  std::vector<std::uint8_t> bytes(mask.size());
  for (Index i = 0; i < mask.size(); ++i) bytes[i] = mask[i] != 0.0 ? 255 : 0;
  write_rows(path, height, width, PNG_COLOR_TYPE_GRAY, 1, bytes);
}

ad::Tensor read_png(const std::string& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw ParseError("read_png: " + std::string(img.message), 0);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, bytes.data(), 0, nullptr)) {
    png_image_free(&img);
    throw ParseError("read_png: " + std::string(img.message), 0);
  }
  const Index h = img.height, w = img.width;
  Eigen::VectorXd v(h * w * 3);
  for (Index i = 0; i < v.size(); ++i) v[i] = bytes[i] / 255.0;
  return ad::Tensor({h, w, 3}, std::move(v));
}

}  // namespace facegcn
