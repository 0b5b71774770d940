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

#ifndef FACEGCN_PNG_IO_H_
#define FACEGCN_PNG_IO_H_

#include <string>

#include "facegcn/render.h"
#include "facegcn/tensor.h"

namespace facegcn {

// 8-bit RGB PNG from an [H, W, 3] image; values are clamped to [0, 1].
void write_png(const std::string& path, const ad::Tensor& image);
// 8-bit grayscale PNG, 255 where the mask is set.
void write_mask_png(const std::string& path, const render::Mask& mask, Index height, Index width);
// Any 8-bit PNG, converted to RGB [H, W, 3] in [0, 1]. Throws ParseError.
ad::Tensor read_png(const std::string& path);

}  // namespace facegcn

#endif  // FACEGCN_PNG_IO_H_
