// Copyright 2026 The ContFormer Authors.
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

#ifndef CONTFORMER_BACKBONES_HPP_
#define CONTFORMER_BACKBONES_HPP_

#include <cstdint>
#include <vector>

#include "contformer/autograd.hpp"
#include "contformer/nn.hpp"
#include "contformer/tensor.hpp"

namespace contformer {

using nn::Embedding;
using nn::Linear;
using nn::ParamStore;
using nn::sinusoid_1d;
using nn::sinusoid_2d;

// Per-frame feature grid. Rows of `features` are laid out t-major, then y,
// then x (row index t*H*W + y*W + x), one row per grid cell.
struct VisualFeatureGrid {
  ag::Var features;  // (T*H*W) x C
  std::int64_t t = 0, h = 0, w = 0, c = 0;
  // Normalized cell-center coordinates, parallel to the rows.
  std::vector<double> center_x, center_y;
  std::vector<std::int64_t> frame_of;
};

struct TextFeatureSeq {
  ag::Var features;  // L x C
  std::vector<std::uint8_t> mask;  // 1 = real token
};

// Patch mean-pool over pixels, affine projection to C, fixed 2D sinusoidal
// position encoding. Stands in for a pretrained image backbone.
class VisualBackbone {
 public:
  VisualBackbone() = default;
  VisualBackbone(ParamStore& store, const std::string& prefix,
                 std::int64_t patch, std::int64_t dim, Rng& rng);

  // frames: {T, 3, H_img, W_img}, dims divisible by the patch size.
  VisualFeatureGrid encode_frames(const Tensor& frames) const;

  std::int64_t patch_size() const { return patch_; }
  std::int64_t dim() const { return dim_; }

 private:
  std::int64_t patch_ = 0, dim_ = 0;
  Linear proj_;  // 3 -> C on per-patch channel means
};

// Embedding lookup plus 1D sinusoidal position encoding; padded tail rows are
// zeroed so they stay inert even before masking.
class TextBackbone {
 public:
  TextBackbone() = default;
  TextBackbone(ParamStore& store, const std::string& prefix,
               std::int64_t vocab_size, std::int64_t dim, Rng& rng);

  TextFeatureSeq encode_text(const std::vector<int>& token_ids,
                             const std::vector<std::uint8_t>& mask) const;

  std::int64_t dim() const { return dim_; }

 private:
  std::int64_t dim_ = 0;
  Embedding table_;
};

}  // namespace contformer

#endif  // CONTFORMER_BACKBONES_HPP_
