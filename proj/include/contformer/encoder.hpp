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

#ifndef CONTFORMER_ENCODER_HPP_
#define CONTFORMER_ENCODER_HPP_

#include <cstdint>
#include <vector>

#include "contformer/autograd.hpp"
#include "contformer/backbones.hpp"
#include "contformer/nn.hpp"

namespace contformer {

using nn::EncoderLayer;
using nn::Init;

// Token coordinates of each flattened visual row, retained for RoI lookup
// and visualization.
struct TokenCoords {
  std::vector<std::int64_t> frame, y, x;
  std::vector<double> cx, cy;  // normalized cell centers
};

// Flattened video tokens. Row order is t-major, then y, then x, so row
// index of (t, y, x) is t*H*W + y*W + x.
struct FlatVideo {
  ag::Var u;  // F x C with F = T*H*W
  std::int64_t t = 0, h = 0, w = 0, c = 0;
  TokenCoords coords;
};

FlatVideo flatten_video(const VisualFeatureGrid& grid);

// Joint memory over visual and text tokens. Rows [0, F) are the attended
// visual tokens, rows [F, F+L) the attended text tokens.
struct FusedMemory {
  ag::Var h;  // (F+L) x C
  std::int64_t f = 0, l = 0, c = 0;
  std::int64_t frames = 0, grid_h = 0, grid_w = 0;
  std::vector<std::uint8_t> mask;  // per row, 1 = attendable

  ag::Var visual() const { return ag::slice_rows(h, 0, f); }
  ag::Var text() const { return ag::slice_rows(h, f, l); }
};

// Self-attention encoder over the concatenated video and text tokens.
// Modality-type embeddings and a fixed temporal encoding are added to make
// the two halves and the frame order distinguishable after concatenation.
class CrossModalEncoder {
 public:
  CrossModalEncoder() = default;
  CrossModalEncoder(ParamStore& store, const std::string& prefix,
                    std::int64_t dim, std::int64_t layers, std::int64_t heads,
                    std::int64_t ffn_dim, bool modality_embed, Rng& rng);

  FusedMemory fuse(const FlatVideo& video, const TextFeatureSeq& text,
                   const std::vector<std::uint8_t>& frame_mask) const;

  EncoderLayer& layer(std::size_t i) { return layers_[i]; }
  std::size_t depth() const { return layers_.size(); }

 private:
  std::int64_t dim_ = 0;
  bool modality_embed_ = true;
  ag::Var type_embed_;  // 2 x C: row 0 visual, row 1 text
  std::vector<EncoderLayer> layers_;
};

}  // namespace contformer

#endif  // CONTFORMER_ENCODER_HPP_
