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

#include "contformer/backbones.hpp"

#include <stdexcept>

namespace contformer {

VisualBackbone::VisualBackbone(ParamStore& store, const std::string& prefix,
                               std::int64_t patch, std::int64_t dim, Rng& rng)
    : patch_(patch), dim_(dim),
      proj_(store, prefix + ".proj", 3, dim, rng) {
  if (patch < 1) throw std::invalid_argument("patch size must be positive");
  if (dim % 4 != 0)
    throw std::invalid_argument("visual dim must be divisible by 4");
}

VisualFeatureGrid VisualBackbone::encode_frames(const Tensor& frames) const {
  if (frames.shape().size() != 4 || frames.shape()[1] != 3)
    throw std::invalid_argument("encode_frames: expected {T, 3, H, W}");
  const std::int64_t T = frames.shape()[0];
  const std::int64_t Hi = frames.shape()[2], Wi = frames.shape()[3];
  if (Hi % patch_ != 0 || Wi % patch_ != 0)
    throw std::invalid_argument("encode_frames: image not divisible by patch");
  const std::int64_t H = Hi / patch_, W = Wi / patch_;

  // Per-patch channel means, one row per grid cell, t-major.
  Tensor pooled({T * H * W, 3});
  const double inv = 1.0 / static_cast<double>(patch_ * patch_);
  const double* px = frames.data();
  for (std::int64_t t = 0; t < T; ++t) {
    for (std::int64_t gy = 0; gy < H; ++gy) {
      for (std::int64_t gx = 0; gx < W; ++gx) {
        const std::int64_t row = t * H * W + gy * W + gx;
        for (std::int64_t ch = 0; ch < 3; ++ch) {
          double acc = 0.0;
          const double* plane = px + (t * 3 + ch) * Hi * Wi;
          for (std::int64_t dy = 0; dy < patch_; ++dy)
            for (std::int64_t dx = 0; dx < patch_; ++dx)
              acc += plane[(gy * patch_ + dy) * Wi + (gx * patch_ + dx)];
          pooled(row, ch) = acc * inv;
        }
      }
    }
  }

  ag::Var feat = proj_.forward(ag::constant(std::move(pooled)));
  Tensor pe2d = sinusoid_2d(H, W, dim_);  // (H*W) x C
  Tensor pe({T * H * W, dim_});
  for (std::int64_t t = 0; t < T; ++t)
    for (std::int64_t i = 0; i < H * W; ++i)
      for (std::int64_t c = 0; c < dim_; ++c)
        pe(t * H * W + i, c) = pe2d(i, c);
  feat = ag::add(feat, ag::constant(std::move(pe)));

  VisualFeatureGrid grid;
  grid.features = feat;
  grid.t = T;
  grid.h = H;
  grid.w = W;
  grid.c = dim_;
  grid.center_x.resize(static_cast<std::size_t>(T * H * W));
  grid.center_y.resize(static_cast<std::size_t>(T * H * W));
  grid.frame_of.resize(static_cast<std::size_t>(T * H * W));
  for (std::int64_t t = 0; t < T; ++t) {
    for (std::int64_t gy = 0; gy < H; ++gy) {
      for (std::int64_t gx = 0; gx < W; ++gx) {
        const std::int64_t row = t * H * W + gy * W + gx;
        grid.center_x[static_cast<std::size_t>(row)] = (gx + 0.5) / W;
        grid.center_y[static_cast<std::size_t>(row)] = (gy + 0.5) / H;
        grid.frame_of[static_cast<std::size_t>(row)] = t;
      }
    }
  }
  return grid;
}

TextBackbone::TextBackbone(ParamStore& store, const std::string& prefix,
                           std::int64_t vocab_size, std::int64_t dim, Rng& rng)
    : dim_(dim), table_(store, prefix + ".embed", vocab_size, dim, rng) {}

TextFeatureSeq TextBackbone::encode_text(
    const std::vector<int>& token_ids,
    const std::vector<std::uint8_t>& mask) const {
  if (token_ids.empty())
    throw std::invalid_argument("encode_text: empty token sequence");
  if (mask.size() != token_ids.size())
    throw std::invalid_argument("encode_text: mask length mismatch");
  const std::int64_t L = static_cast<std::int64_t>(token_ids.size());
  std::vector<std::int64_t> ids(token_ids.begin(), token_ids.end());
  ag::Var emb = table_.forward(ids);
  emb = ag::add(emb, ag::constant(sinusoid_1d(L, dim_)));
  emb = ag::mask_rows(emb, mask);
  TextFeatureSeq out;
  out.features = emb;
  out.mask = mask;
  return out;
}

}  // namespace contformer
