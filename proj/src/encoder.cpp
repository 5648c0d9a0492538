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

#include "contformer/encoder.hpp"

#include <stdexcept>

namespace contformer {

FlatVideo flatten_video(const VisualFeatureGrid& grid) {
  FlatVideo out;
  out.u = grid.features;  // rows already t-major from the backbone
  out.t = grid.t;
  out.h = grid.h;
  out.w = grid.w;
  out.c = grid.c;
  const std::int64_t F = grid.t * grid.h * grid.w;
  out.coords.frame.resize(static_cast<std::size_t>(F));
  out.coords.y.resize(static_cast<std::size_t>(F));
  out.coords.x.resize(static_cast<std::size_t>(F));
  for (std::int64_t t = 0; t < grid.t; ++t)
    for (std::int64_t y = 0; y < grid.h; ++y)
      for (std::int64_t x = 0; x < grid.w; ++x) {
        const std::size_t row =
            static_cast<std::size_t>(t * grid.h * grid.w + y * grid.w + x);
        out.coords.frame[row] = t;
        out.coords.y[row] = y;
        out.coords.x[row] = x;
      }
  out.coords.cx = grid.center_x;
  out.coords.cy = grid.center_y;
  return out;
}

CrossModalEncoder::CrossModalEncoder(ParamStore& store,
                                     const std::string& prefix,
                                     std::int64_t dim, std::int64_t layers,
                                     std::int64_t heads, std::int64_t ffn_dim,
                                     bool modality_embed, Rng& rng)
    : dim_(dim), modality_embed_(modality_embed) {
  type_embed_ = store.create(prefix + ".type", {2, dim}, Init::kNormal02, rng);
  for (std::int64_t i = 0; i < layers; ++i)
    layers_.emplace_back(store, prefix + ".layer" + std::to_string(i), dim,
                         heads, ffn_dim, rng);
}

FusedMemory CrossModalEncoder::fuse(
    const FlatVideo& video, const TextFeatureSeq& text,
    const std::vector<std::uint8_t>& frame_mask) const {
  if (video.c != dim_ || text.features->val.cols() != dim_)
    throw std::invalid_argument("fuse: dimension mismatch");
  const std::int64_t F = video.t * video.h * video.w;
  const std::int64_t L = text.features->val.rows();
  if (!frame_mask.empty() &&
      static_cast<std::int64_t>(frame_mask.size()) != video.t)
    throw std::invalid_argument("fuse: frame mask length mismatch");

  ag::Var u = video.u;
  // Frame order is otherwise invisible after flattening; a fixed temporal
  // encoding ties each visual token to its frame.
  {
    Tensor pe1 = sinusoid_1d(video.t, dim_);
    Tensor pe({F, dim_});
    for (std::int64_t t = 0; t < video.t; ++t)
      for (std::int64_t i = 0; i < video.h * video.w; ++i)
        for (std::int64_t c = 0; c < dim_; ++c)
          pe(t * video.h * video.w + i, c) = pe1(t, c);
    u = ag::add(u, ag::constant(std::move(pe)));
  }
  ag::Var y = text.features;
  if (modality_embed_) {
    u = ag::add_rowvec(u, ag::slice_rows(type_embed_, 0, 1));
    y = ag::add_rowvec(y, ag::slice_rows(type_embed_, 1, 1));
  }

  FusedMemory mem;
  mem.f = F;
  mem.l = L;
  mem.c = dim_;
  mem.frames = video.t;
  mem.grid_h = video.h;
  mem.grid_w = video.w;
  mem.mask.assign(static_cast<std::size_t>(F + L), 1);
  if (!frame_mask.empty())
    for (std::int64_t t = 0; t < video.t; ++t)
      if (!frame_mask[static_cast<std::size_t>(t)])
        for (std::int64_t i = 0; i < video.h * video.w; ++i)
          mem.mask[static_cast<std::size_t>(t * video.h * video.w + i)] = 0;
  for (std::int64_t i = 0; i < L; ++i)
    mem.mask[static_cast<std::size_t>(F + i)] = text.mask[
        static_cast<std::size_t>(i)];

  ag::Var h = ag::concat_rows({u, y});
  for (const auto& layer : layers_) h = layer.forward(h, &mem.mask);
  // Masked rows carry garbage by construction; keep them hard zero.
  h = ag::mask_rows(h, mem.mask);
  mem.h = h;
  return mem;
}

}  // namespace contformer
