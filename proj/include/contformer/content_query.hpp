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

#ifndef CONTFORMER_CONTENT_QUERY_HPP_
#define CONTFORMER_CONTENT_QUERY_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "contformer/autograd.hpp"
#include "contformer/encoder.hpp"
#include "contformer/geometry.hpp"
#include "contformer/nn.hpp"

namespace contformer {

enum class RegionInit { kGrid, kRandom };

// N learnable regions shared across frames and samples. Raw parameters are
// unconstrained; sigmoid keeps every derived box inside the frame for the
// whole of training.
class QueryRegionBank {
 public:
  QueryRegionBank() = default;
  QueryRegionBank(ParamStore& store, const std::string& prefix, std::int64_t n,
                  RegionInit mode, Rng& rng);

  ag::Var params() const { return params_; }          // N x 4 raw
  ag::Var boxes_var() const;                          // N x 4 in (0,1)
  std::vector<geom::Box> boxes() const;               // detached snapshot
  std::int64_t size() const { return n_; }

 private:
  std::int64_t n_ = 0;
  ag::Var params_;
};

// P x P bilinear taps over `box` on frame t's rows of the flattened video
// tokens u (grid H x W, rows t*H*W + y*W + x). Returns bins x C, bin-major
// by row. Differentiable with respect to u and to the box coordinates;
// samples falling outside the frame are clamped to the border.
ag::Var roi_align(const ag::Var& u, std::int64_t t, std::int64_t h,
                  std::int64_t w, const ag::Var& box, std::int64_t bins);

struct ContentQuerySet {
  ag::Var q;  // (T*N) x C, row t*N + i
  std::int64_t t = 0, n = 0, c = 0;
  bool content_aware = true;
  std::vector<std::int64_t> region_of;  // provenance: region index per row
};

// Produces the per-frame query features, either content-conditioned via RoI
// alignment over the video tokens or as frame-independent learned embeddings
// (the ablation baseline).
class ContentQueryGenerator {
 public:
  ContentQueryGenerator() = default;
  ContentQueryGenerator(ParamStore& store, const std::string& prefix,
                        std::int64_t n, std::int64_t dim, std::int64_t bins,
                        bool content_aware, RegionInit init, Rng& rng);

  ContentQuerySet generate(const FlatVideo& video) const;

  const QueryRegionBank& bank() const { return bank_; }
  bool content_aware() const { return content_aware_; }
  std::int64_t bins() const { return bins_; }

 private:
  std::int64_t n_ = 0, dim_ = 0, bins_ = 0;
  bool content_aware_ = true;
  QueryRegionBank bank_;
  Linear pool_proj_;     // (bins^2 * C) -> C
  Embedding index_emb_;  // per-region identity, content-aware path
  Embedding agnostic_;   // the baseline's frame-independent queries
};

}  // namespace contformer

#endif  // CONTFORMER_CONTENT_QUERY_HPP_
