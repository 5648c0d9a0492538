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

#include "contformer/content_query.hpp"

#include <cmath>
#include <stdexcept>

namespace contformer {

namespace {

double logit(double v) { return std::log(v / (1.0 - v)); }

}  // namespace

QueryRegionBank::QueryRegionBank(ParamStore& store, const std::string& prefix,
                                 std::int64_t n, RegionInit mode, Rng& rng)
    : n_(n) {
  if (n < 1) throw std::invalid_argument("region bank needs n >= 1");
  Tensor raw({n, 4});
  const std::int64_t side =
      static_cast<std::int64_t>(std::llround(std::sqrt(double(n))));
  if (mode == RegionInit::kGrid && side * side == n) {
    for (std::int64_t i = 0; i < n; ++i) {
      const std::int64_t gy = i / side, gx = i % side;
      raw(i, 0) = logit((gx + 0.5) / static_cast<double>(side));
      raw(i, 1) = logit((gy + 0.5) / static_cast<double>(side));
      raw(i, 2) = logit(0.5);
      raw(i, 3) = logit(0.5);
    }
  } else {
    for (std::int64_t i = 0; i < n; ++i) {
      raw(i, 0) = logit(rng.uniform(0.2, 0.8));
      raw(i, 1) = logit(rng.uniform(0.2, 0.8));
      raw(i, 2) = logit(rng.uniform(0.3, 0.7));
      raw(i, 3) = logit(rng.uniform(0.3, 0.7));
    }
  }
  params_ = store.create(prefix + ".regions", {n, 4}, Init::kZeros, rng);
  params_->val = raw;
}

ag::Var QueryRegionBank::boxes_var() const { return ag::sigmoid(params_); }

std::vector<geom::Box> QueryRegionBank::boxes() const {
  std::vector<geom::Box> out;
  out.reserve(static_cast<std::size_t>(n_));
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  for (std::int64_t i = 0; i < n_; ++i)
    out.push_back({sig(params_->val(i, 0)), sig(params_->val(i, 1)),
                   sig(params_->val(i, 2)), sig(params_->val(i, 3))});
  return out;
}

ag::Var roi_align(const ag::Var& u, std::int64_t t, std::int64_t h,
                  std::int64_t w, const ag::Var& box, std::int64_t bins) {
  if (box->val.rows() != 1 || box->val.cols() != 4)
    throw std::invalid_argument("roi_align: box must be 1 x 4");
  if (bins < 1) throw std::invalid_argument("roi_align: bins must be >= 1");
  const std::int64_t C = u->val.cols();
  const std::int64_t base = t * h * w;
  if (base + h * w > u->val.rows())
    throw std::invalid_argument("roi_align: frame index out of range");
  const double cx = box->val(0, 0), cy = box->val(0, 1);
  const double bw = box->val(0, 2), bh = box->val(0, 3);

  struct Tap {
    std::int64_t r00, r01, r10, r11;
    double fx, fy;
    double dgx, dgy;  // d(grid coord)/d(normalized coord); 0 when clamped
    double ddx, ddy;  // bin-center offset factors for the size gradient
  };
  auto taps = std::make_shared<std::vector<Tap>>();
  taps->reserve(static_cast<std::size_t>(bins * bins));

  Tensor out({bins * bins, C});
  for (std::int64_t by = 0; by < bins; ++by) {
    for (std::int64_t bx = 0; bx < bins; ++bx) {
      const double ox = -0.5 + (bx + 0.5) / static_cast<double>(bins);
      const double oy = -0.5 + (by + 0.5) / static_cast<double>(bins);
      const double sx = cx + ox * bw;
      const double sy = cy + oy * bh;
      double gx = sx * static_cast<double>(w) - 0.5;
      double gy = sy * static_cast<double>(h) - 0.5;
      const bool in_x = gx > 0.0 && gx < static_cast<double>(w - 1);
      const bool in_y = gy > 0.0 && gy < static_cast<double>(h - 1);
      gx = std::min(std::max(gx, 0.0), static_cast<double>(w - 1));
      gy = std::min(std::max(gy, 0.0), static_cast<double>(h - 1));
      const std::int64_t x0 = static_cast<std::int64_t>(std::floor(gx));
      const std::int64_t y0 = static_cast<std::int64_t>(std::floor(gy));
      const std::int64_t x1 = std::min(x0 + 1, w - 1);
      const std::int64_t y1 = std::min(y0 + 1, h - 1);
      Tap tap;
      tap.fx = gx - static_cast<double>(x0);
      tap.fy = gy - static_cast<double>(y0);
      tap.r00 = base + y0 * w + x0;
      tap.r01 = base + y0 * w + x1;
      tap.r10 = base + y1 * w + x0;
      tap.r11 = base + y1 * w + x1;
      tap.dgx = in_x ? static_cast<double>(w) : 0.0;
      tap.dgy = in_y ? static_cast<double>(h) : 0.0;
      tap.ddx = ox;
      tap.ddy = oy;
      const std::int64_t row = by * bins + bx;
      for (std::int64_t c = 0; c < C; ++c) {
        const double v00 = u->val(tap.r00, c), v01 = u->val(tap.r01, c);
        const double v10 = u->val(tap.r10, c), v11 = u->val(tap.r11, c);
        out(row, c) = (1 - tap.fy) * ((1 - tap.fx) * v00 + tap.fx * v01) +
                      tap.fy * ((1 - tap.fx) * v10 + tap.fx * v11);
      }
      taps->push_back(tap);
    }
  }

  return ag::make_node(std::move(out), {u, box}, [u, box, taps](ag::Node& n) {
    const std::int64_t C = u->val.cols();
    Tensor* gu = u->requires_grad ? &u->ensure_grad() : nullptr;
    Tensor* gb = box->requires_grad ? &box->ensure_grad() : nullptr;
    for (std::size_t k = 0; k < taps->size(); ++k) {
      const Tap& tp = (*taps)[k];
      const std::int64_t row = static_cast<std::int64_t>(k);
      double ddgx = 0.0, ddgy = 0.0;  // d(loss)/d(grid coords) for this tap
      for (std::int64_t c = 0; c < C; ++c) {
        const double g = n.grad(row, c);
        if (gu) {
          (*gu)(tp.r00, c) += g * (1 - tp.fy) * (1 - tp.fx);
          (*gu)(tp.r01, c) += g * (1 - tp.fy) * tp.fx;
          (*gu)(tp.r10, c) += g * tp.fy * (1 - tp.fx);
          (*gu)(tp.r11, c) += g * tp.fy * tp.fx;
        }
        if (gb) {
          const double v00 = u->val(tp.r00, c), v01 = u->val(tp.r01, c);
          const double v10 = u->val(tp.r10, c), v11 = u->val(tp.r11, c);
          ddgx += g * ((1 - tp.fy) * (v01 - v00) + tp.fy * (v11 - v10));
          ddgy += g * ((1 - tp.fx) * (v10 - v00) + tp.fx * (v11 - v01));
        }
      }
      if (gb) {
        (*gb)(0, 0) += ddgx * tp.dgx;
        (*gb)(0, 1) += ddgy * tp.dgy;
        (*gb)(0, 2) += ddgx * tp.dgx * tp.ddx;
        (*gb)(0, 3) += ddgy * tp.dgy * tp.ddy;
      }
    }
  });
}

ContentQueryGenerator::ContentQueryGenerator(ParamStore& store,
                                             const std::string& prefix,
                                             std::int64_t n, std::int64_t dim,
                                             std::int64_t bins,
                                             bool content_aware,
                                             RegionInit init, Rng& rng)
    : n_(n), dim_(dim), bins_(bins), content_aware_(content_aware) {
  if (content_aware_) {
    bank_ = QueryRegionBank(store, prefix + ".bank", n, init, rng);
    pool_proj_ = Linear(store, prefix + ".pool_proj", bins * bins * dim, dim,
                        rng);
    index_emb_ = Embedding(store, prefix + ".index", n, dim, rng);
  } else {
    agnostic_ = Embedding(store, prefix + ".agnostic", n, dim, rng);
  }
}

ContentQuerySet ContentQueryGenerator::generate(const FlatVideo& video) const {
  if (video.c != dim_)
    throw std::invalid_argument("generate_queries: dimension mismatch");
  ContentQuerySet qs;
  qs.t = video.t;
  qs.n = n_;
  qs.c = dim_;
  qs.content_aware = content_aware_;
  qs.region_of.resize(static_cast<std::size_t>(video.t * n_));
  for (std::int64_t t = 0; t < video.t; ++t)
    for (std::int64_t i = 0; i < n_; ++i)
      qs.region_of[static_cast<std::size_t>(t * n_ + i)] = i;

  if (!content_aware_) {
    std::vector<std::int64_t> all(static_cast<std::size_t>(n_));
    for (std::int64_t i = 0; i < n_; ++i) all[static_cast<std::size_t>(i)] = i;
    qs.q = ag::tile_rows(agnostic_.forward(all), video.t);
    return qs;
  }

  ag::Var boxes = bank_.boxes_var();
  std::vector<ag::Var> rows;
  rows.reserve(static_cast<std::size_t>(video.t * n_));
  for (std::int64_t t = 0; t < video.t; ++t) {
    for (std::int64_t i = 0; i < n_; ++i) {
      ag::Var pooled = roi_align(video.u, t, video.h, video.w,
                                 ag::slice_rows(boxes, i, 1), bins_);
      rows.push_back(ag::reshape(pooled, {1, bins_ * bins_ * dim_}));
    }
  }
  ag::Var q = pool_proj_.forward(ag::concat_rows(rows));
  std::vector<std::int64_t> idx(qs.region_of.begin(), qs.region_of.end());
  qs.q = ag::add(q, index_emb_.forward(idx));
  return qs;
}

}  // namespace contformer
