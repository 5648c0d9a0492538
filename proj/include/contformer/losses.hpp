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

#ifndef CONTFORMER_LOSSES_HPP_
#define CONTFORMER_LOSSES_HPP_

#include <cstdint>
#include <map>
#include <vector>

#include "contformer/autograd.hpp"
#include "contformer/data.hpp"
#include "contformer/decoder.hpp"
#include "contformer/geometry.hpp"
#include "contformer/tensor.hpp"

namespace contformer {

struct LossWeights {
  double giou = 2.0;
  double l1 = 5.0;
  double kl = 5.0;
  double entity = 1.0;
  double tau = 0.07;
  bool background = true;     // no-object supervision for unmatched queries
  double time_smoothing = 0.0;  // Gaussian sigma on start/end targets, frames
};

struct LossReport {
  double total = 0.0;
  double match = 0.0;
  double giou_part = 0.0;
  double l1_part = 0.0;
  double time_part = 0.0;
  double entity_part = 0.0;
  LossWeights weights;
};

struct LossBundle {
  ag::Var total;  // 1 x 1
  LossReport report;
};

// 1 - GIoU between the predicted box (1 x 4 normalized cx,cy,w,h) and a
// fixed ground-truth box, with an analytic gradient.
ag::Var giou_loss(const ag::Var& box, const geom::Box& gt);

// lambda_giou * (1 - GIoU) + lambda_l1 * ||b - bhat||_1.
ag::Var loss_box(const ag::Var& box, const geom::Box& gt,
                 const LossWeights& w);

// One-hot start/end targets (optionally Gaussian-smoothed, renormalized) for
// a span inside [0, frames).
Tensor temporal_target(std::int64_t frame, std::int64_t frames, double sigma);

// lambda_kl * [KL(target_s || pred_s) + KL(target_e || pred_e)]. The
// predictions are probability rows (1 x T) summing to 1.
ag::Var loss_time(const ag::Var& start_dist, const ag::Var& end_dist,
                  const geom::TemporalSpan& span, const LossWeights& w);

// InfoNCE over words: the anchor must select the positive words of its
// entity span out of all unpadded words. anchor is 1 x C, text L x C;
// similarities are cosine, divided by tau.
ag::Var loss_entity(const ag::Var& anchor, const ag::Var& text,
                    const std::vector<std::int64_t>& positive_words,
                    const std::vector<std::uint8_t>& text_mask, double tau);

// Per-query matching cost at one frame: -log sigma(c_i) + box cost
// (+ per-slot temporal cost when spans are supplied). Plain doubles, no tape.
// Returns N x K for K ground-truth boxes. `frames` restricts the temporal
// distributions to the first real frames of a padded clip; -1 uses preds.t.
Tensor match_cost(const Predictions& preds, std::int64_t frame,
                  const std::vector<geom::Box>& gt_boxes,
                  const std::vector<const geom::TemporalSpan*>& gt_spans,
                  const LossWeights& w, std::int64_t frames = -1);

struct MatchResult {
  // assignment[k] = query index matched to ground-truth k
  std::vector<std::int64_t> assignment;
  double cost = 0.0;
  Tensor cost_matrix;  // N x K, retained for inspection
};

// Optimal assignment of K ground truths to N queries (N >= K). Single truth
// reduces to the cost argmin. Ties resolve to the lexicographically smallest
// assignment vector.
MatchResult assign(const Tensor& cost_matrix);

// Hungarian optimum value only (shortest augmenting path), used by assign.
double hungarian_cost(const Tensor& cost_matrix);

// The complete objective on one sample. `anchors` supplies the entity-space
// projection of each decoded query row ((T*N) x C) or is null when the
// entity term is disabled.
struct SampleLossInputs {
  const Predictions* preds = nullptr;
  const ag::Var* anchors = nullptr;        // projected, (T*N) x C
  const ag::Var* text = nullptr;           // H^Y, L x C
  const std::vector<std::uint8_t>* text_mask = nullptr;
  const data::GroundingSample* sample = nullptr;
};

LossBundle loss_total(const SampleLossInputs& in, const LossWeights& w,
                      std::map<std::int64_t, std::vector<std::int64_t>>*
                          matched_out = nullptr);

}  // namespace contformer

#endif  // CONTFORMER_LOSSES_HPP_
