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

#include "contformer/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace contformer::geom {

Tube::Tube(TemporalSpan span, std::map<std::int64_t, Box> boxes)
    : span_(span), boxes_(std::move(boxes)) {
  if (!span_.valid()) throw std::invalid_argument("Tube: invalid span");
  if (static_cast<std::int64_t>(boxes_.size()) != span_.length())
    throw std::invalid_argument("Tube: keyed frames != span length");
  for (const auto& [t, b] : boxes_) {
    if (!span_.contains(t))
      throw std::invalid_argument("Tube: frame " + std::to_string(t) +
                                  " outside span");
    if (!b.valid())
      throw std::invalid_argument("Tube: invalid box at frame " +
                                  std::to_string(t));
  }
}

const Box* Tube::box_at(std::int64_t frame) const {
  auto it = boxes_.find(frame);
  return it == boxes_.end() ? nullptr : &it->second;
}

GiouParts giou_parts(const Box& a, const Box& b) {
  GiouParts p;
  const double ix1 = std::max(a.x1(), b.x1());
  const double iy1 = std::max(a.y1(), b.y1());
  const double ix2 = std::min(a.x2(), b.x2());
  const double iy2 = std::min(a.y2(), b.y2());
  p.inter = std::max(0.0, ix2 - ix1) * std::max(0.0, iy2 - iy1);
  p.uni = a.area() + b.area() - p.inter;
  const double ex1 = std::min(a.x1(), b.x1());
  const double ey1 = std::min(a.y1(), b.y1());
  const double ex2 = std::max(a.x2(), b.x2());
  const double ey2 = std::max(a.y2(), b.y2());
  p.encl = (ex2 - ex1) * (ey2 - ey1);
  if (p.uni <= 0.0) {
    p.degenerate = true;
    p.iou = 0.0;
  } else {
    p.iou = p.inter / p.uni;
  }
  if (p.encl <= 0.0) {
    p.degenerate = true;
    p.giou = 0.0;
  } else if (p.uni <= 0.0) {
    p.giou = 0.0;
  } else {
    p.giou = p.iou - (p.encl - p.uni) / p.encl;
  }
  return p;
}

double box_iou(const Box& a, const Box& b, bool* degenerate) {
  const GiouParts p = giou_parts(a, b);
  if (degenerate && p.uni <= 0.0) *degenerate = true;
  return p.iou;
}

double box_giou(const Box& a, const Box& b, bool* degenerate) {
  const GiouParts p = giou_parts(a, b);
  if (degenerate && p.degenerate) *degenerate = true;
  return p.giou;
}

double temporal_iou(const TemporalSpan& a, const TemporalSpan& b) {
  const std::int64_t is = std::max(a.start_frame, b.start_frame);
  const std::int64_t ie = std::min(a.end_frame, b.end_frame);
  const std::int64_t inter = std::max<std::int64_t>(0, ie - is + 1);
  const std::int64_t uni = a.length() + b.length() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double viou(const Tube& pred, const Tube& gt, bool* degenerate) {
  const auto& ps = pred.span();
  const auto& gs = gt.span();
  const std::int64_t is = std::max(ps.start_frame, gs.start_frame);
  const std::int64_t ie = std::min(ps.end_frame, gs.end_frame);
  const std::int64_t inter = std::max<std::int64_t>(0, ie - is + 1);
  const std::int64_t uni = ps.length() + gs.length() - inter;
  if (uni == 0) return 0.0;
  double acc = 0.0;
  for (std::int64_t t = is; t <= ie; ++t) {
    const Box* pb = pred.box_at(t);
    const Box* gb = gt.box_at(t);
    if (pb && gb) acc += box_iou(*pb, *gb, degenerate);
  }
  return acc / static_cast<double>(uni);
}

double accuracy_at(const std::vector<double>& per_frame_ious, double eta) {
  if (per_frame_ious.empty()) return 0.0;
  std::int64_t hits = 0;
  for (double r : per_frame_ious)
    if (r > eta) ++hits;  // strict, ties count as incorrect
  return static_cast<double>(hits) /
         static_cast<double>(per_frame_ious.size());
}

MetricReport aggregate(const std::vector<std::pair<Tube, Tube>>& pred_gt,
                       const std::vector<double>& eta_thresholds,
                       const std::vector<double>& theta_thresholds,
                       AccuracyMode mode) {
  if (pred_gt.empty())
    throw std::invalid_argument("aggregate: no samples");
  MetricReport rep;
  rep.sample_count = static_cast<std::int64_t>(pred_gt.size());

  std::vector<double> pooled_ious;        // per annotated frame, all samples
  std::vector<std::vector<double>> per_video_ious;
  double sum_tiou = 0.0, sum_viou = 0.0;
  std::vector<double> vious;
  for (const auto& [pred, gt] : pred_gt) {
    std::vector<double> frame_ious;
    for (const auto& [t, gb] : gt.boxes()) {
      const Box* pb = pred.box_at(t);
      double r = 0.0;
      if (pb) {
        bool degen = false;
        r = box_iou(*pb, gb, &degen);
        rep.degenerate_seen = rep.degenerate_seen || degen;
      }
      frame_ious.push_back(r);
      pooled_ious.push_back(r);
    }
    per_video_ious.push_back(std::move(frame_ious));
    sum_tiou += temporal_iou(pred.span(), gt.span());
    bool degen = false;
    const double v = viou(pred, gt, &degen);
    rep.degenerate_seen = rep.degenerate_seen || degen;
    sum_viou += v;
    vious.push_back(v);
  }

  rep.frame_count = static_cast<std::int64_t>(pooled_ious.size());
  double iou_sum = 0.0;
  for (double r : pooled_ious) iou_sum += r;
  rep.m_iou = pooled_ious.empty() ? 0.0 : iou_sum / rep.frame_count;
  rep.m_tiou = sum_tiou / rep.sample_count;
  rep.m_viou = sum_viou / rep.sample_count;

  for (double eta : eta_thresholds) {
    if (mode == AccuracyMode::kPerFrame) {
      rep.accuracy_at[eta] = accuracy_at(pooled_ious, eta);
    } else {
      double acc = 0.0;
      for (const auto& v : per_video_ious) acc += accuracy_at(v, eta);
      rep.accuracy_at[eta] = acc / rep.sample_count;
    }
  }
  for (double theta : theta_thresholds) {
    std::int64_t hits = 0;
    for (double v : vious)
      if (v > theta) ++hits;
    rep.viou_at[theta] = static_cast<double>(hits) / rep.sample_count;
  }
  return rep;
}

}  // namespace contformer::geom
