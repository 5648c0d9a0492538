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

#pragma once

#include <cstdint>
#include <map>
#include <vector>

namespace contformer::geom {

// Normalized center/size box over the [0,1] x [0,1] image frame.
struct Box {
  double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;

  double x1() const { return cx - 0.5 * w; }
  double y1() const { return cy - 0.5 * h; }
  double x2() const { return cx + 0.5 * w; }
  double y2() const { return cy + 0.5 * h; }
  double area() const { return w * h; }
  bool valid() const { return w >= 0.0 && h >= 0.0; }

  static Box from_corners(double x1, double y1, double x2, double y2) {
    return Box{0.5 * (x1 + x2), 0.5 * (y1 + y2), x2 - x1, y2 - y1};
  }
};

// Inclusive frame-index interval.
struct TemporalSpan {
  std::int64_t start_frame = 0;
  std::int64_t end_frame = 0;

  std::int64_t length() const { return end_frame - start_frame + 1; }
  bool contains(std::int64_t t) const {
    return t >= start_frame && t <= end_frame;
  }
  bool valid() const { return start_frame >= 0 && start_frame <= end_frame; }
};

// A temporal span plus one box per frame inside it.
class Tube {
 public:
  Tube() = default;
  // Throws if the keyed frame set is not exactly the span's frame range or a
  // box violates its invariants.
  Tube(TemporalSpan span, std::map<std::int64_t, Box> boxes);

  const TemporalSpan& span() const { return span_; }
  const std::map<std::int64_t, Box>& boxes() const { return boxes_; }
  const Box* box_at(std::int64_t frame) const;

 private:
  TemporalSpan span_;
  std::map<std::int64_t, Box> boxes_;
};

// Dataset-level metric aggregate.
struct MetricReport {
  std::map<double, double> accuracy_at;    // eta -> fraction
  std::map<double, double> viou_at;        // theta -> fraction
  double m_iou = 0.0;                      // mean per-frame IoU over GT frames
  double m_tiou = 0.0;
  double m_viou = 0.0;
  std::int64_t sample_count = 0;
  std::int64_t frame_count = 0;            // annotated frames seen
  bool degenerate_seen = false;            // any zero-area warning fired
};

// Intermediates shared by the metric and the differentiable loss path.
struct GiouParts {
  double inter = 0.0, uni = 0.0, encl = 0.0;
  double iou = 0.0, giou = 0.0;
  bool degenerate = false;  // union or enclosing area was zero
};

GiouParts giou_parts(const Box& a, const Box& b);

// IoU of two boxes; zero-area pairs yield 0 and set *degenerate when given.
double box_iou(const Box& a, const Box& b, bool* degenerate = nullptr);

// Generalized IoU in (-1, 1]: IoU - (enclosing - union) / enclosing.
double box_giou(const Box& a, const Box& b, bool* degenerate = nullptr);

// |intersection| / |union| on inclusive frame sets.
double temporal_iou(const TemporalSpan& a, const TemporalSpan& b);

// (1/|S_U|) * sum over S_I of per-frame IoU, with S_I / S_U the frame-set
// intersection / union of the two tubes.
double viou(const Tube& pred, const Tube& gt, bool* degenerate = nullptr);

// Fraction of values strictly greater than eta.
double accuracy_at(const std::vector<double>& per_frame_ious, double eta);

enum class AccuracyMode { kPerFrame, kPerVideo };

MetricReport aggregate(const std::vector<std::pair<Tube, Tube>>& pred_gt,
                       const std::vector<double>& eta_thresholds,
                       const std::vector<double>& theta_thresholds,
                       AccuracyMode mode = AccuracyMode::kPerFrame);

}  // namespace contformer::geom
