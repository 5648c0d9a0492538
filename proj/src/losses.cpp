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

#include "contformer/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace contformer {

namespace {

double stable_softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// -log sigma(c) without cancellation.
double neg_log_sigmoid(double c) { return stable_softplus(-c); }

ag::Var add_terms(const std::vector<ag::Var>& terms) {
  if (terms.empty()) return ag::constant(Tensor::scalar(0.0));
  ag::Var acc = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) acc = ag::add(acc, terms[i]);
  return acc;
}

}  // namespace

ag::Var giou_loss(const ag::Var& box, const geom::Box& gt) {
  if (box->val.rows() != 1 || box->val.cols() != 4)
    throw std::invalid_argument("giou_loss: box must be 1 x 4");
  const double cx = box->val(0, 0), cy = box->val(0, 1);
  const double w = box->val(0, 2), h = box->val(0, 3);
  const double ax1 = cx - w / 2, ax2 = cx + w / 2;
  const double ay1 = cy - h / 2, ay2 = cy + h / 2;
  const double bx1 = gt.x1(), bx2 = gt.x2(), by1 = gt.y1(), by2 = gt.y2();

  const double ix1 = std::max(ax1, bx1), ix2 = std::min(ax2, bx2);
  const double iy1 = std::max(ay1, by1), iy2 = std::min(ay2, by2);
  const double iw = std::max(0.0, ix2 - ix1), ih = std::max(0.0, iy2 - iy1);
  const double inter = iw * ih;
  const double uni = w * h + gt.w * gt.h - inter;
  const double ex = std::max(ax2, bx2) - std::min(ax1, bx1);
  const double ey = std::max(ay2, by2) - std::min(ay1, by1);
  const double enc = ex * ey;
  if (uni <= 0.0 || enc <= 0.0)
    throw std::invalid_argument("giou_loss: degenerate boxes");
  const double giou = inter / uni - (enc - uni) / enc;

  // Subgradients of the min/max edge selections, in box-corner space.
  const double dIdax1 = (iw > 0 && ih > 0 && ax1 > bx1) ? -ih : 0.0;
  const double dIdax2 = (iw > 0 && ih > 0 && ax2 < bx2) ? ih : 0.0;
  const double dIday1 = (iw > 0 && ih > 0 && ay1 > by1) ? -iw : 0.0;
  const double dIday2 = (iw > 0 && ih > 0 && ay2 < by2) ? iw : 0.0;
  const double dExdax1 = (ax1 < bx1) ? -1.0 : 0.0;
  const double dExdax2 = (ax2 > bx2) ? 1.0 : 0.0;
  const double dEyday1 = (ay1 < by1) ? -1.0 : 0.0;
  const double dEyday2 = (ay2 > by2) ? 1.0 : 0.0;

  // Corner derivatives to (cx, cy, w, h): x1 = cx - w/2, x2 = cx + w/2.
  const double dIdcx = dIdax1 + dIdax2;
  const double dIdcy = dIday1 + dIday2;
  const double dIdw = -0.5 * dIdax1 + 0.5 * dIdax2;
  const double dIdh = -0.5 * dIday1 + 0.5 * dIday2;
  // U = w*h + const - I
  const double dUdcx = -dIdcx, dUdcy = -dIdcy;
  const double dUdw = h - dIdw, dUdh = w - dIdh;
  const double dEdcx = (dExdax1 + dExdax2) * ey;
  const double dEdcy = (dEyday1 + dEyday2) * ex;
  const double dEdw = (-0.5 * dExdax1 + 0.5 * dExdax2) * ey;
  const double dEdh = (-0.5 * dEyday1 + 0.5 * dEyday2) * ex;

  // d/dp [I/U] = (I' U - I U') / U^2 ; d/dp [(E-U)/E] = (U E' - E U') / E^2.
  auto dgiou = [&](double dI, double dU, double dE) {
    return (dI * uni - inter * dU) / (uni * uni) -
           (uni * dE - enc * dU) / (enc * enc);
  };
  Tensor grad({1, 4});
  grad(0, 0) = -dgiou(dIdcx, dUdcx, dEdcx);
  grad(0, 1) = -dgiou(dIdcy, dUdcy, dEdcy);
  grad(0, 2) = -dgiou(dIdw, dUdw, dEdw);
  grad(0, 3) = -dgiou(dIdh, dUdh, dEdh);

  auto gshared = std::make_shared<Tensor>(std::move(grad));
  return ag::make_node(Tensor::scalar(1.0 - giou), {box},
                       [box, gshared](ag::Node& n) {
                         Tensor& g = box->ensure_grad();
                         const double up = n.grad[0];
                         for (int k = 0; k < 4; ++k)
                           g(0, k) += up * (*gshared)[k];
                       });
}

ag::Var loss_box(const ag::Var& box, const geom::Box& gt,
                 const LossWeights& w) {
  Tensor gtrow({1, 4});
  gtrow(0, 0) = gt.cx;
  gtrow(0, 1) = gt.cy;
  gtrow(0, 2) = gt.w;
  gtrow(0, 3) = gt.h;
  ag::Var l1 = ag::sum_all(ag::abs_(ag::sub(box, ag::constant(gtrow))));
  return ag::add(ag::scale(giou_loss(box, gt), w.giou), ag::scale(l1, w.l1));
}

Tensor temporal_target(std::int64_t frame, std::int64_t frames, double sigma) {
  if (frame < 0 || frame >= frames)
    throw std::invalid_argument("temporal_target: frame outside video");
  Tensor q({1, frames});
  if (sigma <= 0.0) {
    q(0, frame) = 1.0;
    return q;
  }
  double z = 0.0;
  for (std::int64_t t = 0; t < frames; ++t) {
    const double d = static_cast<double>(t - frame) / sigma;
    q(0, t) = std::exp(-0.5 * d * d);
    z += q(0, t);
  }
  for (std::int64_t t = 0; t < frames; ++t) q(0, t) /= z;
  return q;
}

namespace {

// KL(q || p) with fixed q, evaluated only on q's support so an exact one-hot
// match stays finite.
ag::Var kl_to_target(const Tensor& q, const ag::Var& p) {
  if (p->val.rows() != 1 || !p->val.same_shape(q))
    throw std::invalid_argument("loss_time: distribution shape mismatch");
  double sum = 0.0;
  for (std::int64_t t = 0; t < p->val.cols(); ++t) sum += p->val(0, t);
  if (std::fabs(sum - 1.0) > 1e-6)
    throw std::invalid_argument("loss_time: prediction does not sum to 1");
  std::vector<std::pair<std::int64_t, std::int64_t>> support;
  double entropy_term = 0.0;  // sum q log q
  std::vector<double> qs;
  for (std::int64_t t = 0; t < q.cols(); ++t) {
    if (q(0, t) > 0.0) {
      support.push_back({0, t});
      qs.push_back(q(0, t));
      entropy_term += q(0, t) * std::log(q(0, t));
    }
  }
  Tensor qrow({1, static_cast<std::int64_t>(qs.size())});
  for (std::size_t i = 0; i < qs.size(); ++i)
    qrow[static_cast<std::int64_t>(i)] = qs[i];
  ag::Var cross =
      ag::sum_all(ag::mul(ag::constant(qrow),
                          ag::log_(ag::gather_elems(p, support))));
  return ag::add_scalar(ag::neg(cross), entropy_term);
}

}  // namespace

ag::Var loss_time(const ag::Var& start_dist, const ag::Var& end_dist,
                  const geom::TemporalSpan& span, const LossWeights& w) {
  const std::int64_t T = start_dist->val.cols();
  Tensor qs = temporal_target(span.start_frame, T, w.time_smoothing);
  Tensor qe = temporal_target(span.end_frame, T, w.time_smoothing);
  return ag::scale(
      ag::add(kl_to_target(qs, start_dist), kl_to_target(qe, end_dist)), w.kl);
}

ag::Var loss_entity(const ag::Var& anchor, const ag::Var& text,
                    const std::vector<std::int64_t>& positive_words,
                    const std::vector<std::uint8_t>& text_mask, double tau) {
  if (positive_words.empty())
    throw std::invalid_argument("loss_entity: no positive words");
  const std::int64_t L = text->val.rows();
  if (static_cast<std::int64_t>(text_mask.size()) != L)
    throw std::invalid_argument("loss_entity: mask length mismatch");
  for (std::int64_t wd : positive_words)
    if (wd < 0 || wd >= L || !text_mask[static_cast<std::size_t>(wd)])
      throw std::invalid_argument("loss_entity: positive word out of range");

  ag::Var sims = ag::matmul_nt(ag::l2_normalize_rows(anchor),
                               ag::l2_normalize_rows(text));
  ag::Var logp = ag::log_softmax_rows(ag::scale(sims, 1.0 / tau), &text_mask);
  std::vector<std::pair<std::int64_t, std::int64_t>> picks;
  picks.reserve(positive_words.size());
  for (std::int64_t wd : positive_words) picks.push_back({0, wd});
  return ag::neg(ag::mean_all(ag::gather_elems(logp, picks)));
}

// ---------------------------------------------------------------------------
// matching

Tensor match_cost(const Predictions& preds, std::int64_t frame,
                  const std::vector<geom::Box>& gt_boxes,
                  const std::vector<const geom::TemporalSpan*>& gt_spans,
                  const LossWeights& w, std::int64_t frames) {
  const std::int64_t N = preds.n;
  const std::int64_t T = frames > 0 ? frames : preds.t;
  if (T > preds.t)
    throw std::invalid_argument("match_cost: frames exceeds prediction length");
  const std::int64_t K = static_cast<std::int64_t>(gt_boxes.size());
  if (K < 1) throw std::invalid_argument("match_cost: no ground truth");
  if (!gt_spans.empty() && static_cast<std::int64_t>(gt_spans.size()) != K)
    throw std::invalid_argument("match_cost: span/box count mismatch");

  // Temporal cost per (query slot, target): the slot's start/end logits over
  // all frames form its span distribution.
  Tensor time_cost({N, K});
  if (!gt_spans.empty()) {
    for (std::int64_t i = 0; i < N; ++i) {
      std::vector<double> sl(static_cast<std::size_t>(T)),
          el(static_cast<std::size_t>(T));
      for (std::int64_t t = 0; t < T; ++t) {
        sl[static_cast<std::size_t>(t)] =
            preds.temporal_logits->val(preds.row(t, i), 0);
        el[static_cast<std::size_t>(t)] =
            preds.temporal_logits->val(preds.row(t, i), 1);
      }
      auto log_softmax = [T](const std::vector<double>& v) {
        double mx = *std::max_element(v.begin(), v.end());
        double z = 0.0;
        for (double x : v) z += std::exp(x - mx);
        const double logz = std::log(z) + mx;
        std::vector<double> out(static_cast<std::size_t>(T));
        for (std::size_t j = 0; j < v.size(); ++j) out[j] = v[j] - logz;
        return out;
      };
      const auto lps = log_softmax(sl), lpe = log_softmax(el);
      for (std::int64_t k = 0; k < K; ++k) {
        const auto* span = gt_spans[static_cast<std::size_t>(k)];
        if (span == nullptr) continue;
        Tensor qs = temporal_target(span->start_frame, T, w.time_smoothing);
        Tensor qe = temporal_target(span->end_frame, T, w.time_smoothing);
        double kl = 0.0;
        for (std::int64_t t = 0; t < T; ++t) {
          if (qs(0, t) > 0)
            kl += qs(0, t) * (std::log(qs(0, t)) -
                              lps[static_cast<std::size_t>(t)]);
          if (qe(0, t) > 0)
            kl += qe(0, t) * (std::log(qe(0, t)) -
                              lpe[static_cast<std::size_t>(t)]);
        }
        time_cost(i, k) = w.kl * kl;
      }
    }
  }

  Tensor cost({N, K});
  for (std::int64_t i = 0; i < N; ++i) {
    const std::int64_t r = preds.row(frame, i);
    const geom::Box bi{preds.boxes->val(r, 0), preds.boxes->val(r, 1),
                       preds.boxes->val(r, 2), preds.boxes->val(r, 3)};
    const double conf = neg_log_sigmoid(preds.confidence->val(r, 0));
    for (std::int64_t k = 0; k < K; ++k) {
      const geom::Box& gt = gt_boxes[static_cast<std::size_t>(k)];
      const double l1 = std::fabs(bi.cx - gt.cx) + std::fabs(bi.cy - gt.cy) +
                        std::fabs(bi.w - gt.w) + std::fabs(bi.h - gt.h);
      cost(i, k) = conf + w.giou * (1.0 - geom::box_giou(bi, gt)) +
                   w.l1 * l1 + time_cost(i, k);
    }
  }
  return cost;
}

double hungarian_cost(const Tensor& cost_matrix) {
  const std::int64_t N = cost_matrix.rows(), K = cost_matrix.cols();
  if (K > N) throw std::invalid_argument("hungarian: more targets than slots");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // Shortest-augmenting-path assignment with potentials; targets are rows of
  // the dual, queries are columns.
  std::vector<double> u(static_cast<std::size_t>(K + 1), 0.0);
  std::vector<double> v(static_cast<std::size_t>(N + 1), 0.0);
  std::vector<std::int64_t> p(static_cast<std::size_t>(N + 1), 0);
  std::vector<std::int64_t> way(static_cast<std::size_t>(N + 1), 0);
  for (std::int64_t i = 1; i <= K; ++i) {
    p[0] = i;
    std::int64_t j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(N + 1), kInf);
    std::vector<char> used(static_cast<std::size_t>(N + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const std::int64_t i0 = p[static_cast<std::size_t>(j0)];
      std::int64_t j1 = -1;
      double delta = kInf;
      for (std::int64_t j = 1; j <= N; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost_matrix(j - 1, i0 - 1) -
                           u[static_cast<std::size_t>(i0)] -
                           v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (std::int64_t j = 0; j <= N; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const std::int64_t j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (std::int64_t j = 1; j <= N; ++j)
    if (p[static_cast<std::size_t>(j)] != 0)
      total += cost_matrix(j - 1, p[static_cast<std::size_t>(j)] - 1);
  return total;
}

MatchResult assign(const Tensor& cost_matrix) {
  const std::int64_t N = cost_matrix.rows(), K = cost_matrix.cols();
  if (K > N) throw std::invalid_argument("assign: more targets than queries");
  MatchResult res;
  res.cost_matrix = cost_matrix;
  res.assignment.assign(static_cast<std::size_t>(K), -1);

  if (K == 1) {
    std::int64_t best = 0;
    for (std::int64_t i = 1; i < N; ++i)
      if (cost_matrix(i, 0) < cost_matrix(best, 0)) best = i;
    res.assignment[0] = best;
    res.cost = cost_matrix(best, 0);
    return res;
  }

  const double optimal = hungarian_cost(cost_matrix);
  constexpr double kTieTol = 1e-9;
  // Fix targets in order to the smallest query index that still permits an
  // optimal completion; this realizes the lexicographic tie rule.
  std::vector<char> used(static_cast<std::size_t>(N), 0);
  double fixed_cost = 0.0;
  for (std::int64_t k = 0; k < K; ++k) {
    for (std::int64_t q = 0; q < N; ++q) {
      if (used[static_cast<std::size_t>(q)]) continue;
      // cost of the remaining (K - k - 1) targets over the remaining queries
      std::vector<std::int64_t> rq, rk;
      for (std::int64_t j = 0; j < N; ++j)
        if (!used[static_cast<std::size_t>(j)] && j != q) rq.push_back(j);
      for (std::int64_t kk = k + 1; kk < K; ++kk) rk.push_back(kk);
      Tensor sub({static_cast<std::int64_t>(rq.size()),
                  std::max<std::int64_t>(1, static_cast<std::int64_t>(
                                                rk.size()))});
      for (std::size_t a = 0; a < rq.size(); ++a)
        for (std::size_t b = 0; b < rk.size(); ++b)
          sub(static_cast<std::int64_t>(a), static_cast<std::int64_t>(b)) =
              cost_matrix(rq[a], rk[b]);
      const double rest = rk.empty() ? 0.0 : hungarian_cost(sub);
      if (fixed_cost + cost_matrix(q, k) + rest <= optimal + kTieTol) {
        res.assignment[static_cast<std::size_t>(k)] = q;
        used[static_cast<std::size_t>(q)] = 1;
        fixed_cost += cost_matrix(q, k);
        break;
      }
    }
    if (res.assignment[static_cast<std::size_t>(k)] < 0)
      throw std::logic_error("assign: failed to reconstruct assignment");
  }
  res.cost = fixed_cost;
  return res;
}

// ---------------------------------------------------------------------------
// full objective

LossBundle loss_total(const SampleLossInputs& in, const LossWeights& w,
                      std::map<std::int64_t, std::vector<std::int64_t>>*
                          matched_out) {
  const Predictions& preds = *in.preds;
  const data::GroundingSample& s = *in.sample;
  const std::int64_t N = preds.n;
  // Padded frames carry no supervision and no temporal probability mass, so
  // a padded batch reproduces the per-sample loss exactly.
  const std::int64_t T = std::min<std::int64_t>(preds.t, s.num_frames());
  const geom::TemporalSpan span = s.gt_tube.span();
  const bool untrimmed = !s.trimmed;

  // Matching runs outside the tape.
  std::map<std::int64_t, std::vector<std::int64_t>> matches;
  {
    ag::NoGradGuard ng;
    for (std::int64_t t = span.start_frame; t <= span.end_frame; ++t) {
      std::vector<geom::Box> gts = {*s.gt_tube.box_at(t)};
      std::vector<const geom::TemporalSpan*> spans;
      if (untrimmed) spans.push_back(&span);
      Tensor cost = match_cost(preds, t, gts, spans, w, T);
      matches[t] = assign(cost).assignment;
    }
  }
  if (matched_out != nullptr) *matched_out = matches;

  // Per-slot temporal distributions are shared by every frame matched to the
  // same slot.
  std::map<std::int64_t, ag::Var> slot_time;
  auto slot_time_loss = [&](std::int64_t slot) {
    auto it = slot_time.find(slot);
    if (it != slot_time.end()) return it->second;
    std::vector<std::int64_t> rows(static_cast<std::size_t>(T));
    for (std::int64_t t = 0; t < T; ++t)
      rows[static_cast<std::size_t>(t)] = preds.row(t, slot);
    ag::Var track = ag::gather_rows(preds.temporal_logits, rows);  // T x 2
    ag::Var sd = ag::softmax_rows(
        ag::reshape(ag::slice_cols(track, 0, 1), {1, T}));
    ag::Var ed = ag::softmax_rows(
        ag::reshape(ag::slice_cols(track, 1, 1), {1, T}));
    ag::Var lt = loss_time(sd, ed, span, w);
    slot_time.emplace(slot, lt);
    return lt;
  };

  std::vector<ag::Var> frame_terms;
  std::vector<ag::Var> entity_terms;
  double giou_part = 0.0, l1_part = 0.0, time_part = 0.0;

  for (std::int64_t t = span.start_frame; t <= span.end_frame; ++t) {
    const std::vector<std::int64_t>& a = matches[t];
    const geom::Box gt = *s.gt_tube.box_at(t);
    std::vector<ag::Var> parts;
    std::vector<char> is_matched(static_cast<std::size_t>(N), 0);
    for (std::size_t k = 0; k < a.size(); ++k) {
      const std::int64_t slot = a[k];
      is_matched[static_cast<std::size_t>(slot)] = 1;
      const std::int64_t r = preds.row(t, slot);
      ag::Var conf = ag::slice_rows(preds.confidence, r, 1);
      parts.push_back(ag::softplus(ag::neg(conf)));  // -log sigma(c)
      ag::Var bvar = ag::slice_rows(preds.boxes, r, 1);
      ag::Var gl = ag::scale(giou_loss(bvar, gt), w.giou);
      Tensor gtrow({1, 4});
      gtrow(0, 0) = gt.cx;
      gtrow(0, 1) = gt.cy;
      gtrow(0, 2) = gt.w;
      gtrow(0, 3) = gt.h;
      ag::Var l1 = ag::scale(
          ag::sum_all(ag::abs_(ag::sub(bvar, ag::constant(gtrow)))), w.l1);
      giou_part += gl->val[0];
      l1_part += l1->val[0];
      parts.push_back(gl);
      parts.push_back(l1);
      if (untrimmed) {
        ag::Var lt = slot_time_loss(slot);
        time_part += lt->val[0];
        parts.push_back(lt);
      }
      if (in.anchors != nullptr && !s.entity_spans.empty()) {
        for (const auto& es : s.entity_spans) {
          std::vector<std::int64_t> positives;
          for (int wd = es.word_start; wd <= es.word_end; ++wd)
            positives.push_back(wd);
          entity_terms.push_back(
              loss_entity(ag::slice_rows(*in.anchors, r, 1), *in.text,
                          positives, *in.text_mask, w.tau));
        }
      }
    }
    if (w.background) {
      std::vector<ag::Var> bg;
      for (std::int64_t i = 0; i < N; ++i) {
        if (is_matched[static_cast<std::size_t>(i)]) continue;
        ag::Var c = ag::slice_rows(preds.confidence, preds.row(t, i), 1);
        bg.push_back(ag::softplus(c));  // -log(1 - sigma(c))
      }
      if (!bg.empty())
        parts.push_back(
            ag::scale(add_terms(bg), 1.0 / static_cast<double>(bg.size())));
    }
    frame_terms.push_back(add_terms(parts));
  }

  // Confidence on frames outside the span is otherwise untrained; keep the
  // background signal there for untrimmed videos so readout stays sane.
  if (untrimmed && w.background) {
    for (std::int64_t t = 0; t < T; ++t) {
      if (t >= span.start_frame && t <= span.end_frame) continue;
      std::vector<ag::Var> bg;
      for (std::int64_t i = 0; i < N; ++i)
        bg.push_back(ag::softplus(
            ag::slice_rows(preds.confidence, preds.row(t, i), 1)));
      frame_terms.push_back(
          ag::scale(add_terms(bg), 1.0 / static_cast<double>(N)));
    }
  }

  ag::Var match = ag::scale(add_terms(frame_terms),
                            1.0 / static_cast<double>(frame_terms.size()));
  ag::Var entity = entity_terms.empty()
                       ? ag::constant(Tensor::scalar(0.0))
                       : ag::scale(add_terms(entity_terms),
                                   1.0 / static_cast<double>(
                                             entity_terms.size()));
  ag::Var total = ag::add(match, ag::scale(entity, w.entity));

  const double frames = static_cast<double>(
      span.end_frame - span.start_frame + 1);
  LossBundle out;
  out.total = total;
  out.report.weights = w;
  out.report.total = total->val[0];
  out.report.match = match->val[0];
  out.report.entity_part = entity->val[0];
  out.report.giou_part = giou_part / frames;
  out.report.l1_part = l1_part / frames;
  out.report.time_part = time_part / frames;
  return out;
}

}  // namespace contformer
