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

#include "contformer/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace contformer {

QueryDecoder::QueryDecoder(ParamStore& store, const std::string& prefix,
                           std::int64_t dim, std::int64_t layers,
                           std::int64_t heads, std::int64_t ffn_dim, Rng& rng)
    : dim_(dim) {
  for (std::int64_t i = 0; i < layers; ++i) {
    const std::string base = prefix + ".layer" + std::to_string(i);
    Layer l;
    l.ln_self = LayerNorm(store, base + ".ln_self", dim);
    l.ln_cross = LayerNorm(store, base + ".ln_cross", dim);
    l.ln_ffn = LayerNorm(store, base + ".ln_ffn", dim);
    l.self_attn = MultiHeadAttention(store, base + ".self", dim, heads, rng);
    l.cross_attn = MultiHeadAttention(store, base + ".cross", dim, heads, rng);
    l.ffn = FeedForward(store, base + ".ffn", dim, 4 * dim, rng);
    layers_.push_back(std::move(l));
  }
}

DecoderOutput QueryDecoder::decode(const FusedMemory& memory,
                                   const ContentQuerySet& queries) const {
  if (queries.c != dim_ || memory.c != dim_)
    throw std::invalid_argument("decode: dimension mismatch");
  const std::int64_t T = queries.t, N = queries.n;

  // The queries of every frame are identical in the content-agnostic case;
  // a fixed temporal encoding keeps frames distinguishable either way.
  ag::Var x = queries.q;
  {
    Tensor pe1 = sinusoid_1d(T, dim_);
    Tensor pe({T * N, dim_});
    for (std::int64_t t = 0; t < T; ++t)
      for (std::int64_t i = 0; i < N; ++i)
        for (std::int64_t c = 0; c < dim_; ++c) pe(t * N + i, c) = pe1(t, c);
    x = ag::add(x, ag::constant(std::move(pe)));
  }

  for (const Layer& layer : layers_) {
    // within-frame self-attention
    ag::Var normed = layer.ln_self.forward(x);
    std::vector<ag::Var> per_frame;
    per_frame.reserve(static_cast<std::size_t>(T));
    for (std::int64_t t = 0; t < T; ++t) {
      ag::Var slice = ag::slice_rows(normed, t * N, N);
      per_frame.push_back(layer.self_attn.forward(slice, slice));
    }
    x = ag::add(x, ag::concat_rows(per_frame));
    // global cross-attention over video + text memory
    ag::Var q2 = layer.ln_cross.forward(x);
    x = ag::add(x, layer.cross_attn.forward(q2, memory.h, &memory.mask));
    // feed-forward
    x = ag::add(x, layer.ffn.forward(layer.ln_ffn.forward(x)));
  }

  DecoderOutput out;
  out.p = x;
  out.t = T;
  out.n = N;
  out.c = dim_;
  return out;
}

PredictionHeads::PredictionHeads(ParamStore& store, const std::string& prefix,
                                 std::int64_t dim, BoxMode mode, Rng& rng)
    : mode_(mode),
      box1_(store, prefix + ".box1", dim, dim, rng),
      box2_(store, prefix + ".box2", dim, dim, rng),
      box3_(store, prefix + ".box3", dim, 4, rng),
      temporal_(store, prefix + ".temporal", dim, 2, rng),
      conf_(store, prefix + ".conf", dim, 1, rng) {}

Predictions PredictionHeads::predict_impl(const DecoderOutput& p,
                                          const ag::Var* raw_regions) const {
  ag::Var hidden = ag::relu(box2_.forward(ag::relu(box1_.forward(p.p))));
  ag::Var box_logits = box3_.forward(hidden);
  if (mode_ == BoxMode::kDelta) {
    if (raw_regions == nullptr)
      throw std::invalid_argument(
          "predict: delta box mode requires a region bank");
    // Zero MLP output decodes to the region box itself.
    box_logits = ag::add(box_logits, ag::tile_rows(*raw_regions, p.t));
  }
  Predictions out;
  out.boxes = ag::sigmoid(box_logits);
  out.temporal_logits = temporal_.forward(p.p);
  out.confidence = conf_.forward(p.p);
  out.t = p.t;
  out.n = p.n;
  return out;
}

Predictions PredictionHeads::predict(const DecoderOutput& p,
                                     const QueryRegionBank& bank) const {
  ag::Var raw = bank.params();
  return predict_impl(p, &raw);
}

Predictions PredictionHeads::predict(const DecoderOutput& p) const {
  if (mode_ == BoxMode::kDelta)
    throw std::invalid_argument("predict: delta box mode requires regions");
  return predict_impl(p, nullptr);
}

namespace {

std::vector<double> softmax_vec(const std::vector<double>& v) {
  double mx = v[0];
  for (double x : v) mx = std::max(mx, x);
  double z = 0.0;
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) z += std::exp(v[i] - mx);
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = std::exp(v[i] - mx) / z;
  return out;
}

std::int64_t argmax(const std::vector<double>& v) {
  std::int64_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[static_cast<std::size_t>(best)])
      best = static_cast<std::int64_t>(i);
  return best;
}

}  // namespace

TubeReadout assemble_tube(const Predictions& preds, bool trimmed) {
  const std::int64_t T = preds.t, N = preds.n;
  TubeReadout out;
  out.picked.resize(static_cast<std::size_t>(T));
  std::vector<geom::Box> frame_box(static_cast<std::size_t>(T));
  std::vector<double> start_logits(static_cast<std::size_t>(T));
  std::vector<double> end_logits(static_cast<std::size_t>(T));

  for (std::int64_t t = 0; t < T; ++t) {
    std::int64_t best = 0;
    for (std::int64_t i = 1; i < N; ++i)
      if (preds.confidence->val(preds.row(t, i), 0) >
          preds.confidence->val(preds.row(t, best), 0))
        best = i;
    out.picked[static_cast<std::size_t>(t)] = best;
    const std::int64_t r = preds.row(t, best);
    frame_box[static_cast<std::size_t>(t)] =
        geom::Box{preds.boxes->val(r, 0), preds.boxes->val(r, 1),
                  preds.boxes->val(r, 2), preds.boxes->val(r, 3)};
    start_logits[static_cast<std::size_t>(t)] =
        preds.temporal_logits->val(r, 0);
    end_logits[static_cast<std::size_t>(t)] = preds.temporal_logits->val(r, 1);
  }

  std::int64_t s = 0, e = T - 1;
  if (!trimmed) {
    out.start_dist = softmax_vec(start_logits);
    out.end_dist = softmax_vec(end_logits);
    s = argmax(out.start_dist);
    e = std::max(s, argmax(out.end_dist));
  }
  std::map<std::int64_t, geom::Box> keyed;
  for (std::int64_t t = s; t <= e; ++t)
    keyed[t] = frame_box[static_cast<std::size_t>(t)];
  out.tube = geom::Tube({s, e}, std::move(keyed));
  return out;
}

}  // namespace contformer
