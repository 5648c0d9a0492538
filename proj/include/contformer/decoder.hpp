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

#ifndef CONTFORMER_DECODER_HPP_
#define CONTFORMER_DECODER_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "contformer/autograd.hpp"
#include "contformer/content_query.hpp"
#include "contformer/encoder.hpp"
#include "contformer/geometry.hpp"
#include "contformer/nn.hpp"

namespace contformer {

using nn::FeedForward;
using nn::LayerNorm;
using nn::MultiHeadAttention;

struct DecoderOutput {
  ag::Var p;  // (T*N) x C, row t*N + i
  std::int64_t t = 0, n = 0, c = 0;
};

// Decoder blocks: self-attention among the N queries of each frame keeps the
// per-frame set-prediction semantics; cross-attention reads the full fused
// memory (all frames plus text) for temporal and linguistic context.
class QueryDecoder {
 public:
  QueryDecoder() = default;
  QueryDecoder(ParamStore& store, const std::string& prefix, std::int64_t dim,
               std::int64_t layers, std::int64_t heads, std::int64_t ffn_dim,
               Rng& rng);

  DecoderOutput decode(const FusedMemory& memory,
                       const ContentQuerySet& queries) const;

  struct Layer {
    LayerNorm ln_self, ln_cross, ln_ffn;
    MultiHeadAttention self_attn, cross_attn;
    FeedForward ffn;
  };
  Layer& layer(std::size_t i) { return layers_[i]; }
  std::size_t depth() const { return layers_.size(); }

 private:
  std::int64_t dim_ = 0;
  std::vector<Layer> layers_;
};

enum class BoxMode { kAbsolute, kDelta };

struct Predictions {
  ag::Var boxes;            // (T*N) x 4, sigmoid-normalized (cx,cy,w,h)
  ag::Var temporal_logits;  // (T*N) x 2, columns (start, end)
  ag::Var confidence;       // (T*N) x 1 logits
  std::int64_t t = 0, n = 0;

  std::int64_t row(std::int64_t frame, std::int64_t query) const {
    return frame * n + query;
  }
};

// Box MLP, temporal head, and the scalar matching-confidence head.
class PredictionHeads {
 public:
  PredictionHeads() = default;
  PredictionHeads(ParamStore& store, const std::string& prefix,
                  std::int64_t dim, BoxMode mode, Rng& rng);

  Predictions predict(const DecoderOutput& p, const QueryRegionBank& bank) const;
  // Content-agnostic path has no region bank; absolute boxes only.
  Predictions predict(const DecoderOutput& p) const;

  BoxMode mode() const { return mode_; }
  Linear& box_out() { return box3_; }

 private:
  Predictions predict_impl(const DecoderOutput& p, const ag::Var* raw_regions)
      const;
  BoxMode mode_ = BoxMode::kAbsolute;
  Linear box1_, box2_, box3_;
  Linear temporal_, conf_;
};

// Greedy readout: per frame take the most confident query; for untrimmed
// videos decode the span from the selected queries' start/end logits
// (softmax over frames, argmax, end clamped to >= start).
struct TubeReadout {
  geom::Tube tube;
  std::vector<std::int64_t> picked;       // query index per frame
  std::vector<double> start_dist, end_dist;
};

TubeReadout assemble_tube(const Predictions& preds, bool trimmed);

}  // namespace contformer

#endif  // CONTFORMER_DECODER_HPP_
