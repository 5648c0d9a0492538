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

#ifndef CONTFORMER_MODEL_HPP_
#define CONTFORMER_MODEL_HPP_

#include <cstdint>
#include <map>
#include <vector>

#include "contformer/backbones.hpp"
#include "contformer/config.hpp"
#include "contformer/content_query.hpp"
#include "contformer/data.hpp"
#include "contformer/decoder.hpp"
#include "contformer/encoder.hpp"
#include "contformer/losses.hpp"
#include "contformer/nn.hpp"

namespace contformer {

// End-to-end grounding model: backbones, cross-modal fusion, content query
// generation, decoder translation, prediction heads, and the entity anchor
// projection used by the contrastive term and the alignment heatmaps.
class ContFormer {
 public:
  ContFormer(const Config& config, std::int64_t vocab_size);

  struct Outputs {
    FlatVideo video;
    FusedMemory memory;
    ContentQuerySet queries;
    DecoderOutput decoded;
    Predictions preds;
    ag::Var anchors;  // (T*N) x C in the text similarity space
  };

  Outputs forward(const Tensor& frames, const std::vector<int>& tokens,
                  const std::vector<std::uint8_t>& text_mask,
                  const std::vector<std::uint8_t>& frame_mask = {}) const;

  // Matching plus the full training objective for one sample. The entity
  // term is included only when the model was configured with ecl on and the
  // sample carries entity spans.
  LossBundle sample_loss(const Outputs& out, const data::GroundingSample& s,
                         std::map<std::int64_t, std::vector<std::int64_t>>*
                             matched_out = nullptr) const;

  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const Config& config() const { return config_; }
  const ContentQueryGenerator& query_gen() const { return queries_; }
  std::int64_t vocab_size() const { return vocab_size_; }

 private:
  Config config_;
  std::int64_t vocab_size_ = 0;
  ParamStore store_;
  VisualBackbone visual_;
  TextBackbone text_;
  CrossModalEncoder encoder_;
  ContentQueryGenerator queries_;
  QueryDecoder decoder_;
  PredictionHeads heads_;
  Linear anchor_proj_;
};

}  // namespace contformer

#endif  // CONTFORMER_MODEL_HPP_
