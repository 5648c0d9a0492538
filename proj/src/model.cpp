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

#include "contformer/model.hpp"

#include <stdexcept>

namespace contformer {

namespace {

RegionInit parse_init(const std::string& s) {
  return s == "random" ? RegionInit::kRandom : RegionInit::kGrid;
}

BoxMode parse_box_mode(const std::string& s) {
  return s == "delta" ? BoxMode::kDelta : BoxMode::kAbsolute;
}

}  // namespace

ContFormer::ContFormer(const Config& config, std::int64_t vocab_size)
    : config_(config), vocab_size_(vocab_size) {
  if (!config.model.cqg && config.model.box_mode == "delta")
    throw std::invalid_argument(
        "delta box mode needs the content-aware region bank");
  if (!config.model.cqg && config.model.anchor_source == "roi")
    throw std::invalid_argument(
        "roi anchors need the content-aware region bank");
  Rng rng(config.train.seed ^ 0x9e3779b97f4a7c15ull);
  const std::int64_t C = config.model.dim;
  visual_ = VisualBackbone(store_, "visual", config.backbone.patch, C, rng);
  text_ = TextBackbone(store_, "text", vocab_size, C, rng);
  encoder_ = CrossModalEncoder(store_, "encoder", C, config.encoder.layers,
                               config.encoder.heads, config.encoder.ffn_dim,
                               config.encoder.modality_embed, rng);
  queries_ = ContentQueryGenerator(store_, "query", config.model.num_queries,
                                   C, config.model.roi_bins, config.model.cqg,
                                   parse_init(config.model.region_init), rng);
  decoder_ = QueryDecoder(store_, "decoder", C, config.decoder.layers,
                          config.decoder.heads, 4 * C, rng);
  heads_ = PredictionHeads(store_, "heads", C,
                           parse_box_mode(config.model.box_mode), rng);
  anchor_proj_ = Linear(store_, "anchor_proj", C, C, rng);
}

ContFormer::Outputs ContFormer::forward(
    const Tensor& frames, const std::vector<int>& tokens,
    const std::vector<std::uint8_t>& text_mask,
    const std::vector<std::uint8_t>& frame_mask) const {
  Outputs out;
  VisualFeatureGrid grid = visual_.encode_frames(frames);
  out.video = flatten_video(grid);
  TextFeatureSeq text = text_.encode_text(tokens, text_mask);
  out.memory = encoder_.fuse(out.video, text, frame_mask);
  out.queries = queries_.generate(out.video);
  out.decoded = decoder_.decode(out.memory, out.queries);
  out.preds = queries_.content_aware()
                  ? heads_.predict(out.decoded, queries_.bank())
                  : heads_.predict(out.decoded);
  if (config_.model.anchor_source == "roi") {
    // Anchor on the visual memory pooled under each query's region instead
    // of the decoder output.
    ag::Var u = out.memory.visual();
    ag::Var boxes = queries_.bank().boxes_var();
    const std::int64_t bins = queries_.bins();
    std::vector<ag::Var> rows;
    rows.reserve(static_cast<std::size_t>(out.decoded.t * out.decoded.n));
    for (std::int64_t t = 0; t < out.decoded.t; ++t)
      for (std::int64_t i = 0; i < out.decoded.n; ++i) {
        ag::Var pooled =
            roi_align(u, t, out.memory.grid_h, out.memory.grid_w,
                      ag::slice_rows(boxes, i, 1), bins);
        rows.push_back(ag::scale(ag::sum_rows(pooled),
                                 1.0 / static_cast<double>(bins * bins)));
      }
    out.anchors = anchor_proj_.forward(ag::concat_rows(rows));
  } else {
    out.anchors = anchor_proj_.forward(out.decoded.p);
  }
  return out;
}

LossBundle ContFormer::sample_loss(
    const Outputs& out, const data::GroundingSample& s,
    std::map<std::int64_t, std::vector<std::int64_t>>* matched_out) const {
  SampleLossInputs in;
  in.preds = &out.preds;
  in.sample = &s;
  ag::Var text = out.memory.text();
  std::vector<std::uint8_t> tmask(
      out.memory.mask.begin() + static_cast<std::ptrdiff_t>(out.memory.f),
      out.memory.mask.end());
  in.text = &text;
  in.text_mask = &tmask;
  in.anchors = nullptr;
  if (config_.train.ecl && !s.entity_spans.empty()) in.anchors = &out.anchors;
  return loss_total(in, config_.loss, matched_out);
}

}  // namespace contformer
