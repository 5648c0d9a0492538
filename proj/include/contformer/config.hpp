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

#ifndef CONTFORMER_CONFIG_HPP_
#define CONTFORMER_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "contformer/losses.hpp"

namespace contformer {

// Structured run configuration. JSON on disk, one nested object per section;
// every field has a default so partial files work.
struct Config {
  struct Model {
    std::int64_t dim = 64;
    std::int64_t num_queries = 25;
    std::int64_t roi_bins = 3;
    bool cqg = true;                  // content-aware query generation
    std::string region_init = "grid";  // grid | random
    std::string box_mode = "absolute";  // absolute | delta
    // Feature the contrastive anchor is projected from: the decoder output
    // ("decoder") or the visual memory pooled under the query's region
    // ("roi"; needs cqg).
    std::string anchor_source = "decoder";
  } model;

  struct Backbone {
    std::string kind = "patch_mean";
    std::int64_t patch = 8;
  } backbone;

  struct Encoder {
    std::int64_t layers = 2;
    std::int64_t heads = 4;
    std::int64_t ffn_dim = 128;
    bool modality_embed = true;
  } encoder;

  struct Decoder {
    std::int64_t layers = 2;
    std::int64_t heads = 4;
  } decoder;

  LossWeights loss;

  struct Train {
    double lr = 1e-4;
    double weight_decay = 1e-4;
    std::int64_t epochs = 10;
    std::int64_t batch_size = 4;
    std::uint64_t seed = 0;
    bool ecl = true;  // entity-aware contrastive learning
    double grad_clip = 0.0;
  } train;

  struct Eval {
    std::vector<double> etas = {0.4, 0.5, 0.6};
    std::vector<double> thetas = {0.3, 0.5};
    bool per_video_accuracy = false;
  } eval;

  struct Data {
    std::string train_manifest;
    std::string val_manifest;
  } data;
};

Config load_config(const std::string& path);
void save_config(const Config& c, const std::string& path);
std::string config_json(const Config& c);
Config config_from_json(const std::string& text);

// Stable content hash for checkpoint compatibility checks.
std::string config_hash(const Config& c);

}  // namespace contformer

#endif  // CONTFORMER_CONFIG_HPP_
