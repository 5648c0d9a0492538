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

#include "contformer/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace contformer {

using nlohmann::json;

std::string config_json(const Config& c) {
  json j;
  j["model"] = {{"dim", c.model.dim},
                {"num_queries", c.model.num_queries},
                {"roi_bins", c.model.roi_bins},
                {"cqg", c.model.cqg},
                {"region_init", c.model.region_init},
                {"box_mode", c.model.box_mode},
                {"anchor_source", c.model.anchor_source}};
  j["backbone"] = {{"kind", c.backbone.kind}, {"patch", c.backbone.patch}};
  j["encoder"] = {{"layers", c.encoder.layers},
                  {"heads", c.encoder.heads},
                  {"ffn_dim", c.encoder.ffn_dim},
                  {"modality_embed", c.encoder.modality_embed}};
  j["decoder"] = {{"layers", c.decoder.layers}, {"heads", c.decoder.heads}};
  j["loss"] = {{"giou", c.loss.giou},
               {"l1", c.loss.l1},
               {"kl", c.loss.kl},
               {"entity", c.loss.entity},
               {"tau", c.loss.tau},
               {"background", c.loss.background},
               {"time_smoothing", c.loss.time_smoothing}};
  j["train"] = {{"lr", c.train.lr},
                {"weight_decay", c.train.weight_decay},
                {"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"seed", c.train.seed},
                {"ecl", c.train.ecl},
                {"grad_clip", c.train.grad_clip}};
  j["eval"] = {{"etas", c.eval.etas},
               {"thetas", c.eval.thetas},
               {"per_video_accuracy", c.eval.per_video_accuracy}};
  j["data"] = {{"train_manifest", c.data.train_manifest},
               {"val_manifest", c.data.val_manifest}};
  return j.dump(2);
}

Config config_from_json(const std::string& text) {
  json j = json::parse(text);
  Config c;
  if (j.contains("model")) {
    const auto& m = j["model"];
    c.model.dim = m.value("dim", c.model.dim);
    c.model.num_queries = m.value("num_queries", c.model.num_queries);
    c.model.roi_bins = m.value("roi_bins", c.model.roi_bins);
    c.model.cqg = m.value("cqg", c.model.cqg);
    c.model.region_init = m.value("region_init", c.model.region_init);
    c.model.box_mode = m.value("box_mode", c.model.box_mode);
    c.model.anchor_source = m.value("anchor_source", c.model.anchor_source);
  }
  if (j.contains("backbone")) {
    const auto& b = j["backbone"];
    c.backbone.kind = b.value("kind", c.backbone.kind);
    c.backbone.patch = b.value("patch", c.backbone.patch);
  }
  if (j.contains("encoder")) {
    const auto& e = j["encoder"];
    c.encoder.layers = e.value("layers", c.encoder.layers);
    c.encoder.heads = e.value("heads", c.encoder.heads);
    c.encoder.ffn_dim = e.value("ffn_dim", c.encoder.ffn_dim);
    c.encoder.modality_embed =
        e.value("modality_embed", c.encoder.modality_embed);
  }
  if (j.contains("decoder")) {
    const auto& d = j["decoder"];
    c.decoder.layers = d.value("layers", c.decoder.layers);
    c.decoder.heads = d.value("heads", c.decoder.heads);
  }
  if (j.contains("loss")) {
    const auto& l = j["loss"];
    c.loss.giou = l.value("giou", c.loss.giou);
    c.loss.l1 = l.value("l1", c.loss.l1);
    c.loss.kl = l.value("kl", c.loss.kl);
    c.loss.entity = l.value("entity", c.loss.entity);
    c.loss.tau = l.value("tau", c.loss.tau);
    c.loss.background = l.value("background", c.loss.background);
    c.loss.time_smoothing = l.value("time_smoothing", c.loss.time_smoothing);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    c.train.lr = t.value("lr", c.train.lr);
    c.train.weight_decay = t.value("weight_decay", c.train.weight_decay);
    c.train.epochs = t.value("epochs", c.train.epochs);
    c.train.batch_size = t.value("batch_size", c.train.batch_size);
    c.train.seed = t.value("seed", c.train.seed);
    c.train.ecl = t.value("ecl", c.train.ecl);
    c.train.grad_clip = t.value("grad_clip", c.train.grad_clip);
  }
  if (j.contains("eval")) {
    const auto& e = j["eval"];
    if (e.contains("etas")) c.eval.etas = e["etas"].get<std::vector<double>>();
    if (e.contains("thetas"))
      c.eval.thetas = e["thetas"].get<std::vector<double>>();
    c.eval.per_video_accuracy =
        e.value("per_video_accuracy", c.eval.per_video_accuracy);
  }
  if (j.contains("data")) {
    const auto& d = j["data"];
    c.data.train_manifest = d.value("train_manifest", c.data.train_manifest);
    c.data.val_manifest = d.value("val_manifest", c.data.val_manifest);
  }
  if (c.model.region_init != "grid" && c.model.region_init != "random")
    throw std::invalid_argument("config: model.region_init must be grid|random");
  if (c.model.box_mode != "absolute" && c.model.box_mode != "delta")
    throw std::invalid_argument("config: model.box_mode must be absolute|delta");
  if (c.model.anchor_source != "decoder" && c.model.anchor_source != "roi")
    throw std::invalid_argument(
        "config: model.anchor_source must be decoder|roi");
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return config_from_json(ss.str());
}

void save_config(const Config& c, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write config " + path);
  f << config_json(c) << "\n";
}

std::string config_hash(const Config& c) {
  const std::string text = config_json(c);
  // FNV-1a, stable across platforms.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream ss;
  ss << std::hex << h;
  return ss.str();
}

}  // namespace contformer
