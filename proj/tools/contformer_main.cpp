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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "contformer/config.hpp"
#include "contformer/data.hpp"
#include "contformer/model.hpp"
#include "contformer/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace contformer;

namespace {

json metric_json(const geom::MetricReport& r) {
  json j;
  for (const auto& [eta, v] : r.accuracy_at)
    j["accuracy_at"][std::to_string(eta)] = v;
  for (const auto& [theta, v] : r.viou_at)
    j["viou_at"][std::to_string(theta)] = v;
  j["m_iou"] = r.m_iou;
  j["m_tiou"] = r.m_tiou;
  j["m_viou"] = r.m_viou;
  j["samples"] = r.sample_count;
  j["frames"] = r.frame_count;
  return j;
}

Config resolve_config(const std::string& path, const CLI::App* sub,
                      std::uint64_t seed) {
  Config c = path.empty() ? Config{} : load_config(path);
  if (sub->count("--seed") > 0) c.train.seed = seed;
  return c;
}

data::DatasetManifest load_and_check(const std::string& path) {
  if (path.empty())
    throw std::runtime_error("no manifest path given (flag or config.data)");
  data::DatasetManifest m = data::load_manifest(path);
  data::validate_manifest(m);
  return m;
}

int cmd_synth(const std::string& spec_path, const CLI::App* sub,
              std::uint64_t seed, const std::string& out,
              const data::SynthSpec& overrides, bool untrimmed) {
  data::SynthSpec spec =
      spec_path.empty() ? data::SynthSpec{} : data::synth_spec_from_json_file(spec_path);
  if (sub->count("--videos") > 0) spec.num_videos = overrides.num_videos;
  if (sub->count("--frames") > 0) spec.num_frames = overrides.num_frames;
  if (sub->count("--size") > 0) spec.image_size = overrides.image_size;
  if (sub->count("--split") > 0) spec.split = overrides.split;
  if (sub->count("--min-visible") > 0) spec.min_visible = overrides.min_visible;
  if (sub->count("--max-visible") > 0) spec.max_visible = overrides.max_visible;
  if (sub->count("--untrimmed") > 0) spec.trimmed = !untrimmed;
  if (sub->count("--seed") > 0) spec.seed = seed;

  data::DatasetManifest m = data::synth_generate(spec);
  data::validate_manifest(m);
  fs::create_directories(out);
  data::save_manifest(m, out + "/manifest.jsonl");
  data::synth_spec_to_json_file(spec, out + "/synth_spec.json");
  std::cout << json{{"manifest", out + "/manifest.jsonl"},
                    {"videos", m.samples.size()},
                    {"vocab", m.vocab.size()},
                    {"trimmed", spec.trimmed}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_validate(const std::string& manifest) {
  data::DatasetManifest m = data::load_manifest(manifest);
  data::validate_manifest(m);
  std::cout << json{{"manifest", manifest},
                    {"valid", true},
                    {"videos", m.samples.size()}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_train(const Config& cfg, const std::string& train_path,
              const std::string& val_path, const std::string& out) {
  data::DatasetManifest train_set = load_and_check(
      !train_path.empty() ? train_path : cfg.data.train_manifest);
  std::optional<data::DatasetManifest> val_set;
  const std::string vp = !val_path.empty() ? val_path : cfg.data.val_manifest;
  if (!vp.empty()) val_set = load_and_check(vp);

  Trainer tr(cfg, std::move(train_set), std::move(val_set));
  tr.train();

  fs::create_directories(out);
  save_config(cfg, out + "/config.json");
  tr.log().save_jsonl(out + "/runlog.jsonl");
  tr.save_checkpoint(out + "/checkpoint.bin");

  json summary{{"iterations", tr.iteration()},
               {"epochs", tr.epoch()},
               {"train", metric_json(tr.evaluate_train())},
               {"checkpoint", out + "/checkpoint.bin"}};
  if (tr.val_set() != nullptr) summary["val"] = metric_json(tr.evaluate_val());
  std::ofstream(out + "/metrics.json") << summary.dump(2) << "\n";
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_eval(const Config& cfg, const std::string& ckpt,
             const std::string& manifest_path, const std::string& out,
             bool gt_bypass) {
  data::DatasetManifest m = load_and_check(
      !manifest_path.empty() ? manifest_path : cfg.data.val_manifest);
  Trainer tr(cfg, m);
  if (!ckpt.empty()) tr.load_checkpoint(ckpt);
  geom::MetricReport rep = evaluate_model(tr.model(), m, cfg.eval, gt_bypass);
  json j = metric_json(rep);
  if (!out.empty()) {
    fs::create_directories(out);
    std::ofstream(out + "/metrics.json") << j.dump(2) << "\n";
    if (!gt_bypass)
      save_predictions(predict_tubes(tr.model(), m), out + "/predictions.jsonl");
  }
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_score(const std::string& manifest, const std::string& predictions,
              const Config::Eval& eval) {
  data::DatasetManifest m = load_and_check(manifest);
  auto preds = load_predictions(predictions);
  json j = metric_json(score_predictions(preds, m, eval));
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_converge(const Config& cfg, const std::string& train_path,
                 const std::string& val_path,
                 const std::vector<std::uint64_t>& seeds, double eta,
                 double threshold, const std::string& out) {
  data::DatasetManifest train_set = load_and_check(
      !train_path.empty() ? train_path : cfg.data.train_manifest);
  data::DatasetManifest val_set =
      load_and_check(!val_path.empty() ? val_path : cfg.data.val_manifest);
  ConvergenceResult res = convergence_experiment(cfg, train_set, val_set,
                                                 seeds, eta, threshold, out);
  json arms = json::array();
  for (const auto& a : res.arms)
    arms.push_back({{"seed", a.seed},
                    {"content_aware", a.cqg},
                    {"epochs_to_threshold", a.epochs_to_threshold}});
  std::cout << json{{"median_epochs_content_aware", res.median_epochs_cqg},
                    {"median_epochs_content_agnostic",
                     res.median_epochs_agnostic},
                    {"arms", arms}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_heatmap(const Config& cfg, const std::string& ckpt,
                const std::string& manifest_path, const std::string& out) {
  data::DatasetManifest m = load_and_check(
      !manifest_path.empty() ? manifest_path : cfg.data.val_manifest);
  Trainer tr(cfg, m);
  if (!ckpt.empty()) tr.load_checkpoint(ckpt);
  const double rate = heatmap_in_span_rate(tr.model(), m, out);
  std::cout << json{{"top_word_in_span_rate", rate},
                    {"samples", m.samples.size()}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_sweep(const Config& cfg, const std::string& spec_path,
              const std::string& axis,
              const std::vector<std::int64_t>& values,
              std::int64_t iterations, const std::string& out) {
  data::SynthSpec spec =
      spec_path.empty() ? data::SynthSpec{} : data::synth_spec_from_json_file(spec_path);
  auto rows = sweep(cfg, spec, axis, values, iterations, out);
  json table = json::array();
  for (const auto& r : rows)
    table.push_back(
        {{axis, r.value}, {"metrics", metric_json(r.report)}});
  std::cout << table.dump() << "\n";
  return 0;
}

json sample_json(const data::GroundingSample& s) {
  json spans = json::array();
  for (const auto& es : s.entity_spans)
    spans.push_back({{"word_start", es.word_start},
                     {"word_end", es.word_end},
                     {"target_id", es.target_id}});
  return json{{"video_id", s.video_id},
              {"frames", s.num_frames()},
              {"height", s.image_h()},
              {"width", s.image_w()},
              {"sentence", s.sentence},
              {"tokens", s.tokens},
              {"trimmed", s.trimmed},
              {"tube_id", s.tube_id},
              {"span_start", s.gt_tube.span().start_frame},
              {"span_end", s.gt_tube.span().end_frame},
              {"entity_spans", spans}};
}

int cmd_inspect(const std::string& manifest, const std::string& ckpt,
                const std::string& video_id) {
  if (!manifest.empty()) {
    data::DatasetManifest m = data::load_manifest(manifest);
    if (!video_id.empty()) {
      for (const auto& s : m.samples)
        if (s.video_id == video_id) {
          std::cout << sample_json(s).dump() << "\n";
          return 0;
        }
      throw std::runtime_error("no sample with video_id " + video_id);
    }
    json j{{"split", m.split},
           {"fps", m.fps},
           {"videos", m.samples.size()},
           {"vocab", m.vocab.size()}};
    if (!m.samples.empty()) j["first"] = sample_json(m.samples.front());
    std::cout << j.dump() << "\n";
    return 0;
  }
  if (!ckpt.empty()) {
    std::ifstream f(ckpt, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint " + ckpt);
    char magic[8];
    f.read(magic, 8);
    std::int64_t n = 0;
    f.read(reinterpret_cast<char*>(&n), 8);
    std::string hash(static_cast<std::size_t>(n), '\0');
    f.read(hash.data(), n);
    std::int64_t iter = 0, epoch = 0;
    f.read(reinterpret_cast<char*>(&iter), 8);
    f.read(reinterpret_cast<char*>(&epoch), 8);
    if (!f) throw std::runtime_error("truncated checkpoint " + ckpt);
    std::cout << json{{"magic", std::string(magic, 8)},
                      {"config_hash", hash},
                      {"iteration", iter},
                      {"epoch", epoch}}
                     .dump()
              << "\n";
    return 0;
  }
  throw std::runtime_error("inspect needs --manifest or --checkpoint");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ContFormer video grounding toolkit"};
  app.require_subcommand(1);

  std::string config_path, out, manifest, val_manifest, ckpt, predictions;
  std::string spec_path, axis = "frames", split;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  std::vector<std::int64_t> values;
  double eta = 0.5, threshold = 0.8;
  std::int64_t iterations = 50;
  bool gt_bypass = false, untrimmed = false, per_video = false;
  data::SynthSpec ov;

  auto add_common = [&](CLI::App* s) {
    s->add_option("--config", config_path, "Config JSON file");
    s->add_option("--seed", seed, "Override the config seed");
    s->add_option("--out", out, "Output directory");
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  add_common(synth);
  synth->add_option("--spec", spec_path, "Synthetic spec JSON");
  synth->add_option("--videos", ov.num_videos, "Number of videos");
  synth->add_option("--frames", ov.num_frames, "Frames per video");
  synth->add_option("--size", ov.image_size, "Image side length");
  synth->add_option("--split", ov.split, "Split name");
  synth->add_option("--min-visible", ov.min_visible, "Untrimmed window min");
  synth->add_option("--max-visible", ov.max_visible, "Untrimmed window max");
  synth->add_flag("--untrimmed", untrimmed, "Generate untrimmed videos");

  auto* validate = app.add_subcommand("validate", "Validate a manifest");
  validate->add_option("--manifest", manifest, "Manifest path")->required();

  auto* train = app.add_subcommand("train", "Train a model");
  add_common(train);
  train->add_option("--train-manifest", manifest, "Training manifest");
  train->add_option("--val-manifest", val_manifest, "Validation manifest");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval);
  eval->add_option("--checkpoint", ckpt, "Checkpoint file");
  eval->add_option("--manifest", manifest, "Evaluation manifest");
  eval->add_flag("--gt-bypass", gt_bypass,
                 "Score ground truth against itself (harness check)");

  auto* score = app.add_subcommand("score", "Score a prediction file");
  score->add_option("--manifest", manifest, "Manifest path")->required();
  score->add_option("--predictions", predictions, "Prediction JSONL")
      ->required();
  score->add_option("--config", config_path, "Config JSON (eval thresholds)");
  score->add_flag("--per-video", per_video, "Per-video accuracy mode");

  auto* converge = app.add_subcommand(
      "converge", "Twin content-aware vs agnostic convergence runs");
  add_common(converge);
  converge->add_option("--train-manifest", manifest, "Training manifest");
  converge->add_option("--val-manifest", val_manifest, "Validation manifest");
  converge->add_option("--seeds", seeds, "Seeds to run")->delimiter(',');
  converge->add_option("--eta", eta, "IoU threshold for accuracy");
  converge->add_option("--threshold", threshold, "Accuracy to reach");

  auto* heatmap = app.add_subcommand(
      "heatmap", "Query-word alignment heatmaps from a checkpoint");
  add_common(heatmap);
  heatmap->add_option("--checkpoint", ckpt, "Checkpoint file");
  heatmap->add_option("--manifest", manifest, "Manifest path");

  auto* sweep_cmd =
      app.add_subcommand("sweep", "Metric table over frames or resolution");
  add_common(sweep_cmd);
  sweep_cmd->add_option("--spec", spec_path, "Synthetic spec JSON");
  sweep_cmd->add_option("--axis", axis, "frames | resolution");
  sweep_cmd->add_option("--values", values, "Grid values")
      ->delimiter(',')
      ->required();
  sweep_cmd->add_option("--iterations", iterations, "Train steps per point");

  std::string video_id;
  auto* inspect = app.add_subcommand("inspect", "Describe an artifact file");
  inspect->add_option("--manifest", manifest, "Manifest path");
  inspect->add_option("--checkpoint", ckpt, "Checkpoint file");
  inspect->add_option("--video", video_id, "Dump one sample by video id");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      if (out.empty()) throw std::runtime_error("synth needs --out");
      ov.split = synth->count("--split") ? ov.split : "train";
      return cmd_synth(spec_path, synth, seed, out, ov, untrimmed);
    }
    if (validate->parsed()) return cmd_validate(manifest);
    if (train->parsed()) {
      if (out.empty()) out = "runs/train";
      return cmd_train(resolve_config(config_path, train, seed), manifest,
                       val_manifest, out);
    }
    if (eval->parsed())
      return cmd_eval(resolve_config(config_path, eval, seed), ckpt, manifest,
                      out, gt_bypass);
    if (score->parsed()) {
      Config c = config_path.empty() ? Config{} : load_config(config_path);
      c.eval.per_video_accuracy = per_video || c.eval.per_video_accuracy;
      return cmd_score(manifest, predictions, c.eval);
    }
    if (converge->parsed()) {
      if (out.empty()) out = "runs/converge";
      return cmd_converge(resolve_config(config_path, converge, seed),
                          manifest, val_manifest, seeds, eta, threshold, out);
    }
    if (heatmap->parsed()) {
      if (out.empty()) out = "runs/heatmap";
      return cmd_heatmap(resolve_config(config_path, heatmap, seed), ckpt,
                         manifest, out);
    }
    if (sweep_cmd->parsed()) {
      if (out.empty()) out = "runs/sweep";
      return cmd_sweep(resolve_config(config_path, sweep_cmd, seed), spec_path,
                       axis, values, iterations, out);
    }
    if (inspect->parsed()) return cmd_inspect(manifest, ckpt, video_id);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
