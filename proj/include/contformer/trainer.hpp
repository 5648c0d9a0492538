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

#ifndef CONTFORMER_TRAINER_HPP_
#define CONTFORMER_TRAINER_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "contformer/config.hpp"
#include "contformer/data.hpp"
#include "contformer/model.hpp"
#include "contformer/nn.hpp"

namespace contformer {

struct RunLogEntry {
  std::int64_t iteration = 0;
  std::int64_t epoch = 0;
  LossReport loss;
  double grad_norm = 0.0;
  double wall_ms = 0.0;
};

struct EpochRecord {
  std::int64_t epoch = 0;
  geom::MetricReport train;
  std::optional<geom::MetricReport> val;
};

// Append-only training record; serializable as line-delimited JSON.
struct RunLog {
  std::vector<RunLogEntry> iterations;
  std::vector<EpochRecord> epochs;

  // First epoch (1-based) whose train accuracy at `eta` strictly exceeds or
  // meets `threshold`; -1 when never reached.
  std::int64_t epochs_to_threshold(double eta, double threshold,
                                   bool use_val = false) const;
  void save_jsonl(const std::string& path) const;
};

// Owns the model, optimizer, and data order for one training context.
class Trainer {
 public:
  Trainer(const Config& config, data::DatasetManifest train_set,
          std::optional<data::DatasetManifest> val_set = std::nullopt);

  // One optimizer step over the next batch. Appends to the run log and
  // asserts the learned regions are still valid boxes.
  LossReport step();
  // Full pass: config.train.epochs epochs with per-epoch evaluation.
  void train();
  // Runs exactly `iterations` optimizer steps (no per-epoch eval records).
  void train_iterations(std::int64_t iterations);

  geom::MetricReport evaluate_train() const;
  geom::MetricReport evaluate_val() const;

  ContFormer& model() { return *model_; }
  const RunLog& log() const { return log_; }
  std::int64_t iteration() const { return iteration_; }
  std::int64_t epoch() const { return epoch_; }
  const data::DatasetManifest& train_set() const { return train_; }
  const data::DatasetManifest* val_set() const {
    return val_ ? &*val_ : nullptr;
  }

  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);

 private:
  std::vector<std::int64_t> next_batch();
  void record_epoch_metrics();

  Config config_;
  data::DatasetManifest train_;
  std::optional<data::DatasetManifest> val_;
  std::unique_ptr<ContFormer> model_;
  std::unique_ptr<nn::AdamW> opt_;
  Rng data_rng_;
  std::vector<std::int64_t> order_;
  std::size_t cursor_ = 0;
  std::int64_t iteration_ = 0;
  std::int64_t epoch_ = 0;
  RunLog log_;
};

// Metric evaluation of a model over a manifest. `gt_bypass` scores the
// ground truth against itself (oracle path for harness validation).
geom::MetricReport evaluate_model(const ContFormer& model,
                                  const data::DatasetManifest& m,
                                  const Config::Eval& eval,
                                  bool gt_bypass = false);

// Per-sample predicted tubes, for the score/eval file formats.
struct PredictionRecord {
  std::string video_id;
  geom::Tube tube;
};
std::vector<PredictionRecord> predict_tubes(const ContFormer& model,
                                            const data::DatasetManifest& m);
void save_predictions(const std::vector<PredictionRecord>& preds,
                      const std::string& path);
std::vector<PredictionRecord> load_predictions(const std::string& path);

// Scores a prediction file against a manifest (the standalone scorer).
geom::MetricReport score_predictions(
    const std::vector<PredictionRecord>& preds,
    const data::DatasetManifest& m, const Config::Eval& eval);

// ---------------------------------------------------------------------------
// experiment runners

struct ConvergenceArm {
  bool cqg = true;
  std::uint64_t seed = 0;
  std::vector<double> loss_per_iteration;
  std::vector<double> train_acc_per_epoch;
  std::vector<double> val_acc_per_epoch;
  std::int64_t epochs_to_threshold = -1;
};

struct ConvergenceResult {
  std::vector<ConvergenceArm> arms;  // 2 per seed: cqg on, off
  double median_epochs_cqg = -1;
  double median_epochs_agnostic = -1;
};

// Twin runs per seed differing only in model.cqg; emits loss and accuracy
// curves (CSV + SVG) under out_dir when non-empty.
ConvergenceResult convergence_experiment(
    const Config& base, const data::DatasetManifest& train_set,
    const data::DatasetManifest& val_set,
    const std::vector<std::uint64_t>& seeds, double eta, double threshold,
    const std::string& out_dir);

// Query-word cosine similarity matrix for one sample at the middle annotated
// frame, plus the confidence-selected query row.
struct HeatmapResult {
  Tensor matrix;  // N x L cosine similarities
  std::int64_t picked_query = 0;
  std::int64_t frame = 0;
  bool top_word_in_span = false;
};
HeatmapResult alignment_heatmap(const ContFormer& model,
                                const data::GroundingSample& s);

// Fraction of samples whose selected query's best-matching word falls inside
// the annotated entity span; writes per-sample matrices when out_dir given.
double heatmap_in_span_rate(const ContFormer& model,
                            const data::DatasetManifest& m,
                            const std::string& out_dir);

struct SweepRow {
  std::string axis;
  double value = 0.0;
  geom::MetricReport report;
};

// Trains briefly and evaluates per grid point along "frames" or
// "resolution"; emits a table mirroring the run configs used.
std::vector<SweepRow> sweep(const Config& base, const data::SynthSpec& spec,
                            const std::string& axis,
                            const std::vector<std::int64_t>& values,
                            std::int64_t iterations, const std::string& out_dir);

}  // namespace contformer

#endif  // CONTFORMER_TRAINER_HPP_
