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

#include "contformer/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "contformer/decoder.hpp"
#include "contformer/svg_plot.hpp"
#include "json.hpp"

namespace contformer {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json metric_json(const geom::MetricReport& r) {
  json j;
  for (const auto& [eta, v] : r.accuracy_at) {
    std::ostringstream k;
    k << eta;
    j["accuracy_at"][k.str()] = v;
  }
  for (const auto& [theta, v] : r.viou_at) {
    std::ostringstream k;
    k << theta;
    j["viou_at"][k.str()] = v;
  }
  j["m_iou"] = r.m_iou;
  j["m_tiou"] = r.m_tiou;
  j["m_viou"] = r.m_viou;
  j["samples"] = r.sample_count;
  j["frames"] = r.frame_count;
  return j;
}

double lookup_accuracy(const geom::MetricReport& r, double eta) {
  auto it = r.accuracy_at.find(eta);
  if (it == r.accuracy_at.end())
    throw std::invalid_argument("accuracy threshold was not evaluated");
  return it->second;
}

std::vector<std::uint8_t> all_ones(std::size_t n) {
  return std::vector<std::uint8_t>(n, 1);
}

void check_regions(const ContFormer& model) {
  if (!model.config().model.cqg) return;
  for (const auto& b : model.query_gen().bank().boxes()) {
    const bool ok = std::isfinite(b.cx) && std::isfinite(b.cy) &&
                    std::isfinite(b.w) && std::isfinite(b.h) && b.cx > 0.0 &&
                    b.cx < 1.0 && b.cy > 0.0 && b.cy < 1.0 && b.w > 0.0 &&
                    b.w < 1.0 && b.h > 0.0 && b.h < 1.0;
    if (!ok)
      throw std::runtime_error(
          "learned query region left the unit frame after optimizer step");
  }
}

// --- small binary checkpoint primitives (little-endian host assumed) ---

void put_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}
void put_i64(std::ostream& os, std::int64_t v) { put_bytes(os, &v, 8); }
void put_f64(std::ostream& os, double v) { put_bytes(os, &v, 8); }
void put_str(std::ostream& os, const std::string& s) {
  put_i64(os, static_cast<std::int64_t>(s.size()));
  put_bytes(os, s.data(), s.size());
}

void get_bytes(std::istream& is, void* p, std::size_t n) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!is) throw std::runtime_error("truncated checkpoint");
}
std::int64_t get_i64(std::istream& is) {
  std::int64_t v = 0;
  get_bytes(is, &v, 8);
  return v;
}
double get_f64(std::istream& is) {
  double v = 0;
  get_bytes(is, &v, 8);
  return v;
}
std::string get_str(std::istream& is) {
  const std::int64_t n = get_i64(is);
  if (n < 0 || n > (1 << 28)) throw std::runtime_error("corrupt checkpoint");
  std::string s(static_cast<std::size_t>(n), '\0');
  get_bytes(is, s.data(), s.size());
  return s;
}

void put_tensor(std::ostream& os, const Tensor& t) {
  put_i64(os, t.rank());
  for (std::int64_t d : t.shape()) put_i64(os, d);
  for (std::int64_t i = 0; i < t.numel(); ++i) put_f64(os, t[i]);
}

Tensor get_tensor(std::istream& is) {
  const std::int64_t rank = get_i64(is);
  if (rank < 0 || rank > 8) throw std::runtime_error("corrupt checkpoint");
  std::vector<std::int64_t> shape(static_cast<std::size_t>(rank));
  for (auto& d : shape) d = get_i64(is);
  Tensor t(shape);
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = get_f64(is);
  return t;
}

constexpr char kCkptMagic[9] = "CFCKPT01";

double median(std::vector<double> v) {
  if (v.empty()) return -1;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c",
                          "#d62728", "#9467bd", "#8c564b"};

}  // namespace

// ---------------------------------------------------------------------------
// RunLog

std::int64_t RunLog::epochs_to_threshold(double eta, double threshold,
                                         bool use_val) const {
  for (const auto& rec : epochs) {
    const geom::MetricReport* r = use_val ? (rec.val ? &*rec.val : nullptr)
                                          : &rec.train;
    if (r == nullptr) continue;
    if (lookup_accuracy(*r, eta) >= threshold) return rec.epoch;
  }
  return -1;
}

void RunLog::save_jsonl(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write run log " + path);
  for (const auto& e : iterations) {
    json j{{"kind", "iteration"},
           {"iteration", e.iteration},
           {"epoch", e.epoch},
           {"total", e.loss.total},
           {"match", e.loss.match},
           {"giou", e.loss.giou_part},
           {"l1", e.loss.l1_part},
           {"time", e.loss.time_part},
           {"entity", e.loss.entity_part},
           {"grad_norm", e.grad_norm},
           {"wall_ms", e.wall_ms}};
    f << j.dump() << "\n";
  }
  for (const auto& r : epochs) {
    json j{{"kind", "epoch"}, {"epoch", r.epoch}};
    j["train"] = metric_json(r.train);
    if (r.val) j["val"] = metric_json(*r.val);
    f << j.dump() << "\n";
  }
}

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(const Config& config, data::DatasetManifest train_set,
                 std::optional<data::DatasetManifest> val_set)
    : config_(config),
      train_(std::move(train_set)),
      val_(std::move(val_set)),
      data_rng_(0) {
  if (train_.samples.empty())
    throw std::invalid_argument("trainer needs a non-empty training split");
  // The embedding table is sized by the training vocabulary; a validation
  // split tokenized under its own vocabulary must be re-indexed (words the
  // model never saw fall back to the unknown token).
  if (val_ && val_->vocab.token_to_id != train_.vocab.token_to_id) {
    for (auto& s : val_->samples)
      s.tokens = data::tokenize(s.sentence, train_.vocab);
    val_->vocab = train_.vocab;
  }
  model_ = std::make_unique<ContFormer>(
      config_, static_cast<std::int64_t>(train_.vocab.size()));
  opt_ = std::make_unique<nn::AdamW>(model_->params(), config_.train.lr,
                                     config_.train.weight_decay);
  Rng root(config_.train.seed);
  data_rng_ = root.fork(101);
}

std::vector<std::int64_t> Trainer::next_batch() {
  const std::size_t n = train_.samples.size();
  if (cursor_ >= order_.size()) {
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0);
    for (std::size_t i = n; i > 1; --i) {
      const auto j = static_cast<std::size_t>(
          data_rng_.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order_[i - 1], order_[j]);
    }
    cursor_ = 0;
  }
  const std::size_t take = std::min<std::size_t>(
      static_cast<std::size_t>(config_.train.batch_size), n - cursor_);
  std::vector<std::int64_t> out(order_.begin() + cursor_,
                                order_.begin() + cursor_ + take);
  cursor_ += take;
  return out;
}

LossReport Trainer::step() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::int64_t> idx = next_batch();
  const data::PaddedBatch batch = data::make_batch(train_, idx);
  const auto b = static_cast<double>(idx.size());

  opt_->zero_grad();
  std::vector<ag::Var> totals;
  LossReport avg;
  avg.weights = config_.loss;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const data::GroundingSample& s =
        train_.samples[static_cast<std::size_t>(idx[i])];
    auto out = model_->forward(batch.frames[i], batch.tokens[i],
                               batch.text_mask[i], batch.frame_mask[i]);
    LossBundle bundle = model_->sample_loss(out, s);
    totals.push_back(bundle.total);
    avg.total += bundle.report.total / b;
    avg.match += bundle.report.match / b;
    avg.giou_part += bundle.report.giou_part / b;
    avg.l1_part += bundle.report.l1_part / b;
    avg.time_part += bundle.report.time_part / b;
    avg.entity_part += bundle.report.entity_part / b;
  }
  ag::Var loss = totals[0];
  for (std::size_t i = 1; i < totals.size(); ++i)
    loss = ag::add(loss, totals[i]);
  loss = ag::scale(loss, 1.0 / b);
  ag::backward(loss);

  const double gn = opt_->clip_grad_norm(config_.train.grad_clip);
  opt_->step();
  check_regions(*model_);
  ++iteration_;

  RunLogEntry entry;
  entry.iteration = iteration_;
  entry.epoch = epoch_;
  entry.loss = avg;
  entry.grad_norm = gn;
  entry.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
  log_.iterations.push_back(entry);
  return avg;
}

void Trainer::train() {
  const auto n = static_cast<std::int64_t>(train_.samples.size());
  const std::int64_t steps_per_epoch =
      (n + config_.train.batch_size - 1) / config_.train.batch_size;
  for (std::int64_t e = 0; e < config_.train.epochs; ++e) {
    for (std::int64_t s = 0; s < steps_per_epoch; ++s) step();
    ++epoch_;
    record_epoch_metrics();
  }
}

void Trainer::train_iterations(std::int64_t iterations) {
  for (std::int64_t i = 0; i < iterations; ++i) step();
}

void Trainer::record_epoch_metrics() {
  EpochRecord rec;
  rec.epoch = epoch_;
  rec.train = evaluate_train();
  if (val_) rec.val = evaluate_val();
  log_.epochs.push_back(rec);
}

geom::MetricReport Trainer::evaluate_train() const {
  return evaluate_model(*model_, train_, config_.eval);
}

geom::MetricReport Trainer::evaluate_val() const {
  if (!val_) throw std::runtime_error("no validation split configured");
  return evaluate_model(*model_, *val_, config_.eval);
}

void Trainer::save_checkpoint(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path);
  put_bytes(f, kCkptMagic, 8);
  put_str(f, config_hash(config_));
  put_i64(f, iteration_);
  put_i64(f, epoch_);
  put_i64(f, opt_->step_count());
  put_i64(f, static_cast<std::int64_t>(cursor_));
  put_i64(f, static_cast<std::int64_t>(order_.size()));
  for (std::int64_t v : order_) put_i64(f, v);
  put_str(f, data_rng_.save_state());

  const auto& entries = model_->params().entries();
  auto* self = const_cast<Trainer*>(this);
  auto& m1 = self->opt_->moment1();
  auto& m2 = self->opt_->moment2();
  if (m1.size() != entries.size() || m2.size() != entries.size())
    throw std::runtime_error("optimizer state out of sync with parameters");
  put_i64(f, static_cast<std::int64_t>(entries.size()));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    put_str(f, entries[i].first);
    put_tensor(f, entries[i].second->val);
    put_tensor(f, m1[i]);
    put_tensor(f, m2[i]);
  }
  if (!f) throw std::runtime_error("short write on checkpoint " + path);
}

void Trainer::load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint " + path);
  char magic[8];
  get_bytes(f, magic, 8);
  if (std::string(magic, 8) != std::string(kCkptMagic, 8))
    throw std::runtime_error("not a checkpoint file: " + path);
  const std::string hash = get_str(f);
  if (hash != config_hash(config_))
    throw std::runtime_error(
        "checkpoint was produced by a different configuration");
  iteration_ = get_i64(f);
  epoch_ = get_i64(f);
  opt_->set_step_count(get_i64(f));
  cursor_ = static_cast<std::size_t>(get_i64(f));
  order_.resize(static_cast<std::size_t>(get_i64(f)));
  for (auto& v : order_) v = get_i64(f);
  data_rng_.load_state(get_str(f));

  const auto& entries = model_->params().entries();
  auto& m1 = opt_->moment1();
  auto& m2 = opt_->moment2();
  const std::int64_t count = get_i64(f);
  if (count != static_cast<std::int64_t>(entries.size()))
    throw std::runtime_error("checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string name = get_str(f);
    if (name != entries[i].first)
      throw std::runtime_error("checkpoint parameter order mismatch at " +
                               name);
    Tensor val = get_tensor(f);
    Tensor a = get_tensor(f);
    Tensor b = get_tensor(f);
    if (!val.same_shape(entries[i].second->val))
      throw std::runtime_error("checkpoint shape mismatch at " + name);
    entries[i].second->val = std::move(val);
    m1[i] = std::move(a);
    m2[i] = std::move(b);
  }
}

// ---------------------------------------------------------------------------
// evaluation

geom::MetricReport evaluate_model(const ContFormer& model,
                                  const data::DatasetManifest& m,
                                  const Config::Eval& eval, bool gt_bypass) {
  ag::NoGradGuard ng;
  std::vector<std::pair<geom::Tube, geom::Tube>> pairs;
  pairs.reserve(m.samples.size());
  for (const auto& s : m.samples) {
    if (gt_bypass) {
      pairs.emplace_back(s.gt_tube, s.gt_tube);
      continue;
    }
    auto out = model.forward(s.frames, s.tokens, all_ones(s.tokens.size()));
    TubeReadout readout = assemble_tube(out.preds, s.trimmed);
    pairs.emplace_back(readout.tube, s.gt_tube);
  }
  const auto mode = eval.per_video_accuracy ? geom::AccuracyMode::kPerVideo
                                            : geom::AccuracyMode::kPerFrame;
  return geom::aggregate(pairs, eval.etas, eval.thetas, mode);
}

std::vector<PredictionRecord> predict_tubes(const ContFormer& model,
                                            const data::DatasetManifest& m) {
  ag::NoGradGuard ng;
  std::vector<PredictionRecord> out;
  out.reserve(m.samples.size());
  for (const auto& s : m.samples) {
    auto fwd = model.forward(s.frames, s.tokens, all_ones(s.tokens.size()));
    out.push_back({s.video_id, assemble_tube(fwd.preds, s.trimmed).tube});
  }
  return out;
}

void save_predictions(const std::vector<PredictionRecord>& preds,
                      const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write predictions " + path);
  for (const auto& p : preds) {
    json boxes = json::array();
    for (std::int64_t t = p.tube.span().start_frame;
         t <= p.tube.span().end_frame; ++t) {
      const geom::Box* b = p.tube.box_at(t);
      boxes.push_back({b->cx, b->cy, b->w, b->h});
    }
    json j{{"video_id", p.video_id},
           {"start", p.tube.span().start_frame},
           {"end", p.tube.span().end_frame},
           {"boxes", boxes}};
    f << j.dump() << "\n";
  }
}

std::vector<PredictionRecord> load_predictions(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open predictions " + path);
  std::vector<PredictionRecord> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    geom::TemporalSpan span{j.at("start").get<std::int64_t>(),
                            j.at("end").get<std::int64_t>()};
    const auto& boxes = j.at("boxes");
    if (static_cast<std::int64_t>(boxes.size()) != span.length())
      throw std::runtime_error("prediction span and box count disagree for " +
                               j.at("video_id").get<std::string>());
    std::map<std::int64_t, geom::Box> per_frame;
    for (std::int64_t t = span.start_frame; t <= span.end_frame; ++t) {
      const auto& b = boxes[static_cast<std::size_t>(t - span.start_frame)];
      per_frame[t] = geom::Box{b[0].get<double>(), b[1].get<double>(),
                               b[2].get<double>(), b[3].get<double>()};
    }
    out.push_back({j.at("video_id").get<std::string>(),
                   geom::Tube(span, std::move(per_frame))});
  }
  return out;
}

geom::MetricReport score_predictions(
    const std::vector<PredictionRecord>& preds,
    const data::DatasetManifest& m, const Config::Eval& eval) {
  std::map<std::string, const geom::Tube*> by_id;
  for (const auto& p : preds) {
    if (!by_id.emplace(p.video_id, &p.tube).second)
      throw std::runtime_error("duplicate prediction for video " + p.video_id);
  }
  std::vector<std::pair<geom::Tube, geom::Tube>> pairs;
  for (const auto& s : m.samples) {
    auto it = by_id.find(s.video_id);
    if (it == by_id.end())
      throw std::runtime_error("missing prediction for video " + s.video_id);
    pairs.emplace_back(*it->second, s.gt_tube);
  }
  const auto mode = eval.per_video_accuracy ? geom::AccuracyMode::kPerVideo
                                            : geom::AccuracyMode::kPerFrame;
  return geom::aggregate(pairs, eval.etas, eval.thetas, mode);
}

// ---------------------------------------------------------------------------
// convergence experiment

ConvergenceResult convergence_experiment(
    const Config& base, const data::DatasetManifest& train_set,
    const data::DatasetManifest& val_set,
    const std::vector<std::uint64_t>& seeds, double eta, double threshold,
    const std::string& out_dir) {
  if (base.model.box_mode != "absolute")
    throw std::invalid_argument(
        "convergence comparison needs absolute boxes so both arms share the "
        "prediction space");
  ConvergenceResult res;
  for (std::uint64_t seed : seeds) {
    for (bool cqg : {true, false}) {
      Config cfg = base;
      cfg.model.cqg = cqg;
      cfg.train.seed = seed;
      Trainer tr(cfg, train_set, val_set);
      tr.train();
      ConvergenceArm arm;
      arm.cqg = cqg;
      arm.seed = seed;
      for (const auto& e : tr.log().iterations)
        arm.loss_per_iteration.push_back(e.loss.total);
      for (const auto& r : tr.log().epochs) {
        arm.train_acc_per_epoch.push_back(lookup_accuracy(r.train, eta));
        if (r.val) arm.val_acc_per_epoch.push_back(lookup_accuracy(*r.val, eta));
      }
      arm.epochs_to_threshold = tr.log().epochs_to_threshold(eta, threshold);
      res.arms.push_back(std::move(arm));
    }
  }

  // Never-reached runs rank past the horizon so they never look faster.
  const double horizon = static_cast<double>(base.train.epochs) + 1;
  std::vector<double> ec, ea;
  for (const auto& a : res.arms) {
    const double e =
        a.epochs_to_threshold < 0 ? horizon
                                  : static_cast<double>(a.epochs_to_threshold);
    (a.cqg ? ec : ea).push_back(e);
  }
  res.median_epochs_cqg = median(ec);
  res.median_epochs_agnostic = median(ea);

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::vector<PlotSeries> loss_series, acc_series;
    json summary;
    summary["eta"] = eta;
    summary["threshold"] = threshold;
    summary["median_epochs_content_aware"] = res.median_epochs_cqg;
    summary["median_epochs_content_agnostic"] = res.median_epochs_agnostic;
    for (std::size_t i = 0; i < res.arms.size(); ++i) {
      const auto& a = res.arms[i];
      const std::string label = "seed " + std::to_string(a.seed) +
                                (a.cqg ? " content" : " agnostic");
      PlotSeries ls{label, {}, {}, kPalette[i % 6]};
      for (std::size_t k = 0; k < a.loss_per_iteration.size(); ++k) {
        ls.x.push_back(static_cast<double>(k + 1));
        ls.y.push_back(a.loss_per_iteration[k]);
      }
      loss_series.push_back(std::move(ls));
      PlotSeries as{label, {}, {}, kPalette[i % 6]};
      for (std::size_t k = 0; k < a.train_acc_per_epoch.size(); ++k) {
        as.x.push_back(static_cast<double>(k + 1));
        as.y.push_back(a.train_acc_per_epoch[k]);
      }
      acc_series.push_back(std::move(as));
      summary["arms"].push_back(
          {{"seed", a.seed},
           {"content_aware", a.cqg},
           {"epochs_to_threshold", a.epochs_to_threshold}});
    }
    write_svg_plot(out_dir + "/loss_curves.svg", "Training loss", "iteration",
                   "loss", loss_series);
    write_svg_plot(out_dir + "/accuracy_curves.svg", "Train accuracy",
                   "epoch", "accuracy", acc_series);
    for (std::uint64_t seed : seeds) {
      std::ofstream csv(out_dir + "/accuracy_seed" + std::to_string(seed) +
                        ".csv");
      csv << "epoch";
      for (const auto& a : res.arms)
        if (a.seed == seed)
          csv << (a.cqg ? ",train_content,val_content"
                        : ",train_agnostic,val_agnostic");
      csv << "\n";
      for (std::int64_t e = 0; e < base.train.epochs; ++e) {
        csv << (e + 1);
        for (const auto& a : res.arms) {
          if (a.seed != seed) continue;
          const auto idx = static_cast<std::size_t>(e);
          csv << "," << (idx < a.train_acc_per_epoch.size()
                             ? a.train_acc_per_epoch[idx]
                             : 0.0)
              << "," << (idx < a.val_acc_per_epoch.size()
                             ? a.val_acc_per_epoch[idx]
                             : 0.0);
        }
        csv << "\n";
      }
    }
    std::ofstream sf(out_dir + "/convergence_summary.json");
    sf << summary.dump(2) << "\n";
  }
  return res;
}

// ---------------------------------------------------------------------------
// alignment heatmaps

HeatmapResult alignment_heatmap(const ContFormer& model,
                                const data::GroundingSample& s) {
  ag::NoGradGuard ng;
  auto out = model.forward(s.frames, s.tokens, all_ones(s.tokens.size()));
  const geom::TemporalSpan span = s.gt_tube.span();
  HeatmapResult res;
  res.frame = (span.start_frame + span.end_frame) / 2;

  const std::int64_t N = out.preds.n;
  const auto L = static_cast<std::int64_t>(s.tokens.size());
  const std::int64_t C = out.anchors->val.cols();
  double best_conf = -1e300;
  for (std::int64_t i = 0; i < N; ++i) {
    const double c = out.preds.confidence->val(out.preds.row(res.frame, i), 0);
    if (c > best_conf) {
      best_conf = c;
      res.picked_query = i;
    }
  }

  const Tensor& anchors = out.anchors->val;
  const Tensor text = out.memory.text()->val;
  auto row_norm = [C](const Tensor& t, std::int64_t r) {
    double ss = 0.0;
    for (std::int64_t c = 0; c < C; ++c) ss += t(r, c) * t(r, c);
    return std::sqrt(std::max(ss, 1e-24));
  };
  res.matrix = Tensor({N, L});
  for (std::int64_t i = 0; i < N; ++i) {
    const std::int64_t r = out.preds.row(res.frame, i);
    const double na = row_norm(anchors, r);
    for (std::int64_t j = 0; j < L; ++j) {
      double dot = 0.0;
      for (std::int64_t c = 0; c < C; ++c) dot += anchors(r, c) * text(j, c);
      res.matrix(i, j) = dot / (na * row_norm(text, j));
    }
  }

  std::int64_t top_word = 0;
  for (std::int64_t j = 1; j < L; ++j)
    if (res.matrix(res.picked_query, j) > res.matrix(res.picked_query, top_word))
      top_word = j;
  for (const auto& es : s.entity_spans)
    if (top_word >= es.word_start && top_word <= es.word_end)
      res.top_word_in_span = true;
  return res;
}

double heatmap_in_span_rate(const ContFormer& model,
                            const data::DatasetManifest& m,
                            const std::string& out_dir) {
  std::map<int, std::string> id_to_word;
  for (const auto& [word, id] : m.vocab.token_to_id) id_to_word[id] = word;
  id_to_word[data::kPadId] = "<pad>";
  id_to_word[data::kUnkId] = "<unk>";

  if (!out_dir.empty()) fs::create_directories(out_dir);
  std::int64_t hits = 0, count = 0;
  for (const auto& s : m.samples) {
    if (s.entity_spans.empty()) continue;
    HeatmapResult r = alignment_heatmap(model, s);
    ++count;
    if (r.top_word_in_span) ++hits;
    if (out_dir.empty()) continue;

    std::vector<std::string> words;
    for (int tok : s.tokens) words.push_back(id_to_word.at(tok));
    std::vector<double> vals(r.matrix.data(),
                             r.matrix.data() + r.matrix.numel());
    write_svg_heatmap(out_dir + "/heatmap_" + s.video_id + ".svg",
                      s.video_id + " (frame " + std::to_string(r.frame) + ")",
                      vals, r.matrix.rows(), r.matrix.cols(), words,
                      r.picked_query);
    std::ofstream csv(out_dir + "/heatmap_" + s.video_id + ".csv");
    csv << "query";
    for (const auto& w : words) csv << "," << w;
    csv << "\n";
    for (std::int64_t i = 0; i < r.matrix.rows(); ++i) {
      csv << i << (i == r.picked_query ? "*" : "");
      for (std::int64_t j = 0; j < r.matrix.cols(); ++j)
        csv << "," << r.matrix(i, j);
      csv << "\n";
    }
  }
  if (count == 0)
    throw std::runtime_error("no samples carry entity spans");
  return static_cast<double>(hits) / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// sweep

std::vector<SweepRow> sweep(const Config& base, const data::SynthSpec& spec,
                            const std::string& axis,
                            const std::vector<std::int64_t>& values,
                            std::int64_t iterations,
                            const std::string& out_dir) {
  if (axis != "frames" && axis != "resolution")
    throw std::invalid_argument("sweep axis must be frames or resolution");
  std::vector<SweepRow> rows;
  for (std::int64_t v : values) {
    data::SynthSpec s2 = spec;
    if (axis == "frames")
      s2.num_frames = static_cast<int>(v);
    else
      s2.image_size = static_cast<int>(v);
    data::DatasetManifest m = data::synth_generate(s2);
    Trainer tr(base, m);
    tr.train_iterations(iterations);
    rows.push_back({axis, static_cast<double>(v), tr.evaluate_train()});
  }
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream csv(out_dir + "/sweep_" + axis + ".csv");
    csv << axis;
    for (double eta : base.eval.etas) csv << ",acc@" << eta;
    for (double theta : base.eval.thetas) csv << ",viou@" << theta;
    csv << ",m_iou,m_tiou,m_viou\n";
    for (const auto& r : rows) {
      csv << r.value;
      for (double eta : base.eval.etas)
        csv << "," << lookup_accuracy(r.report, eta);
      for (double theta : base.eval.thetas)
        csv << "," << r.report.viou_at.at(theta);
      csv << "," << r.report.m_iou << "," << r.report.m_tiou << ","
          << r.report.m_viou << "\n";
    }
  }
  return rows;
}

}  // namespace contformer
