#include <cmath>
#include <cstdint>
#include <vector>

#include "contformer/config.hpp"
#include "contformer/data.hpp"
#include "contformer/model.hpp"
#include "doctest.h"

using namespace contformer;

namespace {

Config tiny_config() {
  Config c;
  c.model.dim = 16;
  c.model.num_queries = 4;
  c.model.roi_bins = 2;
  c.backbone.patch = 16;
  c.encoder.layers = 1;
  c.encoder.heads = 2;
  c.encoder.ffn_dim = 32;
  c.decoder.layers = 1;
  c.decoder.heads = 2;
  c.train.seed = 5;
  return c;
}

data::SynthSpec tiny_spec(bool trimmed) {
  data::SynthSpec s;
  s.num_videos = 6;
  s.num_frames = trimmed ? 4 : 6;
  s.image_size = 32;
  s.min_distractors = 1;
  s.max_distractors = 1;
  s.trimmed = trimmed;
  s.min_visible = 2;
  s.max_visible = 4;
  s.seed = 91;
  return s;
}

std::vector<std::uint8_t> ones(std::size_t n) {
  return std::vector<std::uint8_t>(n, 1);
}

}  // namespace

TEST_CASE("forward wires every stage together with coherent shapes") {
  Config c = tiny_config();
  auto m = data::synth_generate(tiny_spec(true));
  ContFormer model(c, static_cast<std::int64_t>(m.vocab.size()));
  const auto& s = m.samples[0];

  auto out = model.forward(s.frames, s.tokens, ones(s.tokens.size()));
  const std::int64_t T = s.num_frames(), N = c.model.num_queries;
  CHECK(out.video.t == T);
  CHECK(out.video.h == 2);
  CHECK(out.video.w == 2);
  CHECK(out.memory.f == T * 4);
  CHECK(out.memory.l == static_cast<std::int64_t>(s.tokens.size()));
  REQUIRE(out.preds.boxes->val.rows() == T * N);
  REQUIRE(out.anchors->val.rows() == T * N);
  REQUIRE(out.anchors->val.cols() == c.model.dim);
  CHECK(out.preds.boxes->val.all_finite());
  CHECK(out.preds.confidence->val.all_finite());
  CHECK(out.anchors->val.all_finite());

  LossBundle loss = model.sample_loss(out, s);
  CHECK(std::isfinite(loss.report.total));
  CHECK(loss.report.total > 0.0);
  ag::backward(loss.total);
  CHECK(model.params().grad_norm() > 0.0);
  CHECK(model.vocab_size() == static_cast<std::int64_t>(m.vocab.size()));
}

TEST_CASE("the same seed builds the same model") {
  Config c = tiny_config();
  auto m = data::synth_generate(tiny_spec(true));
  const auto& s = m.samples[1];
  ContFormer a(c, static_cast<std::int64_t>(m.vocab.size()));
  ContFormer b(c, static_cast<std::int64_t>(m.vocab.size()));
  auto oa = a.forward(s.frames, s.tokens, ones(s.tokens.size()));
  auto ob = b.forward(s.frames, s.tokens, ones(s.tokens.size()));
  for (std::int64_t i = 0; i < oa.preds.boxes->val.numel(); ++i)
    CHECK(oa.preds.boxes->val[i] == ob.preds.boxes->val[i]);
  for (std::int64_t i = 0; i < oa.preds.confidence->val.numel(); ++i)
    CHECK(oa.preds.confidence->val[i] == ob.preds.confidence->val[i]);

  Config c2 = c;
  c2.train.seed = 6;
  ContFormer d(c2, static_cast<std::int64_t>(m.vocab.size()));
  auto od = d.forward(s.frames, s.tokens, ones(s.tokens.size()));
  double diff = 0.0;
  for (std::int64_t i = 0; i < oa.preds.boxes->val.numel(); ++i)
    diff = std::max(diff,
                    std::fabs(oa.preds.boxes->val[i] - od.preds.boxes->val[i]));
  CHECK(diff > 1e-9);
}

TEST_CASE("disabling ecl zeroes the entity part of the loss") {
  auto m = data::synth_generate(tiny_spec(true));
  const auto& s = m.samples[2];
  REQUIRE(!s.entity_spans.empty());

  Config on = tiny_config();
  on.train.ecl = true;
  ContFormer ma(on, static_cast<std::int64_t>(m.vocab.size()));
  auto ra = ma.sample_loss(
      ma.forward(s.frames, s.tokens, ones(s.tokens.size())), s);
  CHECK(ra.report.entity_part > 0.0);
  CHECK(std::fabs(ra.report.total -
                  (ra.report.match +
                   on.loss.entity * ra.report.entity_part)) <= 1e-9);

  Config off = on;
  off.train.ecl = false;
  ContFormer mb(off, static_cast<std::int64_t>(m.vocab.size()));
  auto rb = mb.sample_loss(
      mb.forward(s.frames, s.tokens, ones(s.tokens.size())), s);
  CHECK(rb.report.entity_part == 0.0);
  CHECK(rb.report.total == doctest::Approx(rb.report.match).epsilon(1e-12));
}

TEST_CASE("text padding in a batch leaves per-sample losses unchanged") {
  auto m = data::synth_generate(tiny_spec(true));
  // Two samples with different sentence lengths.
  std::int64_t i = 0, j = -1;
  for (std::int64_t k = 1; k < static_cast<std::int64_t>(m.samples.size());
       ++k)
    if (m.samples[static_cast<std::size_t>(k)].tokens.size() !=
        m.samples[0].tokens.size()) {
      j = k;
      break;
    }
  REQUIRE(j > 0);

  Config c = tiny_config();
  ContFormer model(c, static_cast<std::int64_t>(m.vocab.size()));
  auto batch = data::make_batch(m, {i, j});
  REQUIRE(batch.tokens[0].size() == batch.tokens[1].size());

  for (std::size_t b = 0; b < 2; ++b) {
    const auto& s = m.samples[static_cast<std::size_t>(
        batch.sample_index[b])];
    auto solo = model.forward(s.frames, s.tokens, ones(s.tokens.size()));
    auto padded = model.forward(batch.frames[b], batch.tokens[b],
                                batch.text_mask[b], batch.frame_mask[b]);
    const double lone = model.sample_loss(solo, s).report.total;
    const double lpad = model.sample_loss(padded, s).report.total;
    CHECK(std::fabs(lone - lpad) <= 1e-6);
  }
}

TEST_CASE("frame padding on untrimmed clips leaves the loss unchanged") {
  auto m = data::synth_generate(tiny_spec(false));
  const auto& s = m.samples[0];
  REQUIRE_FALSE(s.trimmed);

  Config c = tiny_config();
  ContFormer model(c, static_cast<std::int64_t>(m.vocab.size()));
  auto solo = model.forward(s.frames, s.tokens, ones(s.tokens.size()));
  const double lone = model.sample_loss(solo, s).report.total;

  // Append two blank frames and mask them off.
  const std::int64_t T = s.num_frames();
  const auto sh = s.frames.shape();
  Tensor wide = Tensor::zeros({T + 2, sh[1], sh[2], sh[3]});
  const std::int64_t per = sh[1] * sh[2] * sh[3];
  for (std::int64_t idx = 0; idx < T * per; ++idx) wide[idx] = s.frames[idx];
  std::vector<std::uint8_t> fmask(static_cast<std::size_t>(T + 2), 1);
  fmask[static_cast<std::size_t>(T)] = 0;
  fmask[static_cast<std::size_t>(T + 1)] = 0;

  auto padded = model.forward(wide, s.tokens, ones(s.tokens.size()), fmask);
  CHECK(padded.preds.t == T + 2);
  const double lpad = model.sample_loss(padded, s).report.total;
  CHECK(std::fabs(lone - lpad) <= 1e-6);
}

TEST_CASE("the content-agnostic ablation runs end to end") {
  auto m = data::synth_generate(tiny_spec(true));
  const auto& s = m.samples[3];
  Config c = tiny_config();
  c.model.cqg = false;
  ContFormer model(c, static_cast<std::int64_t>(m.vocab.size()));
  CHECK_FALSE(model.query_gen().content_aware());
  auto out = model.forward(s.frames, s.tokens, ones(s.tokens.size()));
  CHECK_FALSE(out.queries.content_aware);
  LossBundle loss = model.sample_loss(out, s);
  CHECK(std::isfinite(loss.report.total));
  ag::backward(loss.total);
  CHECK(model.params().grad_norm() > 0.0);
}

TEST_CASE("region-pooled anchors are supported and guarded") {
  auto m = data::synth_generate(tiny_spec(true));
  const auto& s = m.samples[4];
  Config c = tiny_config();
  c.model.anchor_source = "roi";
  ContFormer model(c, static_cast<std::int64_t>(m.vocab.size()));
  auto out = model.forward(s.frames, s.tokens, ones(s.tokens.size()));
  REQUIRE(out.anchors->val.rows() == out.decoded.t * out.decoded.n);
  CHECK(out.anchors->val.all_finite());
  // The anchors read the memory through the learned regions.
  ag::backward(ag::sum_all(out.anchors));
  CHECK(model.params().find("query.bank.regions")->grad.max_abs() > 0.0);

  Config bad = tiny_config();
  bad.model.cqg = false;
  bad.model.anchor_source = "roi";
  CHECK_THROWS(ContFormer(bad, static_cast<std::int64_t>(m.vocab.size())));

  Config bad2 = tiny_config();
  bad2.model.cqg = false;
  bad2.model.box_mode = "delta";
  CHECK_THROWS(ContFormer(bad2, static_cast<std::int64_t>(m.vocab.size())));
}

TEST_CASE("delta box mode decodes boxes off the region bank") {
  auto m = data::synth_generate(tiny_spec(true));
  const auto& s = m.samples[5];
  Config c = tiny_config();
  c.model.box_mode = "delta";
  ContFormer model(c, static_cast<std::int64_t>(m.vocab.size()));
  auto out = model.forward(s.frames, s.tokens, ones(s.tokens.size()));
  CHECK(out.preds.boxes->val.all_finite());
  for (std::int64_t i = 0; i < out.preds.boxes->val.numel(); ++i) {
    CHECK(out.preds.boxes->val[i] > 0.0);
    CHECK(out.preds.boxes->val[i] < 1.0);
  }
  LossBundle loss = model.sample_loss(out, s);
  ag::backward(loss.total);
  CHECK(model.params().find("query.bank.regions")->grad.max_abs() > 0.0);
}
