#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "contformer/autograd.hpp"
#include "contformer/data.hpp"
#include "contformer/decoder.hpp"
#include "contformer/geometry.hpp"
#include "contformer/losses.hpp"
#include "contformer/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace contformer;

namespace {

double softplus_ref(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

ag::Var box_leaf(double cx, double cy, double w, double h,
                 bool track_grad = false) {
  Tensor b({1, 4});
  b(0, 0) = cx;
  b(0, 1) = cy;
  b(0, 2) = w;
  b(0, 3) = h;
  return ag::leaf(std::move(b), track_grad);
}

// A unit-circle text row whose cosine against the (1, 0) anchor is `cosv`.
void set_cos_row(Tensor& text, std::int64_t row, double cosv, double scale) {
  text(row, 0) = cosv * scale;
  text(row, 1) = std::sqrt(std::max(0.0, 1.0 - cosv * cosv)) * scale;
}

Predictions hand_preds(std::int64_t t, std::int64_t n, bool track_grad) {
  Predictions p;
  p.t = t;
  p.n = n;
  p.boxes = ag::leaf(Tensor::full({t * n, 4}, 0.5), track_grad);
  p.temporal_logits = ag::leaf(Tensor::zeros({t * n, 2}), track_grad);
  p.confidence = ag::leaf(Tensor::zeros({t * n, 1}), track_grad);
  return p;
}

}  // namespace

TEST_CASE("loss_box vanishes on an exact prediction and scales linearly") {
  LossWeights w;
  geom::Box gt{0.4, 0.6, 0.3, 0.2};
  ag::Var exact = box_leaf(0.4, 0.6, 0.3, 0.2);
  CHECK(loss_box(exact, gt, w)->val[0] == doctest::Approx(0.0).epsilon(1e-12));

  ag::Var off = box_leaf(0.5, 0.5, 0.25, 0.25);
  LossWeights only_l1 = w;
  only_l1.giou = 0.0;
  LossWeights doubled = only_l1;
  doubled.l1 *= 2.0;
  CHECK(loss_box(off, gt, doubled)->val[0] ==
        doctest::Approx(2.0 * loss_box(off, gt, only_l1)->val[0])
            .epsilon(1e-12));

  // The GIoU part agrees with the geometry primitive.
  LossWeights only_giou = w;
  only_giou.l1 = 0.0;
  only_giou.giou = 1.0;
  const double want =
      1.0 - geom::box_giou(geom::Box{0.5, 0.5, 0.25, 0.25}, gt);
  CHECK(loss_box(off, gt, only_giou)->val[0] ==
        doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("loss_box gradients match finite differences") {
  Rng rng(3);
  LossWeights w;
  int done = 0;
  while (done < 25) {
    const geom::Box gt{rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7),
                       rng.uniform(0.2, 0.5), rng.uniform(0.2, 0.5)};
    std::vector<double> x0 = {rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7),
                              rng.uniform(0.2, 0.5), rng.uniform(0.2, 0.5)};
    // L1 and the GIoU edge selections are only piecewise smooth; keep the
    // probe away from the kinks so central differences are trustworthy.
    const double margin = 1e-3;
    bool ok = std::fabs(x0[0] - gt.cx) > margin &&
              std::fabs(x0[1] - gt.cy) > margin &&
              std::fabs(x0[2] - gt.w) > margin &&
              std::fabs(x0[3] - gt.h) > margin;
    auto corners = [](const std::vector<double>& b) {
      return std::vector<double>{b[0] - b[2] / 2, b[0] + b[2] / 2,
                                 b[1] - b[3] / 2, b[1] + b[3] / 2};
    };
    const auto ca = corners(x0);
    const std::vector<double> cb = {gt.x1(), gt.x2(), gt.y1(), gt.y2()};
    for (double e1 : ca)
      for (double e2 : cb) ok = ok && std::fabs(e1 - e2) > margin;
    if (!ok) continue;
    ++done;

    ag::Var box = box_leaf(x0[0], x0[1], x0[2], x0[3], true);
    ag::backward(loss_box(box, gt, w));
    auto f = [&](const std::vector<double>& x) {
      ag::NoGradGuard off;
      return loss_box(box_leaf(x[0], x[1], x[2], x[3]), gt, w)->val[0];
    };
    for (std::size_t i = 0; i < 4; ++i)
      CHECK(oracles::grad_close(box->grad(0, static_cast<std::int64_t>(i)),
                                oracles::central_diff(f, x0, i), 1e-4));
  }
}

TEST_CASE("degenerate boxes are rejected by the giou loss") {
  CHECK_THROWS(giou_loss(box_leaf(0.5, 0.5, 0.0, 0.3),
                         geom::Box{0.5, 0.5, 0.0, 0.3}));
  Tensor bad({2, 4});
  CHECK_THROWS(giou_loss(ag::leaf(bad, false), geom::Box{0.5, 0.5, 0.3, 0.3}));
}

TEST_CASE("temporal targets are one-hot or smoothed distributions") {
  Tensor hard = temporal_target(2, 5, 0.0);
  for (std::int64_t t = 0; t < 5; ++t)
    CHECK(hard(0, t) == (t == 2 ? 1.0 : 0.0));

  Tensor soft = temporal_target(2, 5, 1.5);
  double sum = 0.0;
  for (std::int64_t t = 0; t < 5; ++t) {
    CHECK(soft(0, t) > 0.0);
    sum += soft(0, t);
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(soft(0, 2) > soft(0, 1));
  CHECK(soft(0, 1) > soft(0, 0));
  CHECK(soft(0, 1) == doctest::Approx(soft(0, 3)).epsilon(1e-12));

  CHECK_THROWS(temporal_target(5, 5, 0.0));
  CHECK_THROWS(temporal_target(-1, 5, 0.0));
}

TEST_CASE("loss_time is zero at the target and closed-form for uniform") {
  LossWeights w;
  const std::int64_t T = 6;
  geom::TemporalSpan span{1, 4};

  Tensor s0 = Tensor::zeros({1, T});
  s0(0, 1) = 1.0;
  Tensor e0 = Tensor::zeros({1, T});
  e0(0, 4) = 1.0;
  ag::Var zero = loss_time(ag::leaf(s0, false), ag::leaf(e0, false), span, w);
  CHECK(zero->val[0] == doctest::Approx(0.0).epsilon(1e-12));

  ag::Var uni = ag::leaf(Tensor::full({1, T}, 1.0 / T), false);
  ag::Var lt = loss_time(uni, uni, span, w);
  CHECK(lt->val[0] ==
        doctest::Approx(w.kl * 2.0 * std::log(double(T))).epsilon(1e-12));

  Tensor bad = Tensor::full({1, T}, 0.5);
  CHECK_THROWS(loss_time(ag::leaf(bad, false), uni, span, w));
}

TEST_CASE("loss_time gradients match finite differences through softmax") {
  Rng rng(5);
  LossWeights w;
  w.time_smoothing = 0.8;
  const std::int64_t T = 5;
  geom::TemporalSpan span{1, 3};
  std::vector<double> x0(2 * static_cast<std::size_t>(T));
  for (double& v : x0) v = rng.normal(0, 1);

  auto build = [&](const std::vector<double>& x, bool track) {
    Tensor sl({1, T}), el({1, T});
    for (std::int64_t t = 0; t < T; ++t) {
      sl(0, t) = x[static_cast<std::size_t>(t)];
      el(0, t) = x[static_cast<std::size_t>(T + t)];
    }
    auto s = ag::leaf(std::move(sl), track);
    auto e = ag::leaf(std::move(el), track);
    return std::make_tuple(s, e,
                           loss_time(ag::softmax_rows(s), ag::softmax_rows(e),
                                     span, w));
  };
  auto [sv, ev, loss] = build(x0, true);
  ag::backward(loss);
  auto f = [&](const std::vector<double>& x) {
    ag::NoGradGuard off;
    return std::get<2>(build(x, false))->val[0];
  };
  for (std::size_t i = 0; i < x0.size(); ++i) {
    const double a = i < static_cast<std::size_t>(T)
                         ? sv->grad(0, static_cast<std::int64_t>(i))
                         : ev->grad(0, static_cast<std::int64_t>(i) - T);
    CHECK(oracles::grad_close(a, oracles::central_diff(f, x0, i), 1e-4));
  }
}

TEST_CASE("loss_entity singleton and symmetric fixtures have closed forms") {
  Tensor anchor({1, 2});
  anchor(0, 0) = 1.0;
  anchor(0, 1) = 0.0;
  ag::Var a = ag::leaf(anchor, false);

  Tensor one({1, 2});
  set_cos_row(one, 0, 0.4, 2.0);
  CHECK(loss_entity(a, ag::leaf(one, false), {0}, {1}, 0.07)->val[0] ==
        doctest::Approx(0.0).epsilon(1e-12));

  // Four words all at the same angle from the anchor: ideal confusion.
  Tensor same({4, 2});
  for (std::int64_t i = 0; i < 4; ++i) set_cos_row(same, i, 0.6, 1.0 + i);
  CHECK(loss_entity(a, ag::leaf(same, false), {1}, {1, 1, 1, 1}, 0.07)
            ->val[0] == doctest::Approx(std::log(4.0)).epsilon(1e-9));

  // Similarity logits (2, 1, 0) for the positive word 0.
  Tensor tri({3, 2});
  set_cos_row(tri, 0, 1.0, 3.0);
  set_cos_row(tri, 1, 0.5, 1.0);
  set_cos_row(tri, 2, 0.0, 2.0);
  const double want = -(2.0 - std::log(std::exp(2.0) + std::exp(1.0) + 1.0));
  ag::Var got = loss_entity(a, ag::leaf(tri, false), {0}, {1, 1, 1}, 0.5);
  CHECK(got->val[0] == doctest::Approx(want).epsilon(1e-9));
  CHECK(got->val[0] == doctest::Approx(0.40760596444438).epsilon(1e-6));
}

TEST_CASE("loss_entity excludes padded words from the denominator") {
  Tensor anchor({1, 2});
  anchor(0, 0) = 1.0;
  anchor(0, 1) = 0.0;
  ag::Var a = ag::leaf(anchor, false);

  Tensor two({2, 2});
  set_cos_row(two, 0, 0.5, 1.0);
  set_cos_row(two, 1, 0.2, 1.0);
  const double base =
      loss_entity(a, ag::leaf(two, false), {0}, {1, 1}, 0.07)->val[0];

  // A masked third word aligned perfectly with the anchor must not matter.
  Tensor three({3, 2});
  set_cos_row(three, 0, 0.5, 1.0);
  set_cos_row(three, 1, 0.2, 1.0);
  set_cos_row(three, 2, 1.0, 1.0);
  CHECK(loss_entity(a, ag::leaf(three, false), {0}, {1, 1, 0}, 0.07)->val[0] ==
        doctest::Approx(base).epsilon(1e-12));

  CHECK_THROWS(loss_entity(a, ag::leaf(three, false), {}, {1, 1, 0}, 0.07));
  CHECK_THROWS(loss_entity(a, ag::leaf(three, false), {2}, {1, 1, 0}, 0.07));
  CHECK_THROWS(loss_entity(a, ag::leaf(three, false), {3}, {1, 1, 0}, 0.07));
}

TEST_CASE("loss_entity decreases as the positive alignment improves") {
  Tensor anchor({1, 2});
  anchor(0, 0) = 1.0;
  anchor(0, 1) = 0.0;
  ag::Var a = ag::leaf(anchor, false);
  double prev = 1e9;
  for (double cosv : {0.1, 0.4, 0.7, 0.95}) {
    Tensor text({3, 2});
    set_cos_row(text, 0, cosv, 1.0);
    set_cos_row(text, 1, 0.3, 1.0);
    set_cos_row(text, 2, -0.2, 1.0);
    const double cur =
        loss_entity(a, ag::leaf(text, false), {0}, {1, 1, 1}, 0.07)->val[0];
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("loss_entity gradients match finite differences") {
  Rng rng(7);
  const std::int64_t L = 4, C = 3;
  std::vector<double> x0(static_cast<std::size_t>(C + L * C));
  for (double& v : x0) v = rng.normal(0, 1);
  const std::vector<std::uint8_t> mask = {1, 1, 1, 0};
  const std::vector<std::int64_t> pos = {0, 2};

  auto build = [&](const std::vector<double>& x, bool track) {
    Tensor av({1, C}), tv({L, C});
    for (std::int64_t c = 0; c < C; ++c) av(0, c) = x[static_cast<std::size_t>(c)];
    for (std::int64_t i = 0; i < L * C; ++i)
      tv[i] = x[static_cast<std::size_t>(C + i)];
    auto a = ag::leaf(std::move(av), track);
    auto t = ag::leaf(std::move(tv), track);
    return std::make_tuple(a, t, loss_entity(a, t, pos, mask, 0.3));
  };
  auto [av, tv, loss] = build(x0, true);
  ag::backward(loss);
  auto f = [&](const std::vector<double>& x) {
    ag::NoGradGuard off;
    return std::get<2>(build(x, false))->val[0];
  };
  for (std::size_t i = 0; i < x0.size(); ++i) {
    const double analytic =
        i < static_cast<std::size_t>(C)
            ? av->grad[static_cast<std::int64_t>(i)]
            : tv->grad[static_cast<std::int64_t>(i) - C];
    CHECK(oracles::grad_close(analytic, oracles::central_diff(f, x0, i),
                              1e-4));
  }
}

TEST_CASE("match_cost favors the faithful query") {
  LossWeights w;
  Predictions p = hand_preds(1, 2, false);
  const geom::Box gt{0.25, 0.25, 0.2, 0.2};
  // Query 0 sits exactly on the target with near-certain confidence.
  p.boxes->val(0, 0) = gt.cx;
  p.boxes->val(0, 1) = gt.cy;
  p.boxes->val(0, 2) = gt.w;
  p.boxes->val(0, 3) = gt.h;
  p.confidence->val(0, 0) = 40.0;
  // Query 1 is maximally confident but spatially disjoint.
  p.boxes->val(1, 0) = 0.75;
  p.boxes->val(1, 1) = 0.75;
  p.boxes->val(1, 2) = 0.2;
  p.boxes->val(1, 3) = 0.2;
  p.confidence->val(1, 0) = std::log(0.99 / 0.01);

  Tensor cost = match_cost(p, 0, {gt}, {}, w);
  REQUIRE(cost.rows() == 2);
  REQUIRE(cost.cols() == 1);
  CHECK(cost(0, 0) <= 1e-12);
  CHECK(cost(1, 0) > 1.0);
  CHECK(assign(cost).assignment[0] == 0);

  // Hand total for the disjoint query under the default weights.
  const double giou = geom::box_giou(geom::Box{0.75, 0.75, 0.2, 0.2}, gt);
  const double want = softplus_ref(-std::log(0.99 / 0.01)) +
                      w.giou * (1.0 - giou) + w.l1 * 1.0;
  CHECK(cost(1, 0) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("match_cost adds the temporal term only when spans are given") {
  LossWeights w;
  Predictions p = hand_preds(4, 3, false);
  for (std::int64_t i = 0; i < p.boxes->val.numel(); ++i)
    p.boxes->val[i] = 0.4;
  const geom::Box gt{0.5, 0.5, 0.4, 0.4};
  geom::TemporalSpan span{1, 2};

  Tensor plain = match_cost(p, 1, {gt}, {}, w);
  Tensor timed = match_cost(p, 1, {gt}, {&span}, w);
  // Zero logits give uniform span distributions, so each of the two KL terms
  // is exactly log T.
  for (std::int64_t i = 0; i < 3; ++i)
    CHECK(timed(i, 0) - plain(i, 0) ==
          doctest::Approx(w.kl * 2.0 * std::log(4.0)).epsilon(1e-9));

  CHECK_THROWS(match_cost(p, 0, {}, {}, w));
  CHECK_THROWS(match_cost(p, 0, {gt}, {&span, &span}, w));
  CHECK_THROWS(match_cost(p, 0, {gt}, {}, w, 9));
}

TEST_CASE("assign reduces to the argmin for a single target") {
  Tensor cost({4, 1});
  cost(0, 0) = 0.8;
  cost(1, 0) = 0.2;
  cost(2, 0) = 0.5;
  cost(3, 0) = 0.9;
  MatchResult r = assign(cost);
  CHECK(r.assignment == std::vector<std::int64_t>{1});
  CHECK(r.cost == doctest::Approx(0.2).epsilon(1e-12));

  Tensor wide({1, 2});
  CHECK_THROWS(assign(wide));
}

TEST_CASE("assign matches brute-force enumeration on random matrices") {
  Rng rng(11);
  for (int it = 0; it < 1000; ++it) {
    const std::int64_t n = rng.uniform_int(1, 6);
    const std::int64_t k = rng.uniform_int(1, n);
    Tensor cost({n, k});
    for (std::int64_t i = 0; i < cost.numel(); ++i)
      cost[i] = rng.uniform(0.0, 10.0);

    std::vector<std::vector<double>> by_target(
        static_cast<std::size_t>(k),
        std::vector<double>(static_cast<std::size_t>(n)));
    for (std::int64_t q = 0; q < n; ++q)
      for (std::int64_t t = 0; t < k; ++t)
        by_target[static_cast<std::size_t>(t)][static_cast<std::size_t>(q)] =
            cost(q, t);
    auto [best, picks] = oracles::brute_force_assign(by_target);

    MatchResult r = assign(cost);
    REQUIRE(r.assignment.size() == static_cast<std::size_t>(k));
    CHECK(r.cost == doctest::Approx(best).epsilon(1e-9));
    for (std::int64_t t = 0; t < k; ++t)
      CHECK(r.assignment[static_cast<std::size_t>(t)] ==
            picks[static_cast<std::size_t>(t)]);
  }
}

TEST_CASE("assign breaks exact ties lexicographically") {
  Tensor flat = Tensor::full({4, 3}, 1.0);
  MatchResult r = assign(flat);
  CHECK(r.assignment == std::vector<std::int64_t>{0, 1, 2});

  // Two identical best rows: the earlier target takes the earlier query.
  Tensor twin({3, 2});
  twin(0, 0) = 0.5;
  twin(0, 1) = 0.5;
  twin(1, 0) = 0.5;
  twin(1, 1) = 0.5;
  twin(2, 0) = 2.0;
  twin(2, 1) = 2.0;
  MatchResult r2 = assign(twin);
  CHECK(r2.assignment == std::vector<std::int64_t>{0, 1});
}

TEST_CASE("loss_total matches a scalar hand computation on a small fixture") {
  LossWeights w;
  data::GroundingSample s;
  s.video_id = "fix";
  s.frames = Tensor::zeros({2, 3, 8, 8});
  s.trimmed = true;
  const geom::Box g0{0.5, 0.5, 0.4, 0.4};
  const geom::Box g1{0.6, 0.5, 0.4, 0.4};
  s.gt_tube = geom::Tube({0, 1}, {{0, g0}, {1, g1}});

  Predictions p = hand_preds(2, 2, false);
  // Frame 0: query 0 is exact, query 1 is the far-corner box.
  p.boxes->val(p.row(0, 0), 0) = 0.5;
  p.boxes->val(p.row(0, 0), 1) = 0.5;
  p.boxes->val(p.row(0, 0), 2) = 0.4;
  p.boxes->val(p.row(0, 0), 3) = 0.4;
  p.boxes->val(p.row(0, 1), 0) = 0.2;
  p.boxes->val(p.row(0, 1), 1) = 0.2;
  p.boxes->val(p.row(0, 1), 2) = 0.2;
  p.boxes->val(p.row(0, 1), 3) = 0.2;
  p.confidence->val(p.row(0, 0), 0) = 0.3;
  p.confidence->val(p.row(0, 1), 0) = -0.2;
  // Frame 1: query 1 is exact, query 0 shares the center with half the height.
  p.boxes->val(p.row(1, 0), 0) = 0.6;
  p.boxes->val(p.row(1, 0), 1) = 0.5;
  p.boxes->val(p.row(1, 0), 2) = 0.4;
  p.boxes->val(p.row(1, 0), 3) = 0.2;
  p.boxes->val(p.row(1, 1), 0) = 0.6;
  p.boxes->val(p.row(1, 1), 1) = 0.5;
  p.boxes->val(p.row(1, 1), 2) = 0.4;
  p.boxes->val(p.row(1, 1), 3) = 0.4;
  p.confidence->val(p.row(1, 0), 0) = 2.0;
  p.confidence->val(p.row(1, 1), 0) = 1.0;

  SampleLossInputs in;
  in.preds = &p;
  in.sample = &s;
  std::map<std::int64_t, std::vector<std::int64_t>> matched;
  LossBundle got = loss_total(in, w, &matched);

  REQUIRE(matched.size() == 2);
  CHECK(matched[0] == std::vector<std::int64_t>{0});
  CHECK(matched[1] == std::vector<std::int64_t>{1});

  // Frame 0 by hand: the matched query is exact, so only its confidence and
  // the unmatched query's background term remain. The corner box of query 1
  // touches the target at one point: GIoU = -(0.36 - 0.2) / 0.36.
  const double f0 = softplus_ref(-0.3) + softplus_ref(-0.2);
  // Frame 1 by hand: the half-height box has IoU 1/2 and a tight enclosure,
  // so its GIoU is exactly 0.5; it still loses the match on box cost.
  const double f1 = softplus_ref(-1.0) + softplus_ref(2.0);
  const double want_match = (f0 + f1) / 2.0;
  CHECK(got.report.match == doctest::Approx(want_match).epsilon(1e-12));
  CHECK(got.report.entity_part == 0.0);
  CHECK(got.report.total == doctest::Approx(want_match).epsilon(1e-12));
  CHECK(got.total->val[0] == doctest::Approx(want_match).epsilon(1e-12));
  CHECK(got.report.giou_part == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(got.report.l1_part == doctest::Approx(0.0).epsilon(1e-12));

  // Sanity on the frame-1 runner-up cost quoted above.
  Tensor c1 = match_cost(p, 1, {g1}, {}, w);
  CHECK(c1(0, 0) == doctest::Approx(softplus_ref(-2.0) + w.giou * 0.5 +
                                    w.l1 * 0.2)
                        .epsilon(1e-12));
}

TEST_CASE("loss_total reports the exact weighted-sum identity") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    LossWeights w;
    w.giou = rng.uniform(0.5, 4.0);
    w.l1 = rng.uniform(0.5, 8.0);
    w.kl = rng.uniform(0.5, 8.0);
    w.entity = rng.uniform(0.1, 3.0);
    w.tau = rng.uniform(0.05, 1.0);

    const std::int64_t T = 3, N = 3, L = 4, C = 6;
    data::GroundingSample s;
    s.frames = Tensor::zeros({T, 3, 8, 8});
    s.trimmed = (trial % 2 == 0);
    std::map<std::int64_t, geom::Box> boxes;
    for (std::int64_t t = 1; t <= 2; ++t)
      boxes[t] = geom::Box{rng.uniform(0.35, 0.65), rng.uniform(0.35, 0.65),
                           rng.uniform(0.2, 0.4), rng.uniform(0.2, 0.4)};
    s.gt_tube = geom::Tube({1, 2}, std::move(boxes));
    s.entity_spans.push_back({1, 2, "e0"});

    Predictions p = hand_preds(T, N, false);
    for (std::int64_t i = 0; i < p.boxes->val.numel(); ++i)
      p.boxes->val[i] = rng.uniform(0.25, 0.75);
    for (std::int64_t i = 0; i < p.confidence->val.numel(); ++i)
      p.confidence->val[i] = rng.normal(0, 1);
    for (std::int64_t i = 0; i < p.temporal_logits->val.numel(); ++i)
      p.temporal_logits->val[i] = rng.normal(0, 1);

    Tensor anchors({T * N, C}), text({L, C});
    for (std::int64_t i = 0; i < anchors.numel(); ++i)
      anchors[i] = rng.normal(0, 1);
    for (std::int64_t i = 0; i < text.numel(); ++i) text[i] = rng.normal(0, 1);
    ag::Var av = ag::leaf(std::move(anchors), false);
    ag::Var txt = ag::leaf(std::move(text), false);
    std::vector<std::uint8_t> mask = {1, 1, 1, 1};

    SampleLossInputs in;
    in.preds = &p;
    in.anchors = &av;
    in.text = &txt;
    in.text_mask = &mask;
    in.sample = &s;
    LossBundle got = loss_total(in, w);
    CHECK(std::fabs(got.report.total -
                    (got.report.match + w.entity * got.report.entity_part)) <=
          1e-9);
    CHECK(got.report.entity_part > 0.0);
    CHECK(std::isfinite(got.report.total));

    LossWeights wz = w;
    wz.entity = 0.0;
    LossBundle zero = loss_total(in, wz);
    CHECK(zero.report.total == doctest::Approx(zero.report.match)
                                   .epsilon(1e-12));
  }
}

TEST_CASE("disabling background supervision only touches unmatched queries") {
  data::GroundingSample s;
  s.frames = Tensor::zeros({2, 3, 8, 8});
  s.trimmed = true;
  s.gt_tube = geom::Tube({0, 1}, {{0, geom::Box{0.5, 0.5, 0.4, 0.4}},
                                  {1, geom::Box{0.6, 0.5, 0.4, 0.4}}});

  auto run = [&](bool background) {
    LossWeights w;
    w.background = background;
    Predictions p = hand_preds(2, 2, true);
    p.boxes->val(p.row(0, 0), 2) = 0.41;
    p.boxes->val(p.row(1, 1), 0) = 0.59;
    p.confidence->val(p.row(0, 0), 0) = 0.5;
    p.confidence->val(p.row(1, 1), 0) = 0.4;
    SampleLossInputs in;
    in.preds = &p;
    in.sample = &s;
    LossBundle bundle = loss_total(in, w);
    ag::backward(bundle.total);
    return std::make_pair(p.confidence->grad, p.boxes->grad);
  };
  auto [conf_on, box_on] = run(true);
  auto [conf_off, box_off] = run(false);

  // Matched rows (0, 0) and (1, 1) keep identical confidence gradients.
  CHECK(conf_on(0, 0) == doctest::Approx(conf_off(0, 0)).epsilon(1e-12));
  CHECK(conf_on(3, 0) == doctest::Approx(conf_off(3, 0)).epsilon(1e-12));
  // Unmatched rows lose their gradient entirely without the background term.
  CHECK(conf_off(1, 0) == 0.0);
  CHECK(conf_off(2, 0) == 0.0);
  CHECK(conf_on(1, 0) != 0.0);
  CHECK(conf_on(2, 0) != 0.0);
  for (std::int64_t i = 0; i < box_on.numel(); ++i)
    CHECK(box_on[i] == doctest::Approx(box_off[i]).epsilon(1e-12));
}

TEST_CASE("untrimmed samples supervise the span distributions") {
  LossWeights w;
  data::GroundingSample s;
  s.frames = Tensor::zeros({4, 3, 8, 8});
  s.trimmed = false;
  s.gt_tube = geom::Tube({1, 2}, {{1, geom::Box{0.5, 0.5, 0.4, 0.4}},
                                  {2, geom::Box{0.5, 0.5, 0.4, 0.4}}});

  Predictions p = hand_preds(4, 2, true);
  SampleLossInputs in;
  in.preds = &p;
  in.sample = &s;
  LossBundle bundle = loss_total(in, w);
  CHECK(bundle.report.time_part > 0.0);
  // Uniform logits against the one-hot target: each KL is log T.
  CHECK(bundle.report.time_part ==
        doctest::Approx(w.kl * 2.0 * std::log(4.0)).epsilon(1e-9));
  ag::backward(bundle.total);
  CHECK(p.temporal_logits->grad.max_abs() > 0.0);

  // A trimmed twin has no temporal term and no temporal gradient.
  data::GroundingSample st = s;
  st.trimmed = true;
  Predictions pt = hand_preds(4, 2, true);
  SampleLossInputs int_;
  int_.preds = &pt;
  int_.sample = &st;
  LossBundle trimmed = loss_total(int_, w);
  CHECK(trimmed.report.time_part == 0.0);
  ag::backward(trimmed.total);
  CHECK(pt.temporal_logits->grad.numel() == 0);
}
