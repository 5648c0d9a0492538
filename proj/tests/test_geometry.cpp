#include <cmath>

#include "doctest.h"

#include "contformer/geometry.hpp"
#include "contformer/rng.hpp"
#include "oracles.hpp"

using namespace contformer;
using geom::Box;
using geom::TemporalSpan;
using geom::Tube;

namespace {

Box corners(double x1, double y1, double x2, double y2) {
  return Box::from_corners(x1, y1, x2, y2);
}

Tube const_tube(std::int64_t s, std::int64_t e, const Box& b) {
  std::map<std::int64_t, Box> m;
  for (std::int64_t t = s; t <= e; ++t) m[t] = b;
  return Tube({s, e}, std::move(m));
}

}  // namespace

TEST_CASE("box_iou basics") {
  Box unit = corners(0, 0, 1, 1);
  CHECK(geom::box_iou(unit, unit) == doctest::Approx(1.0));

  CHECK(geom::box_iou(corners(0, 0, .2, .2), corners(.5, .5, .7, .7)) == 0.0);

  // overlapping corner case, analytic value 1/7
  const double v = geom::box_iou(corners(0, 0, .2, .2), corners(.1, .1, .3, .3));
  CHECK(v == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
  const auto r = oracles::raster_iou(corners(0, 0, .2, .2),
                                     corners(.1, .1, .3, .3));
  CHECK(std::fabs(v - r.iou) < 1e-3);
}

TEST_CASE("box_iou degenerate pair warns and returns 0") {
  Box point{0.5, 0.5, 0.0, 0.0};
  bool warn = false;
  CHECK(geom::box_iou(point, point, &warn) == 0.0);
  CHECK(warn);
  // one degenerate box against a real box is just IoU 0, no warning
  warn = false;
  CHECK(geom::box_iou(point, corners(0, 0, 1, 1), &warn) == 0.0);
  CHECK_FALSE(warn);
}

TEST_CASE("box_giou basics") {
  Box a = corners(0, 0, .1, .1);
  Box b = corners(.2, .2, .3, .3);
  CHECK(geom::box_giou(a, a) == doctest::Approx(1.0));
  CHECK(geom::box_giou(a, b) == doctest::Approx(-7.0 / 9.0).epsilon(1e-12));

  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    Box p{rng.uniform(.2, .8), rng.uniform(.2, .8), rng.uniform(.05, .4),
          rng.uniform(.05, .4)};
    Box q{rng.uniform(.2, .8), rng.uniform(.2, .8), rng.uniform(.05, .4),
          rng.uniform(.05, .4)};
    CHECK(geom::box_giou(p, q) <= geom::box_iou(p, q) + 1e-12);
    CHECK(geom::box_giou(p, q) > -1.0);
  }
}

TEST_CASE("IoU translation invariance and GI0U scale invariance") {
  Rng rng(9);
  for (int i = 0; i < 300; ++i) {
    Box a{rng.uniform(.3, .6), rng.uniform(.3, .6), rng.uniform(.05, .3),
          rng.uniform(.05, .3)};
    Box b{rng.uniform(.3, .6), rng.uniform(.3, .6), rng.uniform(.05, .3),
          rng.uniform(.05, .3)};
    const double dx = rng.uniform(-.2, .2), dy = rng.uniform(-.2, .2);
    Box a2{a.cx + dx, a.cy + dy, a.w, a.h};
    Box b2{b.cx + dx, b.cy + dy, b.w, b.h};
    CHECK(std::fabs(geom::box_iou(a, b) - geom::box_iou(a2, b2)) < 1e-12);
    CHECK(std::fabs(geom::box_giou(a, b) - geom::box_giou(a2, b2)) < 1e-12);

    const double s = rng.uniform(0.1, 5.0);
    Box as{a.cx * s, a.cy * s, a.w * s, a.h * s};
    Box bs{b.cx * s, b.cy * s, b.w * s, b.h * s};
    CHECK(std::fabs(geom::box_giou(a, b) - geom::box_giou(as, bs)) < 1e-9);
  }
}

TEST_CASE("box_iou agrees with rasterization oracle on random pairs") {
  Rng rng(2024);
  double worst = 0.0;
  for (int i = 0; i < 2000; ++i) {
    Box a{rng.uniform(.25, .75), rng.uniform(.25, .75), rng.uniform(.15, .5),
          rng.uniform(.15, .5)};
    Box b{a.cx + rng.uniform(-.15, .15), a.cy + rng.uniform(-.15, .15),
          rng.uniform(.15, .5), rng.uniform(.15, .5)};
    const auto r = oracles::raster_iou(a, b);
    worst = std::max(worst, std::fabs(geom::box_iou(a, b) - r.iou));
    worst = std::max(worst, std::fabs(geom::box_giou(a, b) - r.giou));
  }
  CHECK(worst < 2e-3);
}

TEST_CASE("temporal_iou on inclusive frame spans") {
  CHECK(geom::temporal_iou({0, 4}, {0, 4}) == doctest::Approx(1.0));
  CHECK(geom::temporal_iou({0, 4}, {5, 9}) == 0.0);
  CHECK(geom::temporal_iou({2, 5}, {4, 7}) == doctest::Approx(2.0 / 6.0));

  Rng rng(31);
  for (int i = 0; i < 500; ++i) {
    TemporalSpan a{rng.uniform_int(0, 20), 0};
    a.end_frame = a.start_frame + rng.uniform_int(0, 15);
    TemporalSpan b{rng.uniform_int(0, 20), 0};
    b.end_frame = b.start_frame + rng.uniform_int(0, 15);
    CHECK(geom::temporal_iou(a, b) ==
          doctest::Approx(oracles::enum_temporal_iou(a, b)).epsilon(1e-12));
    CHECK(geom::temporal_iou(a, b) ==
          doctest::Approx(geom::temporal_iou(b, a)).epsilon(1e-12));
  }
}

TEST_CASE("viou formula") {
  Box b = corners(.1, .1, .4, .4);
  CHECK(geom::viou(const_tube(0, 9, b), const_tube(0, 9, b)) ==
        doctest::Approx(1.0));
  CHECK(geom::viou(const_tube(0, 4, b), const_tube(5, 9, b)) == 0.0);

  // frames {2..5} vs {4..7}: r_4 = 1, r_5 = 0.5 -> 1.5 / 6
  std::map<std::int64_t, Box> pm, gm;
  Box full = corners(.2, .2, .6, .6);
  Box half = corners(.2, .2, .4, .6);  // half the width -> IoU 0.5
  pm[2] = full; pm[3] = full; pm[4] = full; pm[5] = half;
  gm[4] = full; gm[5] = full; gm[6] = full; gm[7] = full;
  Tube pred({2, 5}, pm);
  Tube gt({4, 7}, gm);
  CHECK(geom::viou(pred, gt) == doctest::Approx(1.5 / 6.0).epsilon(1e-12));
  CHECK(geom::viou(pred, gt) ==
        doctest::Approx(oracles::enum_viou(pred, gt)).epsilon(1e-12));

  // vIoU is bounded by the spans' temporal IoU
  CHECK(geom::viou(pred, gt) <= geom::temporal_iou(pred.span(), gt.span()));
}

TEST_CASE("viou matches enumeration oracle on random tubes") {
  Rng rng(77);
  for (int i = 0; i < 200; ++i) {
    auto rand_tube = [&] {
      const std::int64_t s = rng.uniform_int(0, 10);
      const std::int64_t e = s + rng.uniform_int(0, 8);
      std::map<std::int64_t, Box> m;
      for (std::int64_t t = s; t <= e; ++t)
        m[t] = Box{rng.uniform(.3, .7), rng.uniform(.3, .7),
                   rng.uniform(.1, .4), rng.uniform(.1, .4)};
      return Tube({s, e}, std::move(m));
    };
    Tube p = rand_tube(), g = rand_tube();
    CHECK(geom::viou(p, g) ==
          doctest::Approx(oracles::enum_viou(p, g)).epsilon(1e-12));
    CHECK(geom::viou(p, g) <=
          geom::temporal_iou(p.span(), g.span()) + 1e-12);
  }
}

TEST_CASE("accuracy_at uses strict inequality") {
  CHECK(geom::accuracy_at({1.0, 1.0}, 0.5) == 1.0);
  CHECK(geom::accuracy_at({0.0, 0.0, 0.0}, 0.4) == 0.0);
  CHECK(geom::accuracy_at({0.45, 0.55, 0.65}, 0.5) ==
        doctest::Approx(2.0 / 3.0));
  CHECK(geom::accuracy_at({0.5, 0.5}, 0.5) == 0.0);  // ties incorrect
}

TEST_CASE("aggregate") {
  Box b = corners(.1, .1, .5, .5);
  std::vector<std::pair<Tube, Tube>> one = {
      {const_tube(0, 3, b), const_tube(0, 3, b)}};
  auto rep = geom::aggregate(one, {0.4, 0.5, 0.6}, {0.3, 0.5});
  CHECK(rep.m_iou == doctest::Approx(1.0));
  CHECK(rep.m_tiou == doctest::Approx(1.0));
  CHECK(rep.m_viou == doctest::Approx(1.0));
  CHECK(rep.accuracy_at[0.5] == doctest::Approx(1.0));
  CHECK(rep.viou_at[0.3] == doctest::Approx(1.0));

  // two samples with vIoU 0.25 and 0.75
  Box half_w = corners(.1, .1, .3, .5);   // IoU vs b = 0.5
  std::map<std::int64_t, Box> pm1, pm2;
  for (int t = 0; t < 4; ++t) pm1[t] = (t < 2 ? b : Box{0.9, 0.9, 0.05, 0.05});
  for (int t = 0; t < 4; ++t) pm2[t] = (t < 3 ? b : half_w);
  std::vector<std::pair<Tube, Tube>> two = {
      {Tube({0, 3}, pm1), const_tube(0, 3, b)},   // vIoU = 2/4 = 0.5 ... adjust below
      {Tube({0, 3}, pm2), const_tube(0, 3, b)}};  // vIoU = 3.5/4
  auto rep2 = geom::aggregate(two, {0.5}, {0.3, 0.5});
  const double v1 = geom::viou(two[0].first, two[0].second);
  const double v2 = geom::viou(two[1].first, two[1].second);
  CHECK(rep2.m_viou == doctest::Approx(0.5 * (v1 + v2)));

  CHECK_THROWS(geom::aggregate({}, {0.5}, {}));
}

TEST_CASE("aggregate accuracy monotone in threshold and per-video mode") {
  Rng rng(123);
  std::vector<std::pair<Tube, Tube>> samples;
  for (int i = 0; i < 12; ++i) {
    const std::int64_t s = rng.uniform_int(0, 4);
    const std::int64_t e = s + rng.uniform_int(1, 6);
    std::map<std::int64_t, Box> pm, gm;
    for (std::int64_t t = s; t <= e; ++t) {
      gm[t] = Box{rng.uniform(.3, .7), rng.uniform(.3, .7), .3, .3};
      pm[t] = Box{gm[t].cx + rng.uniform(-.2, .2), gm[t].cy + rng.uniform(-.2, .2),
                  .3, .3};
    }
    samples.push_back({Tube({s, e}, pm), Tube({s, e}, gm)});
  }
  const std::vector<double> etas = {0.1, 0.3, 0.5, 0.7, 0.9};
  auto rep = geom::aggregate(samples, etas, {0.3, 0.5});
  double prev = 1.0 + 1e-9;
  for (double eta : etas) {
    CHECK(rep.accuracy_at[eta] <= prev + 1e-12);
    prev = rep.accuracy_at[eta];
  }
  auto rep_pv =
      geom::aggregate(samples, etas, {}, geom::AccuracyMode::kPerVideo);
  for (double eta : etas) {
    CHECK(rep_pv.accuracy_at[eta] >= 0.0);
    CHECK(rep_pv.accuracy_at[eta] <= 1.0);
  }
}

TEST_CASE("tube invariants enforced") {
  Box b = corners(.1, .1, .2, .2);
  std::map<std::int64_t, Box> m{{0, b}, {2, b}};
  CHECK_THROWS(Tube({0, 2}, m));                      // missing frame 1
  CHECK_THROWS(Tube({2, 0}, {}));                     // inverted span
  std::map<std::int64_t, Box> bad{{0, Box{.5, .5, -.1, .2}}};
  CHECK_THROWS(Tube({0, 0}, bad));                    // negative width
  // corner/center round trip
  Box c = Box::from_corners(b.x1(), b.y1(), b.x2(), b.y2());
  CHECK(c.cx == doctest::Approx(b.cx).epsilon(1e-12));
  CHECK(c.w == doctest::Approx(b.w).epsilon(1e-12));
}
