#include <cmath>
#include <vector>

#include "doctest.h"

#include "contformer/autograd.hpp"
#include "contformer/rng.hpp"
#include "oracles.hpp"

using namespace contformer;
using ag::Var;

namespace {

Tensor random_tensor(std::vector<std::int64_t> shape, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Checks d(sum-of-weighted-outputs)/d(leaf) against central differences for
// every element of the leaf.
void check_grad(const std::function<Var(const Var&)>& build, Tensor x0,
                Rng& rng, double tol = 1e-6) {
  Var leaf = ag::leaf(x0);
  Var out = build(leaf);
  // Random projection to a scalar so all output entries matter.
  Tensor w = random_tensor(out->val.shape(), rng);
  Var loss = ag::sum_all(ag::mul(out, ag::constant(w)));
  ag::backward(loss);

  auto f = [&](const std::vector<double>& xs) {
    Tensor xt = x0;
    for (std::int64_t i = 0; i < xt.numel(); ++i) xt[i] = xs[i];
    Var l2 = ag::leaf(xt, false);
    Var o2 = build(l2);
    double acc = 0.0;
    for (std::int64_t i = 0; i < o2->val.numel(); ++i)
      acc += o2->val[i] * w[i];
    return acc;
  };
  std::vector<double> xs(x0.data(), x0.data() + x0.numel());
  for (std::int64_t i = 0; i < x0.numel(); ++i) {
    const double num = oracles::central_diff(f, xs, i);
    CHECK(oracles::grad_close(leaf->grad[i], num, tol));
  }
}

}  // namespace

TEST_CASE("elementwise and matmul gradients match finite differences") {
  Rng rng(7);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({3, 4}, rng);
  Tensor m = random_tensor({4, 5}, rng);

  check_grad([&](const Var& x) { return ag::mul(x, ag::constant(b)); }, a, rng);
  check_grad([&](const Var& x) { return ag::matmul(x, ag::constant(m)); }, a,
             rng);
  check_grad([&](const Var& x) { return ag::matmul_nt(x, ag::constant(b)); },
             random_tensor({2, 4}, rng), rng);
  check_grad([&](const Var& x) { return ag::matmul_tn(ag::constant(a), x); },
             random_tensor({3, 2}, rng), rng);
  check_grad([&](const Var& x) { return ag::sigmoid(x); }, a, rng);
  check_grad([&](const Var& x) { return ag::softplus(ag::scale(x, 3.0)); }, a,
             rng);
  check_grad([&](const Var& x) { return ag::relu(x); }, a, rng);
  check_grad(
      [&](const Var& x) { return ag::exp_(ag::scale(x, 0.5)); }, a, rng);
}

TEST_CASE("softmax family gradients") {
  Rng rng(11);
  Tensor a = random_tensor({3, 6}, rng, -2.0, 2.0);
  ag::BoolVec mask = {1, 1, 0, 1, 1, 0};

  check_grad([&](const Var& x) { return ag::softmax_rows(x); }, a, rng);
  check_grad([&](const Var& x) { return ag::softmax_rows(x, &mask); }, a, rng);
  // Zero out masked columns post hoc: their raw value is a huge negative
  // sentinel that would swamp the finite-difference projection.
  Tensor keep({3, 6});
  for (std::int64_t r = 0; r < 3; ++r)
    for (std::int64_t c = 0; c < 6; ++c) keep(r, c) = mask[c] ? 1.0 : 0.0;
  check_grad(
      [&](const Var& x) {
        return ag::mul(ag::log_softmax_rows(x, &mask), ag::constant(keep));
      },
      a, rng);
  check_grad([&](const Var& x) { return ag::log_softmax_rows(x); }, a, rng);

  // masked columns carry exactly zero probability
  Var probs = ag::softmax_rows(ag::leaf(a, false), &mask);
  for (std::int64_t r = 0; r < 3; ++r) {
    double s = 0.0;
    for (std::int64_t c = 0; c < 6; ++c) {
      if (!mask[c]) CHECK(probs->val(r, c) == 0.0);
      s += probs->val(r, c);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("layer norm and l2 normalize gradients") {
  Rng rng(13);
  Tensor x = random_tensor({4, 8}, rng, -2.0, 2.0);
  Tensor g = random_tensor({1, 8}, rng, 0.5, 1.5);
  Tensor b = random_tensor({1, 8}, rng);

  check_grad(
      [&](const Var& v) {
        return ag::layer_norm_rows(v, ag::constant(g), ag::constant(b));
      },
      x, rng, 1e-5);
  check_grad([&](const Var& v) { return ag::l2_normalize_rows(v); }, x, rng);

  // gain/bias gradients
  check_grad(
      [&](const Var& v) {
        return ag::layer_norm_rows(ag::constant(x), v, ag::constant(b));
      },
      g, rng, 1e-5);
}

TEST_CASE("indexing ops route gradients") {
  Rng rng(17);
  Tensor t = random_tensor({5, 3}, rng);
  std::vector<std::int64_t> ids = {4, 0, 0, 2};

  check_grad([&](const Var& x) { return ag::gather_rows(x, ids); }, t, rng);
  check_grad(
      [&](const Var& x) {
        return ag::concat_cols({ag::slice_cols(x, 0, 2), ag::slice_cols(x, 1, 2)});
      },
      t, rng);
  check_grad([&](const Var& x) { return ag::repeat_rows(x, 6); },
             random_tensor({1, 4}, rng), rng);
  check_grad(
      [&](const Var& x) {
        return ag::gather_elems(x, {{0, 0}, {4, 2}, {0, 0}});
      },
      t, rng);
}

TEST_CASE("backward accumulates across reuse of a node") {
  Tensor x0 = Tensor::from({1, 2}, {0.5, -0.25});
  Var x = ag::leaf(x0);
  Var y = ag::add(ag::mul(x, x), ag::scale(x, 3.0));  // x^2 + 3x
  ag::backward(ag::sum_all(y));
  CHECK(x->grad[0] == doctest::Approx(2 * 0.5 + 3));
  CHECK(x->grad[1] == doctest::Approx(2 * -0.25 + 3));
}

TEST_CASE("no-grad mode builds no tape") {
  ag::NoGradGuard guard;
  Var x = ag::leaf(Tensor::from({1, 2}, {1.0, 2.0}));
  Var y = ag::mul(x, x);
  CHECK(y->parents.empty());
  CHECK_FALSE(y->backward_fn);
}

TEST_CASE("mask_rows zeroes and blocks gradient") {
  Rng rng(23);
  Tensor x = random_tensor({3, 2}, rng);
  ag::BoolVec keep = {1, 0, 1};
  Var leaf = ag::leaf(x);
  Var y = ag::mask_rows(leaf, keep);
  CHECK(y->val(1, 0) == 0.0);
  CHECK(y->val(1, 1) == 0.0);
  ag::backward(ag::sum_all(y));
  CHECK(leaf->grad(0, 0) == 1.0);
  CHECK(leaf->grad(1, 0) == 0.0);
  CHECK(leaf->grad(1, 1) == 0.0);
}
