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

#include "contformer/autograd.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace contformer::ag {

namespace {

using MatRM =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<MatRM>;
using CMap = Eigen::Map<const MatRM>;

CMap cmap(const Tensor& t) { return CMap(t.data(), t.rows(), t.cols()); }
Map map(Tensor& t) { return Map(t.data(), t.rows(), t.cols()); }

thread_local bool g_grad_enabled = true;
std::atomic<std::uint64_t> g_seq{1};

}  // namespace

Var make_node(Tensor val, std::vector<Var> parents,
              std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->val = std::move(val);
  n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
  if (g_grad_enabled) {
    for (const auto& p : parents) {
      if (p->requires_grad) {
        n->requires_grad = true;
        break;
      }
    }
    if (n->requires_grad) {
      n->parents = std::move(parents);
      n->backward_fn = std::move(backward_fn);
    }
  }
  return n;
}

namespace {

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a->val.same_shape(b->val))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                a->val.shape_str() + " vs " +
                                b->val.shape_str());
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool on) { g_grad_enabled = on; }

Var constant(Tensor t) {
  auto n = std::make_shared<Node>();
  n->val = std::move(t);
  n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
  return n;
}

Var leaf(Tensor t, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->val = std::move(t);
  n->requires_grad = requires_grad;
  n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
  return n;
}

void backward(const Var& root) {
  if (root->val.numel() != 1)
    throw std::invalid_argument("backward: root must be a scalar");
  root->ensure_grad().fill(1.0);

  // Reachable subgraph, visited in reverse creation order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root.get()};
  seen.insert(root.get());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents)
      if (p->requires_grad && seen.insert(p.get()).second)
        stack.push_back(p.get());
  }
  std::sort(order.begin(), order.end(),
            [](const Node* a, const Node* b) { return a->seq > b->seq; });
  for (Node* n : order)
    if (n->backward_fn && n->grad.same_shape(n->val)) n->backward_fn(*n);
}

// ---------------------------------------------------------------------------
// elementwise

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out = a->val;
  map(out) += cmap(b->val);
  return make_node(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) map(a->ensure_grad()) += cmap(n.grad);
    if (b->requires_grad) map(b->ensure_grad()) += cmap(n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a->val;
  map(out) -= cmap(b->val);
  return make_node(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) map(a->ensure_grad()) += cmap(n.grad);
    if (b->requires_grad) map(b->ensure_grad()) -= cmap(n.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out = a->val;
  map(out).array() *= cmap(b->val).array();
  return make_node(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->requires_grad)
      map(a->ensure_grad()).array() +=
          cmap(n.grad).array() * cmap(b->val).array();
    if (b->requires_grad)
      map(b->ensure_grad()).array() +=
          cmap(n.grad).array() * cmap(a->val).array();
  });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var scale(const Var& a, double s) {
  Tensor out = a->val;
  map(out) *= s;
  return make_node(std::move(out), {a}, [a, s](Node& n) {
    map(a->ensure_grad()) += s * cmap(n.grad);
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a->val;
  map(out).array() += s;
  return make_node(std::move(out), {a}, [a](Node& n) {
    map(a->ensure_grad()) += cmap(n.grad);
  });
}

Var add_rowvec(const Var& a, const Var& v) {
  if (v->val.rows() != 1 || v->val.cols() != a->val.cols())
    throw std::invalid_argument("add_rowvec: expects 1 x cols(a)");
  Tensor out = a->val;
  map(out).rowwise() += cmap(v->val).row(0);
  return make_node(std::move(out), {a, v}, [a, v](Node& n) {
    if (a->requires_grad) map(a->ensure_grad()) += cmap(n.grad);
    if (v->requires_grad)
      map(v->ensure_grad()).row(0) += cmap(n.grad).colwise().sum();
  });
}

Var relu(const Var& a) {
  Tensor out = a->val;
  map(out) = map(out).cwiseMax(0.0);
  return make_node(std::move(out), {a}, [a](Node& n) {
    map(a->ensure_grad()).array() +=
        cmap(n.grad).array() * (cmap(a->val).array() > 0.0).cast<double>();
  });
}

Var sigmoid(const Var& a) {
  Tensor out(a->val.shape());
  const std::int64_t m = a->val.numel();
  for (std::int64_t i = 0; i < m; ++i) {
    const double x = a->val[i];
    out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                      : std::exp(x) / (1.0 + std::exp(x));
  }
  return make_node(std::move(out), {a}, [a](Node& n) {
    Tensor& g = a->ensure_grad();
    const std::int64_t m = n.val.numel();
    for (std::int64_t i = 0; i < m; ++i) {
      const double s = n.val[i];
      g[i] += n.grad[i] * s * (1.0 - s);
    }
  });
}

Var exp_(const Var& a) {
  Tensor out = a->val;
  map(out) = map(out).array().exp();
  return make_node(std::move(out), {a}, [a](Node& n) {
    map(a->ensure_grad()).array() += cmap(n.grad).array() * cmap(n.val).array();
  });
}

Var log_(const Var& a) {
  Tensor out = a->val;
  map(out) = map(out).array().log();
  return make_node(std::move(out), {a}, [a](Node& n) {
    map(a->ensure_grad()).array() +=
        cmap(n.grad).array() / cmap(a->val).array();
  });
}

Var abs_(const Var& a) {
  Tensor out = a->val;
  map(out) = map(out).array().abs();
  return make_node(std::move(out), {a}, [a](Node& n) {
    Tensor& g = a->ensure_grad();
    const std::int64_t m = n.val.numel();
    for (std::int64_t i = 0; i < m; ++i) {
      const double x = a->val[i];
      g[i] += n.grad[i] * (x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0));
    }
  });
}

Var softplus(const Var& a) {
  Tensor out(a->val.shape());
  const std::int64_t m = a->val.numel();
  for (std::int64_t i = 0; i < m; ++i) {
    const double x = a->val[i];
    out[i] = x > 30.0 ? x : std::log1p(std::exp(x));
  }
  return make_node(std::move(out), {a}, [a](Node& n) {
    Tensor& g = a->ensure_grad();
    const std::int64_t m = n.val.numel();
    for (std::int64_t i = 0; i < m; ++i) {
      const double x = a->val[i];
      const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                : std::exp(x) / (1.0 + std::exp(x));
      g[i] += n.grad[i] * s;
    }
  });
}

// ---------------------------------------------------------------------------
// matmul family

Var matmul(const Var& a, const Var& b) {
  if (a->val.cols() != b->val.rows())
    throw std::invalid_argument("matmul: inner dims disagree");
  Tensor out({a->val.rows(), b->val.cols()});
  map(out).noalias() = cmap(a->val) * cmap(b->val);
  return make_node(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->requires_grad)
      map(a->ensure_grad()).noalias() += cmap(n.grad) * cmap(b->val).transpose();
    if (b->requires_grad)
      map(b->ensure_grad()).noalias() += cmap(a->val).transpose() * cmap(n.grad);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a->val.cols() != b->val.cols())
    throw std::invalid_argument("matmul_nt: inner dims disagree");
  Tensor out({a->val.rows(), b->val.rows()});
  map(out).noalias() = cmap(a->val) * cmap(b->val).transpose();
  return make_node(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->requires_grad)
      map(a->ensure_grad()).noalias() += cmap(n.grad) * cmap(b->val);
    if (b->requires_grad)
      map(b->ensure_grad()).noalias() += cmap(n.grad).transpose() * cmap(a->val);
  });
}

Var matmul_tn(const Var& a, const Var& b) {
  if (a->val.rows() != b->val.rows())
    throw std::invalid_argument("matmul_tn: inner dims disagree");
  Tensor out({a->val.cols(), b->val.cols()});
  map(out).noalias() = cmap(a->val).transpose() * cmap(b->val);
  return make_node(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->requires_grad)
      map(a->ensure_grad()).noalias() += cmap(b->val) * cmap(n.grad).transpose();
    if (b->requires_grad)
      map(b->ensure_grad()).noalias() += cmap(a->val) * cmap(n.grad);
  });
}

// ---------------------------------------------------------------------------
// reductions

Var sum_all(const Var& a) {
  Tensor out = Tensor::scalar(cmap(a->val).sum());
  return make_node(std::move(out), {a}, [a](Node& n) {
    map(a->ensure_grad()).array() += n.grad[0];
  });
}

Var mean_all(const Var& a) {
  const double inv = 1.0 / static_cast<double>(a->val.numel());
  Tensor out = Tensor::scalar(cmap(a->val).sum() * inv);
  return make_node(std::move(out), {a}, [a, inv](Node& n) {
    map(a->ensure_grad()).array() += n.grad[0] * inv;
  });
}

Var sum_rows(const Var& a) {
  Tensor out({1, a->val.cols()});
  map(out).row(0) = cmap(a->val).colwise().sum();
  return make_node(std::move(out), {a}, [a](Node& n) {
    map(a->ensure_grad()).rowwise() += cmap(n.grad).row(0);
  });
}

// ---------------------------------------------------------------------------
// shape / indexing

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
  const std::int64_t c = parts[0]->val.cols();
  std::int64_t r = 0;
  for (const auto& p : parts) {
    if (p->val.cols() != c)
      throw std::invalid_argument("concat_rows: column mismatch");
    r += p->val.rows();
  }
  Tensor out({r, c});
  std::int64_t at = 0;
  for (const auto& p : parts) {
    map(out).middleRows(at, p->val.rows()) = cmap(p->val);
    at += p->val.rows();
  }
  return make_node(std::move(out), parts, [parts](Node& n) {
    std::int64_t at = 0;
    for (const auto& p : parts) {
      if (p->requires_grad)
        map(p->ensure_grad()) += cmap(n.grad).middleRows(at, p->val.rows());
      at += p->val.rows();
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
  const std::int64_t r = parts[0]->val.rows();
  std::int64_t c = 0;
  for (const auto& p : parts) {
    if (p->val.rows() != r)
      throw std::invalid_argument("concat_cols: row mismatch");
    c += p->val.cols();
  }
  Tensor out({r, c});
  std::int64_t at = 0;
  for (const auto& p : parts) {
    map(out).middleCols(at, p->val.cols()) = cmap(p->val);
    at += p->val.cols();
  }
  return make_node(std::move(out), parts, [parts](Node& n) {
    std::int64_t at = 0;
    for (const auto& p : parts) {
      if (p->requires_grad)
        map(p->ensure_grad()) += cmap(n.grad).middleCols(at, p->val.cols());
      at += p->val.cols();
    }
  });
}

Var slice_rows(const Var& a, std::int64_t r0, std::int64_t nrows) {
  if (r0 < 0 || r0 + nrows > a->val.rows())
    throw std::out_of_range("slice_rows: out of range");
  Tensor out({nrows, a->val.cols()});
  map(out) = cmap(a->val).middleRows(r0, nrows);
  return make_node(std::move(out), {a}, [a, r0, nrows](Node& n) {
    map(a->ensure_grad()).middleRows(r0, nrows) += cmap(n.grad);
  });
}

Var slice_cols(const Var& a, std::int64_t c0, std::int64_t ncols) {
  if (c0 < 0 || c0 + ncols > a->val.cols())
    throw std::out_of_range("slice_cols: out of range");
  Tensor out({a->val.rows(), ncols});
  map(out) = cmap(a->val).middleCols(c0, ncols);
  return make_node(std::move(out), {a}, [a, c0, ncols](Node& n) {
    map(a->ensure_grad()).middleCols(c0, ncols) += cmap(n.grad);
  });
}

Var gather_rows(const Var& table, const std::vector<std::int64_t>& ids) {
  const std::int64_t c = table->val.cols();
  Tensor out({static_cast<std::int64_t>(ids.size()), c});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table->val.rows())
      throw std::out_of_range("gather_rows: id out of range");
    map(out).row(static_cast<std::int64_t>(i)) = cmap(table->val).row(ids[i]);
  }
  return make_node(std::move(out), {table}, [table, ids](Node& n) {
    auto g = map(table->ensure_grad());
    for (std::size_t i = 0; i < ids.size(); ++i)
      g.row(ids[i]) += cmap(n.grad).row(static_cast<std::int64_t>(i));
  });
}

Var gather_elems(
    const Var& a,
    const std::vector<std::pair<std::int64_t, std::int64_t>>& ix) {
  Tensor out({1, static_cast<std::int64_t>(ix.size())});
  for (std::size_t i = 0; i < ix.size(); ++i)
    out[static_cast<std::int64_t>(i)] = a->val(ix[i].first, ix[i].second);
  return make_node(std::move(out), {a}, [a, ix](Node& n) {
    Tensor& g = a->ensure_grad();
    for (std::size_t i = 0; i < ix.size(); ++i)
      g(ix[i].first, ix[i].second) += n.grad[static_cast<std::int64_t>(i)];
  });
}

Var repeat_rows(const Var& row, std::int64_t nrows) {
  if (row->val.rows() != 1)
    throw std::invalid_argument("repeat_rows: expects a single row");
  Tensor out({nrows, row->val.cols()});
  map(out).rowwise() = cmap(row->val).row(0);
  return make_node(std::move(out), {row}, [row](Node& n) {
    map(row->ensure_grad()).row(0) += cmap(n.grad).colwise().sum();
  });
}

Var tile_rows(const Var& a, std::int64_t k) {
  if (k < 1) throw std::invalid_argument("tile_rows: k must be positive");
  const std::int64_t r = a->val.rows(), c = a->val.cols();
  Tensor out({k * r, c});
  for (std::int64_t i = 0; i < k; ++i)
    map(out).middleRows(i * r, r) = cmap(a->val);
  return make_node(std::move(out), {a}, [a, k, r](Node& n) {
    auto g = map(a->ensure_grad());
    for (std::int64_t i = 0; i < k; ++i)
      g += cmap(n.grad).middleRows(i * r, r);
  });
}

Var reshape(const Var& a, std::vector<std::int64_t> shape) {
  Tensor out = a->val;
  out.reshape(shape);
  return make_node(std::move(out), {a}, [a](Node& n) {
    Tensor& g = a->ensure_grad();
    for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
  });
}

// ---------------------------------------------------------------------------
// row-wise normalizations

namespace {

// Shared masked softmax forward; masked columns get probability zero.
Tensor softmax_forward(const Tensor& x, const BoolVec* keymask, bool log_form) {
  const std::int64_t r = x.rows(), c = x.cols();
  if (keymask && static_cast<std::int64_t>(keymask->size()) != c)
    throw std::invalid_argument("softmax: keymask length != cols");
  Tensor out({r, c});
  for (std::int64_t i = 0; i < r; ++i) {
    double mx = -1e300;
    for (std::int64_t j = 0; j < c; ++j)
      if (!keymask || (*keymask)[j]) mx = std::max(mx, x(i, j));
    if (mx == -1e300)
      throw std::invalid_argument("softmax: all keys masked");
    double z = 0.0;
    for (std::int64_t j = 0; j < c; ++j)
      if (!keymask || (*keymask)[j]) z += std::exp(x(i, j) - mx);
    const double logz = std::log(z) + mx;
    for (std::int64_t j = 0; j < c; ++j) {
      if (keymask && !(*keymask)[j]) {
        out(i, j) = log_form ? -1e300 : 0.0;
      } else {
        out(i, j) = log_form ? x(i, j) - logz : std::exp(x(i, j) - logz);
      }
    }
  }
  return out;
}

}  // namespace

Var softmax_rows(const Var& a, const BoolVec* keymask) {
  Tensor out = softmax_forward(a->val, keymask, /*log_form=*/false);
  BoolVec mask = keymask ? *keymask : BoolVec();
  return make_node(std::move(out), {a}, [a, mask](Node& n) {
    // dx_j = y_j * (dy_j - sum_k dy_k y_k); masked y are exactly zero.
    Tensor& g = a->ensure_grad();
    const std::int64_t r = n.val.rows(), c = n.val.cols();
    for (std::int64_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::int64_t j = 0; j < c; ++j) dot += n.grad(i, j) * n.val(i, j);
      for (std::int64_t j = 0; j < c; ++j) {
        if (!mask.empty() && !mask[j]) continue;
        g(i, j) += n.val(i, j) * (n.grad(i, j) - dot);
      }
    }
  });
}

Var log_softmax_rows(const Var& a, const BoolVec* keymask) {
  Tensor out = softmax_forward(a->val, keymask, /*log_form=*/true);
  BoolVec mask = keymask ? *keymask : BoolVec();
  return make_node(std::move(out), {a}, [a, mask](Node& n) {
    // dx_j = dy_j - exp(y_j) * sum_k dy_k  (over unmasked columns).
    Tensor& g = a->ensure_grad();
    const std::int64_t r = n.val.rows(), c = n.val.cols();
    for (std::int64_t i = 0; i < r; ++i) {
      double tot = 0.0;
      for (std::int64_t j = 0; j < c; ++j)
        if (mask.empty() || mask[j]) tot += n.grad(i, j);
      for (std::int64_t j = 0; j < c; ++j) {
        if (!mask.empty() && !mask[j]) continue;
        g(i, j) += n.grad(i, j) - std::exp(n.val(i, j)) * tot;
      }
    }
  });
}

Var layer_norm_rows(const Var& x, const Var& gain, const Var& bias,
                    double eps) {
  const std::int64_t r = x->val.rows(), c = x->val.cols();
  if (gain->val.cols() != c || bias->val.cols() != c)
    throw std::invalid_argument("layer_norm_rows: gain/bias must be 1 x C");
  Tensor out({r, c});
  Tensor xhat({r, c});
  Tensor inv_sigma({r, 1});
  for (std::int64_t i = 0; i < r; ++i) {
    double mu = 0.0;
    for (std::int64_t j = 0; j < c; ++j) mu += x->val(i, j);
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::int64_t j = 0; j < c; ++j) {
      const double d = x->val(i, j) - mu;
      var += d * d;
    }
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_sigma(i, 0) = is;
    for (std::int64_t j = 0; j < c; ++j) {
      xhat(i, j) = (x->val(i, j) - mu) * is;
      out(i, j) = xhat(i, j) * gain->val[j] + bias->val[j];
    }
  }
  auto xh = std::make_shared<Tensor>(std::move(xhat));
  auto isg = std::make_shared<Tensor>(std::move(inv_sigma));
  return make_node(
      std::move(out), {x, gain, bias}, [x, gain, bias, xh, isg](Node& n) {
        const std::int64_t r = n.val.rows(), c = n.val.cols();
        const double invc = 1.0 / static_cast<double>(c);
        for (std::int64_t i = 0; i < r; ++i) {
          double m1 = 0.0, m2 = 0.0;
          for (std::int64_t j = 0; j < c; ++j) {
            const double gdy = n.grad(i, j) * gain->val[j];
            m1 += gdy;
            m2 += gdy * (*xh)(i, j);
          }
          m1 *= invc;
          m2 *= invc;
          if (x->requires_grad) {
            Tensor& gx = x->ensure_grad();
            for (std::int64_t j = 0; j < c; ++j) {
              const double gdy = n.grad(i, j) * gain->val[j];
              gx(i, j) += (gdy - m1 - (*xh)(i, j) * m2) * (*isg)(i, 0);
            }
          }
        }
        if (gain->requires_grad) {
          Tensor& gg = gain->ensure_grad();
          for (std::int64_t i = 0; i < r; ++i)
            for (std::int64_t j = 0; j < c; ++j)
              gg[j] += n.grad(i, j) * (*xh)(i, j);
        }
        if (bias->requires_grad) {
          Tensor& gb = bias->ensure_grad();
          for (std::int64_t i = 0; i < r; ++i)
            for (std::int64_t j = 0; j < c; ++j) gb[j] += n.grad(i, j);
        }
      });
}

Var l2_normalize_rows(const Var& a, double eps) {
  const std::int64_t r = a->val.rows(), c = a->val.cols();
  Tensor out({r, c});
  Tensor inv_norm({r, 1});
  for (std::int64_t i = 0; i < r; ++i) {
    double s = eps;
    for (std::int64_t j = 0; j < c; ++j) s += a->val(i, j) * a->val(i, j);
    const double in = 1.0 / std::sqrt(s);
    inv_norm(i, 0) = in;
    for (std::int64_t j = 0; j < c; ++j) out(i, j) = a->val(i, j) * in;
  }
  auto invn = std::make_shared<Tensor>(std::move(inv_norm));
  return make_node(std::move(out), {a}, [a, invn](Node& n) {
    // d(x / r) = (dy - y (y . dy)) / r   with y = x / r.
    Tensor& g = a->ensure_grad();
    const std::int64_t r = n.val.rows(), c = n.val.cols();
    for (std::int64_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::int64_t j = 0; j < c; ++j) dot += n.grad(i, j) * n.val(i, j);
      for (std::int64_t j = 0; j < c; ++j)
        g(i, j) += (n.grad(i, j) - n.val(i, j) * dot) * (*invn)(i, 0);
    }
  });
}

Var mask_rows(const Var& a, const BoolVec& rowmask) {
  if (static_cast<std::int64_t>(rowmask.size()) != a->val.rows())
    throw std::invalid_argument("mask_rows: mask length != rows");
  Tensor out = a->val;
  for (std::int64_t i = 0; i < out.rows(); ++i)
    if (!rowmask[static_cast<std::size_t>(i)])
      map(out).row(i).setZero();
  return make_node(std::move(out), {a}, [a, rowmask](Node& n) {
    auto g = map(a->ensure_grad());
    for (std::int64_t i = 0; i < n.val.rows(); ++i)
      if (rowmask[static_cast<std::size_t>(i)])
        g.row(i) += cmap(n.grad).row(i);
  });
}

}  // namespace contformer::ag
