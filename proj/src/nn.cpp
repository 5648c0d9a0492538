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

#include "contformer/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace contformer::nn {

ag::Var ParamStore::create(const std::string& name,
                           std::vector<std::int64_t> shape, Init init,
                           Rng& rng) {
  for (const auto& [n, v] : entries_)
    if (n == name)
      throw std::invalid_argument("ParamStore: duplicate name " + name);
  Tensor t(shape);
  switch (init) {
    case Init::kZeros:
      break;
    case Init::kXavier: {
      const double fan_in = static_cast<double>(shape[0]);
      const double fan_out =
          static_cast<double>(shape.size() > 1 ? shape[1] : shape[0]);
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      for (std::int64_t i = 0; i < t.numel(); ++i)
        t[i] = rng.uniform(-limit, limit);
      break;
    }
    case Init::kNormal02:
      for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(0.0, 0.02);
      break;
  }
  ag::Var v = ag::leaf(std::move(t), /*requires_grad=*/true);
  entries_.emplace_back(name, v);
  return v;
}

ag::Var ParamStore::find(const std::string& name) const {
  for (const auto& [n, v] : entries_)
    if (n == name) return v;
  throw std::out_of_range("ParamStore: no parameter named " + name);
}

void ParamStore::zero_grad() {
  for (auto& [n, v] : entries_)
    if (v->grad.same_shape(v->val)) v->grad.fill(0.0);
}

double ParamStore::grad_norm() const {
  double s = 0.0;
  for (const auto& [n, v] : entries_) {
    if (!v->grad.same_shape(v->val)) continue;
    for (std::int64_t i = 0; i < v->grad.numel(); ++i)
      s += v->grad[i] * v->grad[i];
  }
  return std::sqrt(s);
}

std::int64_t ParamStore::param_count() const {
  std::int64_t n = 0;
  for (const auto& [name, v] : entries_) n += v->val.numel();
  return n;
}

Linear::Linear(ParamStore& store, const std::string& name, std::int64_t in,
               std::int64_t out, Rng& rng, Init weight_init) {
  W_ = store.create(name + ".weight", {in, out}, weight_init, rng);
  b_ = store.create(name + ".bias", {1, out}, Init::kZeros, rng);
}

ag::Var Linear::forward(const ag::Var& x) const {
  return ag::add_rowvec(ag::matmul(x, W_), b_);
}

Embedding::Embedding(ParamStore& store, const std::string& name,
                     std::int64_t count, std::int64_t dim, Rng& rng) {
  table_ = store.create(name + ".table", {count, dim}, Init::kNormal02, rng);
}

ag::Var Embedding::forward(const std::vector<std::int64_t>& ids) const {
  return ag::gather_rows(table_, ids);
}

LayerNorm::LayerNorm(ParamStore& store, const std::string& name,
                     std::int64_t dim) {
  Rng dummy(0);
  g_ = store.create(name + ".gain", {1, dim}, Init::kZeros, dummy);
  g_->val.fill(1.0);
  b_ = store.create(name + ".bias", {1, dim}, Init::kZeros, dummy);
}

ag::Var LayerNorm::forward(const ag::Var& x) const {
  return ag::layer_norm_rows(x, g_, b_);
}

MultiHeadAttention::MultiHeadAttention(ParamStore& store,
                                       const std::string& name,
                                       std::int64_t dim, std::int64_t heads,
                                       Rng& rng)
    : heads_(heads), dim_(dim) {
  if (dim % heads != 0)
    throw std::invalid_argument("MultiHeadAttention: dim % heads != 0");
  q_ = Linear(store, name + ".q", dim, dim, rng);
  k_ = Linear(store, name + ".k", dim, dim, rng);
  v_ = Linear(store, name + ".v", dim, dim, rng);
  o_ = Linear(store, name + ".o", dim, dim, rng);
}

ag::Var MultiHeadAttention::forward(const ag::Var& query_in,
                                    const ag::Var& memory,
                                    const ag::BoolVec* keymask,
                                    std::vector<Tensor>* attn_probs) const {
  const std::int64_t dh = dim_ / heads_;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  ag::Var q = q_.forward(query_in);
  ag::Var k = k_.forward(memory);
  ag::Var v = v_.forward(memory);
  std::vector<ag::Var> head_outs;
  head_outs.reserve(heads_);
  for (std::int64_t h = 0; h < heads_; ++h) {
    ag::Var qh = ag::slice_cols(q, h * dh, dh);
    ag::Var kh = ag::slice_cols(k, h * dh, dh);
    ag::Var vh = ag::slice_cols(v, h * dh, dh);
    ag::Var scores = ag::scale(ag::matmul_nt(qh, kh), inv_sqrt);
    ag::Var probs = ag::softmax_rows(scores, keymask);
    if (attn_probs) attn_probs->push_back(probs->val);
    head_outs.push_back(ag::matmul(probs, vh));
  }
  return o_.forward(ag::concat_cols(head_outs));
}

FeedForward::FeedForward(ParamStore& store, const std::string& name,
                         std::int64_t dim, std::int64_t hidden, Rng& rng) {
  a_ = Linear(store, name + ".a", dim, hidden, rng);
  b_ = Linear(store, name + ".b", hidden, dim, rng);
}

ag::Var FeedForward::forward(const ag::Var& x) const {
  return b_.forward(ag::relu(a_.forward(x)));
}

EncoderLayer::EncoderLayer(ParamStore& store, const std::string& name,
                           std::int64_t dim, std::int64_t heads,
                           std::int64_t ffn_dim, Rng& rng) {
  ln1_ = LayerNorm(store, name + ".ln1", dim);
  ln2_ = LayerNorm(store, name + ".ln2", dim);
  mha_ = MultiHeadAttention(store, name + ".mha", dim, heads, rng);
  ffn_ = FeedForward(store, name + ".ffn", dim, ffn_dim, rng);
}

ag::Var EncoderLayer::forward(const ag::Var& x, const ag::BoolVec* keymask,
                              std::vector<Tensor>* attn_probs) const {
  ag::Var normed = ln1_.forward(x);
  ag::Var y = ag::add(x, mha_.forward(normed, normed, keymask, attn_probs));
  return ag::add(y, ffn_.forward(ln2_.forward(y)));
}

AdamW::AdamW(ParamStore& store, double lr, double weight_decay, double beta1,
             double beta2, double eps)
    : store_(&store), lr_(lr), wd_(weight_decay), b1_(beta1), b2_(beta2),
      eps_(eps) {
  for (const auto& [name, v] : store.entries()) {
    m_.push_back(Tensor::zeros(v->val.shape()));
    v_.push_back(Tensor::zeros(v->val.shape()));
  }
}

double AdamW::clip_grad_norm(double max_norm) {
  const double norm = store_->grad_norm();
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / (norm + 1e-12);
    for (const auto& [name, p] : store_->entries())
      if (p->grad.same_shape(p->val))
        for (std::int64_t i = 0; i < p->grad.numel(); ++i) p->grad[i] *= s;
  }
  return norm;
}

void AdamW::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  const auto& entries = store_->entries();
  for (std::size_t p = 0; p < entries.size(); ++p) {
    ag::Var param = entries[p].second;
    if (!param->grad.same_shape(param->val)) continue;  // untouched this step
    Tensor& m = m_[p];
    Tensor& v = v_[p];
    for (std::int64_t i = 0; i < param->val.numel(); ++i) {
      const double g = param->grad[i];
      m[i] = b1_ * m[i] + (1.0 - b1_) * g;
      v[i] = b2_ * v[i] + (1.0 - b2_) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      param->val[i] -=
          lr_ * (mhat / (std::sqrt(vhat) + eps_) + wd_ * param->val[i]);
    }
  }
}

Tensor sinusoid_1d(std::int64_t positions, std::int64_t dim) {
  if (dim % 2 != 0) throw std::invalid_argument("sinusoid_1d: dim must be even");
  Tensor pe({positions, dim});
  for (std::int64_t p = 0; p < positions; ++p) {
    for (std::int64_t i = 0; i < dim / 2; ++i) {
      const double freq =
          std::pow(10000.0, -2.0 * static_cast<double>(i) /
                                static_cast<double>(dim));
      pe(p, 2 * i) = std::sin(static_cast<double>(p) * freq);
      pe(p, 2 * i + 1) = std::cos(static_cast<double>(p) * freq);
    }
  }
  return pe;
}

Tensor sinusoid_2d(std::int64_t h, std::int64_t w, std::int64_t dim) {
  if (dim % 4 != 0)
    throw std::invalid_argument("sinusoid_2d: dim must be divisible by 4");
  const Tensor pey = sinusoid_1d(h, dim / 2);
  const Tensor pex = sinusoid_1d(w, dim / 2);
  Tensor pe({h * w, dim});
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x)
      for (std::int64_t c = 0; c < dim / 2; ++c) {
        pe(y * w + x, c) = pey(y, c);
        pe(y * w + x, dim / 2 + c) = pex(x, c);
      }
  return pe;
}

}  // namespace contformer::nn
