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

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "contformer/autograd.hpp"
#include "contformer/rng.hpp"
#include "contformer/tensor.hpp"

namespace contformer::nn {

enum class Init { kZeros, kXavier, kNormal02 };

// Owns every learnable tensor by name; the optimizer and checkpoints walk
// this registry. A model owns exactly one store.
class ParamStore {
 public:
  ag::Var create(const std::string& name, std::vector<std::int64_t> shape,
                 Init init, Rng& rng);
  const std::vector<std::pair<std::string, ag::Var>>& entries() const {
    return entries_;
  }
  ag::Var find(const std::string& name) const;
  void zero_grad();
  double grad_norm() const;
  std::int64_t param_count() const;

 private:
  std::vector<std::pair<std::string, ag::Var>> entries_;
};

class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& store, const std::string& name, std::int64_t in,
         std::int64_t out, Rng& rng, Init weight_init = Init::kXavier);
  ag::Var forward(const ag::Var& x) const;  // n x in -> n x out
  ag::Var weight() const { return W_; }
  ag::Var bias() const { return b_; }

 private:
  ag::Var W_, b_;  // W: in x out, b: 1 x out
};

class Embedding {
 public:
  Embedding() = default;
  Embedding(ParamStore& store, const std::string& name, std::int64_t count,
            std::int64_t dim, Rng& rng);
  ag::Var forward(const std::vector<std::int64_t>& ids) const;
  ag::Var table() const { return table_; }

 private:
  ag::Var table_;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParamStore& store, const std::string& name, std::int64_t dim);
  ag::Var forward(const ag::Var& x) const;

 private:
  ag::Var g_, b_;
};

// Multi-head attention with a shared key mask over memory columns. Optionally
// records per-head attention probability matrices (value copies) for tests
// and visualization.
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& store, const std::string& name,
                     std::int64_t dim, std::int64_t heads, Rng& rng);
  ag::Var forward(const ag::Var& query_in, const ag::Var& memory,
                  const ag::BoolVec* keymask = nullptr,
                  std::vector<Tensor>* attn_probs = nullptr) const;
  Linear& out_proj() { return o_; }

 private:
  Linear q_, k_, v_, o_;
  std::int64_t heads_ = 0;
  std::int64_t dim_ = 0;
};

class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(ParamStore& store, const std::string& name, std::int64_t dim,
              std::int64_t hidden, Rng& rng);
  ag::Var forward(const ag::Var& x) const;

 private:
  Linear a_, b_;
};

// Pre-norm residual self-attention block: x + MHA(LN(x)), x + FFN(LN(x)).
class EncoderLayer {
 public:
  EncoderLayer() = default;
  EncoderLayer(ParamStore& store, const std::string& name, std::int64_t dim,
               std::int64_t heads, std::int64_t ffn_dim, Rng& rng);
  ag::Var forward(const ag::Var& x, const ag::BoolVec* keymask = nullptr,
                  std::vector<Tensor>* attn_probs = nullptr) const;
  MultiHeadAttention& attention() { return mha_; }

 private:
  LayerNorm ln1_, ln2_;
  MultiHeadAttention mha_;
  FeedForward ffn_;
};

// Decoupled weight-decay Adam.
class AdamW {
 public:
  AdamW(ParamStore& store, double lr, double weight_decay, double beta1 = 0.9,
        double beta2 = 0.999, double eps = 1e-8);
  void step();
  void zero_grad() { store_->zero_grad(); }
  // Clips the global gradient norm; returns the pre-clip norm. max_norm <= 0
  // disables clipping.
  double clip_grad_norm(double max_norm);

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  std::int64_t step_count() const { return t_; }

  // Checkpoint access: first/second moment per parameter, in store order.
  std::vector<Tensor>& moment1() { return m_; }
  std::vector<Tensor>& moment2() { return v_; }
  void set_step_count(std::int64_t t) { t_ = t; }

 private:
  ParamStore* store_ = nullptr;
  double lr_, wd_, b1_, b2_, eps_;
  std::int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

// Fixed sinusoidal position tables.
Tensor sinusoid_1d(std::int64_t positions, std::int64_t dim);
// Rows ordered y-major then x; each axis gets dim/2 channels.
Tensor sinusoid_2d(std::int64_t h, std::int64_t w, std::int64_t dim);

}  // namespace contformer::nn
