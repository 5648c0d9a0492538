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
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "contformer/tensor.hpp"

namespace contformer::ag {

// Tape-based reverse-mode autograd over double tensors. Nodes are created in
// forward order, so creation order is already a topological order; backward()
// walks the reachable subgraph in reverse creation order.

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor val;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::uint64_t seq = 0;
  std::vector<Var> parents;
  std::function<void(Node&)> backward_fn;

  Tensor& ensure_grad() {
    if (!grad.same_shape(val)) grad = Tensor::zeros(val.shape());
    return grad;
  }
};

// When grad mode is off (evaluation), ops produce value-only nodes with no
// parents or closures, so no tape is retained.
bool grad_enabled();
void set_grad_enabled(bool on);

struct NoGradGuard {
  NoGradGuard() : prev_(grad_enabled()) { set_grad_enabled(false); }
  ~NoGradGuard() { set_grad_enabled(prev_); }

 private:
  bool prev_;
};

Var constant(Tensor t);
Var leaf(Tensor t, bool requires_grad = true);

// Extension point for custom ops: wraps a forward result with its parents and
// backward closure. The tape is dropped when gradients are disabled or no
// parent requires them.
Var make_node(Tensor val, std::vector<Var> parents,
              std::function<void(Node&)> backward_fn);

// Seeds root->grad with ones (root must be a single element) and runs the
// tape backwards, accumulating into every reachable grad-requiring node.
void backward(const Var& root);

using BoolVec = std::vector<std::uint8_t>;

// --- elementwise / broadcast ---
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var add_rowvec(const Var& a, const Var& v);  // v is 1 x C, broadcast over rows
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var exp_(const Var& a);
Var log_(const Var& a);
Var abs_(const Var& a);
Var softplus(const Var& a);  // log(1 + e^x), stable

// --- matmul family ---
Var matmul(const Var& a, const Var& b);     // A  * B
Var matmul_nt(const Var& a, const Var& b);  // A  * B^T
Var matmul_tn(const Var& a, const Var& b);  // A^T * B

// --- reductions ---
Var sum_all(const Var& a);   // 1x1
Var mean_all(const Var& a);  // 1x1
Var sum_rows(const Var& a);  // 1 x C, sum over rows

// --- shape / indexing ---
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(const Var& a, std::int64_t r0, std::int64_t nrows);
Var slice_cols(const Var& a, std::int64_t c0, std::int64_t ncols);
Var gather_rows(const Var& table, const std::vector<std::int64_t>& ids);
// Picks entries (r, c) into a 1 x K row.
Var gather_elems(const Var& a,
                 const std::vector<std::pair<std::int64_t, std::int64_t>>& ix);
Var repeat_rows(const Var& row, std::int64_t n);  // 1 x C -> n x C
Var tile_rows(const Var& a, std::int64_t k);      // R x C -> k*R x C
Var reshape(const Var& a, std::vector<std::int64_t> shape);  // same numel

// --- row-wise normalizations ---
// keymask, when given, marks valid columns; masked columns get zero
// probability and receive no gradient.
Var softmax_rows(const Var& a, const BoolVec* keymask = nullptr);
Var log_softmax_rows(const Var& a, const BoolVec* keymask = nullptr);
Var layer_norm_rows(const Var& x, const Var& gain, const Var& bias,
                    double eps = 1e-5);
Var l2_normalize_rows(const Var& a, double eps = 1e-12);

// Zeroes the rows whose mask entry is false. Used for text padding.
Var mask_rows(const Var& a, const BoolVec& rowmask);

}  // namespace contformer::ag
