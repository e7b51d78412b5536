// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_TENSOR_OPS_H_
#define FEDTUNE_TENSOR_OPS_H_

#include <span>

#include "fedtune/tensor/tape.h"

// Differentiable operations. All inputs of one call must share a dtype and
// live on the same tape.
namespace fedtune::ops {

enum class Padding { kSame, kValid };

// Stride-1 cross-correlation. input [N,Cin,D,H,W], weight [Cout,Cin,k,k,k]
// with odd k, bias [Cout].
Var Conv3d(const Var& input, const Var& weight, const Var& bias, Padding padding);

// input [..., F] x weight [F, O] + bias [O] -> [..., O].
Var Linear(const Var& input, const Var& weight, const Var& bias);
// input [..., F] x weight [F, O] -> [..., O].
Var MatMul(const Var& input, const Var& weight);

// a + b where b's shape equals a trailing suffix of a's shape (broadcast over
// the leading dims).
Var Add(const Var& a, const Var& b);
Var Scale(const Var& a, double factor);
Var Sum(const Var& a);
Var Mean(const Var& a);

Var Relu(const Var& x);
// Exact form 0.5 x (1 + erf(x / sqrt 2)).
Var Gelu(const Var& x);
// Over the last dim.
Var Softmax(const Var& x);
// Over the last dim; gamma and beta have shape [last].
Var LayerNorm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

// [N,C,D,H,W] -> [N,C].
Var GlobalAvgPool3d(const Var& x);
// Mean over the batch of -log softmax(logits)[label]. logits [N,C].
Var CrossEntropyLogits(const Var& logits, std::span<const int> labels);

Var Reshape(const Var& x, const Shape& shape);
// [..., A, B] -> [..., B, A].
Var TransposeLast2(const Var& x);
// [N,C,S,S,S] -> [N, (S/p)^3, C*p^3]. Token order is row-major over the
// (z,y,x) patch grid; features within a token are ordered (c, dz, dy, dx).
// Followed by Linear this equals a conv3d with kernel = stride = p.
Var Patchify(const Var& x, int64_t patch);
// Scaled dot-product self-attention over `heads` heads. q, k, v [N,T,d].
Var MultiHeadAttention(const Var& q, const Var& k, const Var& v, int64_t heads);

}  // namespace fedtune::ops

#endif  // FEDTUNE_TENSOR_OPS_H_
