#pragma once

#include "tabgraph/nn/tape.hpp"

#include <cstddef>
#include <span>
#include <vector>

// Differentiable primitives. Every op checks shapes (ShapeMismatch) and
// rejects non-finite results (NonFinite). Rank-2 tensors are [rows, cols];
// images and feature maps are [height, width, channels].
namespace tabgraph::nn {

/// x [n, d] · w [d, m] + b [m].
Var dense(Var x, Var w, Var b);

Var relu(Var x);
Var exp(Var x);
Var scale(Var x, double factor);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product of equal shapes.
Var mul(Var a, Var b);
/// x [n, d] with each row scaled by w [n, 1].
Var mul_rows(Var x, Var w);
/// Sum over columns: [n, d] -> [n, 1].
Var row_sum(Var x);

/// 2-D convolution, zero padding. x [h, w, c], kernel [kh, kw, c, co], bias [co].
Var conv2d(Var x, Var kernel, Var bias, std::size_t stride, std::size_t pad);
/// Max pooling over size×size windows (no padding).
Var max_pool(Var x, std::size_t size, std::size_t stride);

Var reshape(Var x, Shape shape);
/// Column-wise concatenation of rank-2 tensors with equal row count.
Var concat(std::span<const Var> parts);
/// Rows of x (first axis) at `index`; backward scatter-adds.
Var gather_rows(Var x, std::span<const std::size_t> index);

/// Reduces consecutive groups of `group` rows: [n·group, d] -> [n, d].
Var reduce_max(Var x, std::size_t group);
Var reduce_mean(Var x, std::size_t group);
/// Mean and sum of all elements, as a [1] tensor.
Var mean(Var x);
Var sum(Var x);

/// Mean softmax cross-entropy of logits [n, classes] against labels.
Var softmax_xent(Var logits, std::span<const int> labels);

} // namespace tabgraph::nn
