#pragma once

#include <cstdint>
#include <vector>

#include "spargcp/tape.hpp"

namespace spargcp {

// Differentiable dense-matrix operations. Every function records its
// backward rule on the tensors' tape. Shapes are validated up front;
// non-finite outputs raise NumericError.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor div(const Tensor& a, const Tensor& b);  // elementwise
Tensor smul(const Tensor& a, double c);
Tensor add_const(const Tensor& a, Matrix c);
Tensor mul_const(const Tensor& a, Matrix c);

/// out[r, c] = a[r, c] * s[r, 0]; differentiable in both arguments.
Tensor scale_rows(const Tensor& a, const Tensor& s);
/// out[r, c] = a[r, c] * s[r] with constant per-row factors.
Tensor scale_rows_const(const Tensor& a, std::vector<double> s);

/// Broadcast a 1 x d bias over the rows of a.
Tensor add_bias(const Tensor& a, const Tensor& bias);

Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double negative_slope);
Tensor elu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);

Tensor concat_cols(const Tensor& a, const Tensor& b);

/// Pick rows of a (duplicates allowed); backward scatter-adds.
Tensor row_gather(const Tensor& a, std::vector<std::size_t> rows);

/// Inverse of row_gather: place row j of v at output row rows[j]
/// (rows must be distinct), all other rows filled with `fill`.
Tensor row_scatter(const Tensor& v, std::vector<std::size_t> rows,
                   std::size_t num_rows, double fill);

/// out[r, :] = sum of message rows with dest == r; empty segments are zero.
Tensor segment_sum(const Tensor& messages, std::vector<std::uint32_t> dest,
                   std::size_t num_segments);

Tensor row_sums(const Tensor& a);  // n x 1
Tensor sum_all(const Tensor& a);   // 1 x 1

/// j-th smallest element of the flattened input with j = clamp(ceil(q*k), 1, k);
/// ties broken by flat index ascending. Backward routes the whole gradient
/// to the selected element.
Tensor quantile_value(const Tensor& x, double q);

/// Mean over rows of -log_softmax(logits)[row, label].
Tensor cross_entropy(const Tensor& logits,
                     const std::vector<std::int32_t>& labels);

/// 0-based position within an ascending sort selected by the quantile rule
/// j = clamp(ceil(q*k), 1, k). Shared by quantile_value and the conformal
/// calibration threshold.
std::size_t quantile_order_index(std::size_t k, double q);

}  // namespace spargcp
