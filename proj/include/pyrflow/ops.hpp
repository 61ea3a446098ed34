#pragma once

#include <vector>

#include "pyrflow/tensor.hpp"

// Differentiable tensor operations. Each op validates shapes, computes the
// forward value through the kernels layer and records a backward closure on
// the tape of its inputs. Inputs that are constants (not on a tape) take part
// in the forward pass but receive no gradient. Feature maps are N x Z x H x W.

namespace pyrflow::ops {

// ---- elementwise ----
// binary ops take equal shapes or a single-element tensor on either side
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, double c);
Tensor exp(const Tensor& a);
Tensor neg_exp(const Tensor& a);  // e^{-x}
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);

// full reduction to a {1} scalar
Tensor sum(const Tensor& a);

// a [m x k] * b [k x n]
Tensor matmul(const Tensor& a, const Tensor& b);

// x NZHW, w [out_c x in_c x k x k] with k in {1,3}, optional bias [out_c]
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* bias, int stride, int pad);

// ---- structural ----
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat_channels(const std::vector<Tensor>& parts);
std::vector<Tensor> split_channels(const Tensor& a, int parts);
Tensor upsample_nearest2x(const Tensor& a);
Tensor adaptive_avg_pool(const Tensor& a, int out_h, int out_w);  // integer block ratio
Tensor global_avg_pool(const Tensor& a);                          // -> N x Z x 1 x 1

Tensor group_norm(const Tensor& x, int groups, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

// identical values, zero gradient through this edge
Tensor stop_gradient(const Tensor& a);

// y[n,co,:,:] = sum_ci m[co,ci] x[n,ci,:,:]; m is Z x Z
Tensor channel_mix(const Tensor& x, const Tensor& m);

// y = x * w with w N x 1 x H x W broadcast over channels
Tensor scale_channels(const Tensor& x, const Tensor& w);

// N x Z x 1 x 1 -> {Z, 1} column vector, mean over the batch
Tensor mean_over_batch(const Tensor& x);

// softmax over the last dimension of a 2-d tensor
Tensor row_softmax(const Tensor& m);

// non-tape helpers
double l2_norm(const std::vector<double>& v);
bool all_finite(const std::vector<double>& v);

}  // namespace pyrflow::ops
