#pragma once

#include "reface/tensor.hpp"

namespace reface {

// ---- elementwise / structural --------------------------------------------

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b);

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b);

template <typename S>
Tensor<S> scale(const Tensor<S>& x, S factor);

template <typename S>
Tensor<S> relu(const Tensor<S>& x);

template <typename S>
Tensor<S> leaky_relu(const Tensor<S>& x, S slope);

template <typename S>
Tensor<S> tanh_op(const Tensor<S>& x);

template <typename S>
Tensor<S> reshape(const Tensor<S>& x, Shape new_shape);

// Contiguous sub-range along `axis`.
template <typename S>
Tensor<S> narrow(const Tensor<S>& x, int axis, int start, int length);

template <typename S>
Tensor<S> concat(const std::vector<Tensor<S>>& xs, int axis);

// [A,B,C] -> [A,C,B]
template <typename S>
Tensor<S> transpose12(const Tensor<S>& x);

template <typename S>
Tensor<S> upsample_nearest2x(const Tensor<S>& x);

// ---- reductions ------------------------------------------------------------

template <typename S>
Tensor<S> mean(const Tensor<S>& x);

// Mean absolute difference (mean reduction keeps loss weights independent of
// image size).
template <typename S>
Tensor<S> l1(const Tensor<S>& x, const Tensor<S>& y);

// ---- layers ----------------------------------------------------------------

// y = x W^T + b, x:[N,Din] W:[Dout,Din] b:[Dout]
template <typename S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& weight, const Tensor<S>& bias);

// Cross-correlation, x:[N,Ci,H,W] w:[Co,Ci/g,kh,kw] b:[Co]
template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& weight, const Tensor<S>& bias,
                 int stride, int padding, int groups = 1);

// x:[N,C,L] w:[Co,C,k] b:[Co]
template <typename S>
Tensor<S> conv1d(const Tensor<S>& x, const Tensor<S>& weight, const Tensor<S>& bias,
                 int stride, int padding);

// Per-sample per-channel standardization then affine, x:[N,C,H,W]
// scale/shift:[C]
template <typename S>
Tensor<S> instance_norm(const Tensor<S>& x, const Tensor<S>& scale, const Tensor<S>& shift,
                        S eps = S(1e-5));

}  // namespace reface
