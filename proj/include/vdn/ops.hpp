#pragma once

#include "vdn/tensor.hpp"
#include "vdn/var.hpp"

#include <cstddef>

namespace vdn {

/// Convolution parameters.
///
/// conv2d kernels are out_ch x in_ch x kh x kw. deconv2d kernels are
/// in_ch x out_ch x kh x kw, i.e. the kernel of the strided conv2d whose
/// input-adjoint the deconvolution is; with zero bias
/// <conv2d(x, K), y> == <x, deconv2d(y, K)>.
struct ConvParams {
    Tensor kernel;
    Tensor bias;
    std::size_t stride = 1;
    std::size_t padding = 0;
};

/// floor((in + 2*pad - k) / stride) + 1; throws ShapeError if that is < 1.
std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad);
/// (in - 1) * stride - 2*pad + k; throws ShapeError if that is < 1.
std::size_t deconv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad);

// Plain forward evaluation.
Tensor conv2d(const Tensor& x, const ConvParams& p);
Tensor deconv2d(const Tensor& x, const ConvParams& p);

// Differentiable op set. Shapes: x is N x C x H x W throughout.
Var conv2d(const Var& x, const Var& kernel, const Var& bias, std::size_t stride, std::size_t padding);
Var deconv2d(const Var& x, const Var& kernel, const Var& bias, std::size_t stride, std::size_t padding);
Var relu(const Var& x);
Var tanh_act(const Var& x);
/// Per-channel y = x * scale[c] + shift[c]; scale and shift have shape {C}.
Var channel_affine(const Var& x, const Var& scale, const Var& shift);
Var add(const Var& a, const Var& b);
Var scale(const Var& x, double factor);
/// Mean of squared elementwise differences, shape {1}.
Var mse(const Var& pred, const Var& target);

double mse(const Tensor& pred, const Tensor& target);

}  // namespace vdn
