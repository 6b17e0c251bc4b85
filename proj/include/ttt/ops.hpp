#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ttt/tensor.hpp"

// Differentiable primitives. Every op records a backward closure when any
// input requires a gradient; otherwise it is a plain computation.
namespace ttt::ops {

template <class T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
// Elementwise product; complex * complex uses complex multiplication.
template <class T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> scale(const Tensor<T>& a, double factor);
template <class T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);

template <class T> Tensor<T> leaky_relu(const Tensor<T>& x, double slope = 0.2);

// Per-channel normalization over the spatial plane of x[C, H, W]; no affine.
template <class T> Tensor<T> instance_norm(const Tensor<T>& x, double eps = 1e-5);

// x[C, H, W] -> [C, H/2, W/2]; H and W must be even.
template <class T> Tensor<T> avgpool2x(const Tensor<T>& x);
// x[C, H, W] -> [C, 2H, 2W] by pixel replication.
template <class T> Tensor<T> upsample2x(const Tensor<T>& x);
// Channel concatenation of a[C1, H, W] and b[C2, H, W].
template <class T> Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b);

// Same-padded cross-correlation. input[C_in, H, W], kernel[C_out, C_in, k, k]
// with k odd, optional bias[C_out].
template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel,
                 const std::optional<Tensor<T>>& bias = std::nullopt);

template <class T> Tensor<T> to_complex(const Tensor<T>& real);
template <class T> Tensor<T> real_part(const Tensor<T>& z);
// Pixelwise |z| of a complex tensor; gradient at 0 is 0.
template <class T> Tensor<T> complex_abs(const Tensor<T>& z);
// Root-sum-of-squares over the leading (coil) axis: z[C, ...] -> real [...].
template <class T> Tensor<T> rss(const Tensor<T>& z);
// image (real [H, W]) times each coil map of sens (complex [C, H, W]).
template <class T> Tensor<T> coil_expand(const Tensor<T>& image, const Tensor<T>& sens);
// Sum over coils of conj(sens_c) * z_c, z complex [C, H, W] -> complex [H, W].
template <class T> Tensor<T> coil_combine(const Tensor<T>& z, const Tensor<T>& sens);
// Zeroes every column (last axis) whose flag is 0.
template <class T>
Tensor<T> mask_columns(const Tensor<T>& x, const std::vector<std::uint8_t>& columns);

// Reductions to a real scalar. Complex inputs count real and imaginary parts
// as separate entries. Accumulation is in double precision.
template <class T> Tensor<T> l1(const Tensor<T>& x);
template <class T> Tensor<T> sum_squares(const Tensor<T>& x);
template <class T> Tensor<T> l2(const Tensor<T>& x);
template <class T> Tensor<T> sum(const Tensor<T>& x);

template <class T> double max_abs(const Tensor<T>& x);

}  // namespace ttt::ops
