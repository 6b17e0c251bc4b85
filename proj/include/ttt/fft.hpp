#pragma once

#include <complex>
#include <span>

#include "ttt/tensor.hpp"

namespace ttt {

// Centered, orthonormal 2D DFT over the last two axes of a complex tensor:
// ifftshift -> DFT -> fftshift, scaled by 1/sqrt(H*W). Zero frequency lands at
// (H/2, W/2). ifft2c is both the inverse and the adjoint.
template <class T> Tensor<T> fft2c(const Tensor<T>& x);
template <class T> Tensor<T> ifft2c(const Tensor<T>& x);

namespace fft_detail {

// In-place centered orthonormal transform of `planes` consecutive H x W planes.
void transform2c(std::span<std::complex<double>> data, std::int64_t planes, std::int64_t H, std::int64_t W,
                 bool inverse);

}  // namespace fft_detail

}  // namespace ttt
