#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ttt/tensor.hpp"

namespace ttt {

// Cartesian 1D sampling pattern over k-space columns. The ACS block is a
// contiguous run of center columns that is always acquired.
struct SamplingMask {
    std::int64_t width = 0;
    std::vector<std::uint8_t> columns;
    std::int64_t acs_begin = 0;  // [acs_begin, acs_end)
    std::int64_t acs_end = 0;
    double acceleration = 1.0;
    double center_fraction = 0.0;
    std::uint64_t seed = 0;

    std::int64_t selected_count() const;
    std::int64_t acs_count() const { return acs_end - acs_begin; }
    bool is_acs(std::int64_t col) const { return col >= acs_begin && col < acs_end; }
    bool selected(std::int64_t col) const { return columns.at(static_cast<std::size_t>(col)) != 0; }
};

// n_acs = round(center_fraction * width) center columns plus uniformly drawn
// extra columns until round(width / acceleration) are selected.
SamplingMask make_mask(std::int64_t width, double acceleration, double center_fraction, std::uint64_t seed);

// A fully sampled instance: per-coil k-space, unit-normalized coil maps and the
// real reference image.
struct KSpaceSample {
    Tensor<float> kspace_full;  // complex [C, H, W]
    Tensor<float> sens;         // complex [C, H, W]
    Tensor<float> reference;    // real [H, W]
    std::string id;
};

// What a reconstructor sees at test time: k-space restricted to the mask.
template <class T>
struct Measurement {
    Tensor<T> kspace;  // complex [C, H, W], zero outside mask
    Tensor<T> sens;
    SamplingMask mask;
    std::optional<Tensor<T>> reference;
    std::string id;
};

// Applies the mask to a fully sampled instance. noise_std > 0 adds complex
// Gaussian noise (per real/imag channel) to the acquired entries.
Measurement<float> measure(const KSpaceSample& sample, const SamplingMask& mask, bool keep_reference = true,
                           double noise_std = 0.0, std::uint64_t noise_seed = 0);

template <class T>
Measurement<T> cast_measurement(const Measurement<float>& m);

// A x = M F (S x) for a real image [H, W]; differentiable in the image.
template <class T>
Tensor<T> forward(const Tensor<T>& image, const Tensor<T>& sens, const SamplingMask& mask);
template <class T>
Tensor<T> forward(const Tensor<T>& image, const Tensor<T>& sens, const std::vector<std::uint8_t>& columns);

// Zero-filled adjoint followed by RSS: per-coil ifft2c of the masked data, then
// root-sum-of-squares. This is the network input.
template <class T>
Tensor<T> adjoint_zf(const Tensor<T>& kspace, const SamplingMask& mask);
template <class T>
Tensor<T> adjoint_zf(const Tensor<T>& kspace, const std::vector<std::uint8_t>& columns);

// True adjoint of forward() under the real inner product:
// Re(sum_c conj(S_c) F^H M y_c) -> real [H, W].
template <class T>
Tensor<T> adjoint(const Tensor<T>& kspace, const Tensor<T>& sens, const std::vector<std::uint8_t>& columns);

template <class T>
Tensor<T> rss(const Tensor<T>& coil_images);

}  // namespace ttt
