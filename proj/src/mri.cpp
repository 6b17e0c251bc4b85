#include "ttt/mri.hpp"

#include <cmath>

#include "ttt/fft.hpp"
#include "ttt/ops.hpp"
#include "ttt/random.hpp"

namespace ttt {

std::int64_t SamplingMask::selected_count() const {
    std::int64_t n = 0;
    for (auto c : columns) n += c ? 1 : 0;
    return n;
}

SamplingMask make_mask(std::int64_t width, double acceleration, double center_fraction, std::uint64_t seed) {
    if (width < 8) throw ConfigError("make_mask: width must be >= 8, got " + std::to_string(width));
    if (!(acceleration >= 1.0)) throw ConfigError("make_mask: acceleration must be >= 1");
    if (!(center_fraction >= 0.0 && center_fraction < 1.0)) {
        throw ConfigError("make_mask: center_fraction must lie in [0, 1)");
    }
    const auto n_acs = static_cast<std::int64_t>(std::llround(center_fraction * static_cast<double>(width)));
    const auto total = static_cast<std::int64_t>(std::llround(static_cast<double>(width) / acceleration));
    if (total < n_acs) {
        throw ConfigError("make_mask: acceleration " + std::to_string(acceleration) + " keeps " +
                          std::to_string(total) + " columns, fewer than the " + std::to_string(n_acs) +
                          " ACS columns");
    }

    SamplingMask m;
    m.width = width;
    m.acceleration = acceleration;
    m.center_fraction = center_fraction;
    m.seed = seed;
    m.columns.assign(static_cast<std::size_t>(width), 0);
    m.acs_begin = (width - n_acs + 1) / 2;
    m.acs_end = m.acs_begin + n_acs;
    for (auto c = m.acs_begin; c < m.acs_end; ++c) m.columns[static_cast<std::size_t>(c)] = 1;

    std::vector<std::int64_t> outside;
    for (std::int64_t c = 0; c < width; ++c) {
        if (!m.is_acs(c)) outside.push_back(c);
    }
    Rng rng(seed);
    for (auto i : rng.choose(outside.size(), static_cast<std::size_t>(total - n_acs))) {
        m.columns[static_cast<std::size_t>(outside[i])] = 1;
    }
    return m;
}

Measurement<float> measure(const KSpaceSample& sample, const SamplingMask& mask, bool keep_reference,
                           double noise_std, std::uint64_t noise_seed) {
    if (sample.kspace_full.dim(2) != mask.width) {
        throw ShapeError("measure: mask width " + std::to_string(mask.width) + " != k-space width " +
                         std::to_string(sample.kspace_full.dim(2)));
    }
    Measurement<float> m;
    auto noisy = sample.kspace_full.detach();
    if (noise_std > 0.0) {
        Rng rng(noise_seed);
        for (auto& v : noisy.values()) v = static_cast<float>(v + noise_std * rng.normal());
    }
    m.kspace = ops::mask_columns(noisy, mask.columns).detach();
    m.sens = sample.sens;
    m.mask = mask;
    if (keep_reference) m.reference = sample.reference;
    m.id = sample.id;
    return m;
}

template <class T>
Measurement<T> cast_measurement(const Measurement<float>& m) {
    Measurement<T> out;
    out.kspace = m.kspace.template cast<T>();
    out.sens = m.sens.template cast<T>();
    out.mask = m.mask;
    if (m.reference) out.reference = m.reference->template cast<T>();
    out.id = m.id;
    return out;
}

template <class T>
Tensor<T> forward(const Tensor<T>& image, const Tensor<T>& sens, const std::vector<std::uint8_t>& columns) {
    if (image.ndim() != 2 || image.is_complex()) {
        throw ShapeError("forward: image must be real [H, W], got " + shape_str(image.shape()));
    }
    if (sens.ndim() != 3 || sens.dim(1) != image.dim(0) || sens.dim(2) != image.dim(1)) {
        throw ShapeError("forward: coil maps " + shape_str(sens.shape()) + " do not match image " +
                         shape_str(image.shape()));
    }
    if (static_cast<std::int64_t>(columns.size()) != image.dim(1)) {
        throw ShapeError("forward: mask width " + std::to_string(columns.size()) + " != image width " +
                         std::to_string(image.dim(1)));
    }
    return ops::mask_columns(fft2c(ops::coil_expand(image, sens)), columns);
}

template <class T>
Tensor<T> forward(const Tensor<T>& image, const Tensor<T>& sens, const SamplingMask& mask) {
    return forward(image, sens, mask.columns);
}

template <class T>
Tensor<T> adjoint_zf(const Tensor<T>& kspace, const std::vector<std::uint8_t>& columns) {
    if (kspace.ndim() != 3 || !kspace.is_complex()) {
        throw ShapeError("adjoint_zf: expected complex [C, H, W], got " + shape_str(kspace.shape()));
    }
    return ops::rss(ifft2c(ops::mask_columns(kspace, columns)));
}

template <class T>
Tensor<T> adjoint_zf(const Tensor<T>& kspace, const SamplingMask& mask) {
    return adjoint_zf(kspace, mask.columns);
}

template <class T>
Tensor<T> adjoint(const Tensor<T>& kspace, const Tensor<T>& sens, const std::vector<std::uint8_t>& columns) {
    return ops::real_part(ops::coil_combine(ifft2c(ops::mask_columns(kspace, columns)), sens));
}

template <class T>
Tensor<T> rss(const Tensor<T>& coil_images) {
    return ops::rss(coil_images);
}

#define TTT_INSTANTIATE(T)                                                                                  \
    template Measurement<T> cast_measurement(const Measurement<float>&);                                    \
    template Tensor<T> forward(const Tensor<T>&, const Tensor<T>&, const SamplingMask&);                    \
    template Tensor<T> forward(const Tensor<T>&, const Tensor<T>&, const std::vector<std::uint8_t>&);       \
    template Tensor<T> adjoint_zf(const Tensor<T>&, const SamplingMask&);                                   \
    template Tensor<T> adjoint_zf(const Tensor<T>&, const std::vector<std::uint8_t>&);                      \
    template Tensor<T> adjoint(const Tensor<T>&, const Tensor<T>&, const std::vector<std::uint8_t>&);       \
    template Tensor<T> rss(const Tensor<T>&);

TTT_INSTANTIATE(float)
TTT_INSTANTIATE(double)

#undef TTT_INSTANTIATE

}  // namespace ttt
