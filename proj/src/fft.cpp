#include "ttt/fft.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <vector>

namespace ttt {

namespace {

using cd = std::complex<double>;

// 1D transform plan: iterative radix-2 for powers of two, direct summation
// with a precomputed root table otherwise.
struct Plan {
    std::size_t n = 0;
    bool pow2 = false;
    std::vector<std::size_t> bitrev;
    std::vector<cd> roots;  // exp(-2 pi i k / n), k < n

    explicit Plan(std::size_t size) : n(size), pow2(size && !(size & (size - 1))), roots(size) {
        for (std::size_t k = 0; k < n; ++k) {
            const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
            roots[k] = {std::cos(a), std::sin(a)};
        }
        if (pow2) {
            bitrev.resize(n);
            std::size_t bits = 0;
            while ((std::size_t{1} << bits) < n) ++bits;
            for (std::size_t i = 0; i < n; ++i) {
                std::size_t r = 0;
                for (std::size_t b = 0; b < bits; ++b) r |= ((i >> b) & 1U) << (bits - 1 - b);
                bitrev[i] = r;
            }
        }
    }

    // Unnormalized DFT of a strided sequence, in place.
    void run(cd* x, std::size_t stride, bool inverse, std::vector<cd>& scratch) const {
        scratch.resize(n);
        if (pow2) {
            for (std::size_t i = 0; i < n; ++i) scratch[bitrev[i]] = x[i * stride];
            for (std::size_t len = 2; len <= n; len <<= 1) {
                const std::size_t half = len / 2, step = n / len;
                for (std::size_t s = 0; s < n; s += len)
                    for (std::size_t j = 0; j < half; ++j) {
                        cd w = roots[j * step];
                        if (inverse) w = std::conj(w);
                        const cd u = scratch[s + j];
                        const cd v = scratch[s + j + half] * w;
                        scratch[s + j] = u + v;
                        scratch[s + j + half] = u - v;
                    }
            }
            for (std::size_t i = 0; i < n; ++i) x[i * stride] = scratch[i];
        } else {
            for (std::size_t k = 0; k < n; ++k) {
                cd acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    cd w = roots[(j * k) % n];
                    if (inverse) w = std::conj(w);
                    acc += x[j * stride] * w;
                }
                scratch[k] = acc;
            }
            for (std::size_t i = 0; i < n; ++i) x[i * stride] = scratch[i];
        }
    }
};

const Plan& plan_for(std::size_t n) {
    thread_local std::map<std::size_t, Plan> cache;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, Plan(n)).first;
    return it->second;
}

template <class T>
Tensor<T> transform(const Tensor<T>& x, bool inverse);

template <class T>
void apply(const std::vector<T>& in, std::vector<T>& out, std::int64_t planes, std::int64_t H, std::int64_t W,
           bool inverse) {
    std::vector<cd> buf(in.size() / 2);
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = {double(in[2 * i]), double(in[2 * i + 1])};
    fft_detail::transform2c(buf, planes, H, W, inverse);
    for (std::size_t i = 0; i < buf.size(); ++i) {
        out[2 * i] = static_cast<T>(buf[i].real());
        out[2 * i + 1] = static_cast<T>(buf[i].imag());
    }
}

template <class T>
Tensor<T> transform(const Tensor<T>& x, bool inverse) {
    if (x.ndim() < 2) {
        throw DimensionError("fft2c: need at least 2 dimensions, got " + shape_str(x.shape()));
    }
    if (!x.is_complex()) throw ShapeError("fft2c: complex input required");
    const auto H = x.dim(x.ndim() - 2), W = x.dim(x.ndim() - 1);
    if (H < 1 || W < 1) throw DimensionError("fft2c: empty spatial plane");
    const auto planes = x.numel() / (H * W);
    auto out = detail::make_result<T>(x.shape(), Kind::complex, {x}, inverse ? "ifft2c" : "fft2c");
    apply(x.values(), out.values(), planes, H, W, inverse);
    if (out.requires_grad()) {
        // Unitary map: the gradient pulls back through the adjoint.
        out.node().backward = [planes, H, W, inverse](detail::Node<T>& self) {
            std::vector<T> tmp(self.grad.size());
            apply(self.grad, tmp, planes, H, W, !inverse);
            auto& g = self.inputs[0]->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += tmp[i];
        };
    }
    return out;
}

}  // namespace

namespace fft_detail {

void transform2c(std::span<std::complex<double>> data, std::int64_t planes, std::int64_t H, std::int64_t W,
                 bool inverse) {
    const auto h = static_cast<std::size_t>(H), w = static_cast<std::size_t>(W);
    const Plan& prow = plan_for(w);
    const Plan& pcol = plan_for(h);
    const double norm = 1.0 / std::sqrt(static_cast<double>(h * w));
    std::vector<cd> plane(h * w), scratch;
    // ifftshift(x)[i] = x[(i + n/2) % n]; fftshift(x)[i] = x[(i + (n+1)/2) % n]
    const std::size_t ish = h / 2, isw = w / 2, fsh = (h + 1) / 2, fsw = (w + 1) / 2;
    for (std::int64_t p = 0; p < planes; ++p) {
        cd* base = data.data() + static_cast<std::size_t>(p) * h * w;
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) plane[i * w + j] = base[((i + ish) % h) * w + (j + isw) % w];
        for (std::size_t i = 0; i < h; ++i) prow.run(plane.data() + i * w, 1, inverse, scratch);
        for (std::size_t j = 0; j < w; ++j) pcol.run(plane.data() + j, w, inverse, scratch);
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) base[i * w + j] = plane[((i + fsh) % h) * w + (j + fsw) % w] * norm;
    }
}

}  // namespace fft_detail

template <class T>
Tensor<T> fft2c(const Tensor<T>& x) {
    return transform(x, false);
}

template <class T>
Tensor<T> ifft2c(const Tensor<T>& x) {
    return transform(x, true);
}

template Tensor<float> fft2c(const Tensor<float>&);
template Tensor<double> fft2c(const Tensor<double>&);
template Tensor<float> ifft2c(const Tensor<float>&);
template Tensor<double> ifft2c(const Tensor<double>&);

}  // namespace ttt
