#include "ttt/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace ttt::ops {

namespace {

using detail::make_result;

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape() || a.kind() != b.kind()) {
        throw ShapeError(std::string(op) + ": operand mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

template <class T>
void require_chw(const Tensor<T>& x, const char* op) {
    if (x.ndim() != 3 || x.is_complex()) {
        throw ShapeError(std::string(op) + ": expected real [C, H, W], got " + shape_str(x.shape()));
    }
}

template <class T>
void require_complex(const Tensor<T>& x, const char* op) {
    if (!x.is_complex()) throw ShapeError(std::string(op) + ": expected a complex tensor");
}

template <class T>
constexpr T sign(T v) {
    return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
}

}  // namespace

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    require_same(a, b, "add");
    auto out = make_result<T>(a.shape(), a.kind(), {a, b}, "add");
    auto& o = out.values();
    const auto& x = a.values();
    const auto& y = b.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
    if (out.requires_grad()) {
        out.node().backward = [](detail::Node<T>& self) {
            for (auto& in : self.inputs) {
                if (!in->requires_grad) continue;
                auto& g = in->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    require_same(a, b, "sub");
    auto out = make_result<T>(a.shape(), a.kind(), {a, b}, "sub");
    auto& o = out.values();
    const auto& x = a.values();
    const auto& y = b.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
    if (out.requires_grad()) {
        out.node().backward = [](detail::Node<T>& self) {
            if (self.inputs[0]->requires_grad) {
                auto& g = self.inputs[0]->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
            }
            if (self.inputs[1]->requires_grad) {
                auto& g = self.inputs[1]->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    require_same(a, b, "mul");
    auto out = make_result<T>(a.shape(), a.kind(), {a, b}, "mul");
    auto& o = out.values();
    const auto& x = a.values();
    const auto& y = b.values();
    const bool cplx = a.is_complex();
    if (!cplx) {
        for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
    } else {
        for (std::size_t i = 0; i < o.size(); i += 2) {
            o[i] = x[i] * y[i] - x[i + 1] * y[i + 1];
            o[i + 1] = x[i] * y[i + 1] + x[i + 1] * y[i];
        }
    }
    if (out.requires_grad()) {
        out.node().backward = [cplx](detail::Node<T>& self) {
            // For z = a * b (complex): g_a = g * conj(b), g_b = g * conj(a).
            for (int k = 0; k < 2; ++k) {
                auto& in = self.inputs[k];
                if (!in->requires_grad) continue;
                const auto& other = self.inputs[1 - k]->data;
                auto& g = in->ensure_grad();
                const auto& go = self.grad;
                if (!cplx) {
                    for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i] * other[i];
                } else {
                    for (std::size_t i = 0; i < g.size(); i += 2) {
                        g[i] += go[i] * other[i] + go[i + 1] * other[i + 1];
                        g[i + 1] += go[i + 1] * other[i] - go[i] * other[i + 1];
                    }
                }
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, double factor) {
    auto out = make_result<T>(a.shape(), a.kind(), {a}, "scale");
    auto& o = out.values();
    const auto& x = a.values();
    const T f = static_cast<T>(factor);
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * f;
    if (out.requires_grad()) {
        out.node().backward = [f](detail::Node<T>& self) {
            auto& g = self.inputs[0]->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * f;
        };
    }
    return out;
}

template <class T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) {
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    }
    auto out = make_result<T>(std::move(shape), a.kind(), {a}, "reshape");
    out.values() = a.values();
    if (out.requires_grad()) {
        out.node().backward = [](detail::Node<T>& self) {
            auto& g = self.inputs[0]->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        };
    }
    return out;
}

template <class T>
Tensor<T> leaky_relu(const Tensor<T>& x, double slope) {
    if (x.is_complex()) throw ShapeError("leaky_relu: real input required");
    auto out = make_result<T>(x.shape(), Kind::real, {x}, "leaky_relu");
    auto& o = out.values();
    const auto& v = x.values();
    const T s = static_cast<T>(slope);
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = v[i] > T(0) ? v[i] : v[i] * s;
    if (out.requires_grad()) {
        out.node().backward = [s](detail::Node<T>& self) {
            const auto& v = self.inputs[0]->data;
            auto& g = self.inputs[0]->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (v[i] > T(0) ? T(1) : s);
        };
    }
    return out;
}

template <class T>
Tensor<T> instance_norm(const Tensor<T>& x, double eps) {
    require_chw(x, "instance_norm");
    const auto C = static_cast<std::size_t>(x.dim(0));
    const auto plane = static_cast<std::size_t>(x.dim(1) * x.dim(2));
    auto out = make_result<T>(x.shape(), Kind::real, {x}, "instance_norm");
    auto& o = out.values();
    const auto& v = x.values();
    std::vector<T> inv_std(C);
    for (std::size_t c = 0; c < C; ++c) {
        const T* p = v.data() + c * plane;
        double mean = 0.0;
        for (std::size_t i = 0; i < plane; ++i) mean += p[i];
        mean /= static_cast<double>(plane);
        double var = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
            const double d = p[i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(plane);
        const double r = 1.0 / std::sqrt(var + eps);
        inv_std[c] = static_cast<T>(r);
        T* q = o.data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) q[i] = static_cast<T>((p[i] - mean) * r);
    }
    if (out.requires_grad()) {
        out.node().backward = [C, plane, inv_std = std::move(inv_std)](detail::Node<T>& self) {
            // dx = r * (dy - mean(dy) - y * mean(dy * y))
            auto& g = self.inputs[0]->ensure_grad();
            const auto& y = self.data;
            const auto& dy = self.grad;
            for (std::size_t c = 0; c < C; ++c) {
                const std::size_t off = c * plane;
                double mdy = 0.0, mdyy = 0.0;
                for (std::size_t i = 0; i < plane; ++i) {
                    mdy += dy[off + i];
                    mdyy += static_cast<double>(dy[off + i]) * y[off + i];
                }
                mdy /= static_cast<double>(plane);
                mdyy /= static_cast<double>(plane);
                const double r = inv_std[c];
                for (std::size_t i = 0; i < plane; ++i) {
                    g[off + i] += static_cast<T>(r * (dy[off + i] - mdy - y[off + i] * mdyy));
                }
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> avgpool2x(const Tensor<T>& x) {
    require_chw(x, "avgpool2x");
    const auto C = x.dim(0), H = x.dim(1), W = x.dim(2);
    if (H % 2 || W % 2) throw ShapeError("avgpool2x: spatial size must be even, got " + shape_str(x.shape()));
    const auto h = H / 2, w = W / 2;
    auto out = make_result<T>({C, h, w}, Kind::real, {x}, "avgpool2x");
    auto& o = out.values();
    const auto& v = x.values();
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t i = 0; i < h; ++i)
            for (std::int64_t j = 0; j < w; ++j) {
                const T* p = v.data() + (c * H + 2 * i) * W + 2 * j;
                o[(c * h + i) * w + j] = (p[0] + p[1] + p[W] + p[W + 1]) * T(0.25);
            }
    if (out.requires_grad()) {
        out.node().backward = [C, H, W](detail::Node<T>& self) {
            auto& g = self.inputs[0]->ensure_grad();
            const auto h = H / 2, w = W / 2;
            for (std::int64_t c = 0; c < C; ++c)
                for (std::int64_t i = 0; i < h; ++i)
                    for (std::int64_t j = 0; j < w; ++j) {
                        const T d = self.grad[(c * h + i) * w + j] * T(0.25);
                        T* p = g.data() + (c * H + 2 * i) * W + 2 * j;
                        p[0] += d;
                        p[1] += d;
                        p[W] += d;
                        p[W + 1] += d;
                    }
        };
    }
    return out;
}

template <class T>
Tensor<T> upsample2x(const Tensor<T>& x) {
    require_chw(x, "upsample2x");
    const auto C = x.dim(0), h = x.dim(1), w = x.dim(2);
    const auto H = 2 * h, W = 2 * w;
    auto out = make_result<T>({C, H, W}, Kind::real, {x}, "upsample2x");
    auto& o = out.values();
    const auto& v = x.values();
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t i = 0; i < H; ++i)
            for (std::int64_t j = 0; j < W; ++j) o[(c * H + i) * W + j] = v[(c * h + i / 2) * w + j / 2];
    if (out.requires_grad()) {
        out.node().backward = [C, h, w](detail::Node<T>& self) {
            auto& g = self.inputs[0]->ensure_grad();
            const auto H = 2 * h, W = 2 * w;
            for (std::int64_t c = 0; c < C; ++c)
                for (std::int64_t i = 0; i < H; ++i)
                    for (std::int64_t j = 0; j < W; ++j)
                        g[(c * h + i / 2) * w + j / 2] += self.grad[(c * H + i) * W + j];
        };
    }
    return out;
}

template <class T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b) {
    require_chw(a, "concat");
    require_chw(b, "concat");
    if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2)) {
        throw ShapeError("concat: spatial mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    auto out = make_result<T>({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)}, Kind::real, {a, b}, "concat");
    auto& o = out.values();
    std::copy(a.values().begin(), a.values().end(), o.begin());
    std::copy(b.values().begin(), b.values().end(), o.begin() + static_cast<std::ptrdiff_t>(a.values().size()));
    if (out.requires_grad()) {
        const std::size_t split = a.values().size();
        out.node().backward = [split](detail::Node<T>& self) {
            if (self.inputs[0]->requires_grad) {
                auto& g = self.inputs[0]->ensure_grad();
                for (std::size_t i = 0; i < split; ++i) g[i] += self.grad[i];
            }
            if (self.inputs[1]->requires_grad) {
                auto& g = self.inputs[1]->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[split + i];
            }
        };
    }
    return out;
}

namespace {

// col[(ci * k + ky) * k + kx, y * W + x] = input[ci, y + ky - r, x + kx - r] (0 outside)
template <class T>
void im2col(const T* in, std::int64_t C, std::int64_t H, std::int64_t W, std::int64_t k, T* col) {
    const std::int64_t r = k / 2;
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t ky = 0; ky < k; ++ky)
            for (std::int64_t kx = 0; kx < k; ++kx) {
                T* row = col + ((c * k + ky) * k + kx) * H * W;
                const std::int64_t dy = ky - r, dx = kx - r;
                for (std::int64_t y = 0; y < H; ++y) {
                    const std::int64_t sy = y + dy;
                    T* dst = row + y * W;
                    if (sy < 0 || sy >= H) {
                        std::fill(dst, dst + W, T(0));
                        continue;
                    }
                    const T* src = in + (c * H + sy) * W;
                    const std::int64_t x0 = std::max<std::int64_t>(0, -dx);
                    const std::int64_t x1 = std::min<std::int64_t>(W, W - dx);
                    std::fill(dst, dst + x0, T(0));
                    std::copy(src + x0 + dx, src + x1 + dx, dst + x0);
                    std::fill(dst + x1, dst + W, T(0));
                }
            }
}

template <class T>
void col2im(const T* col, std::int64_t C, std::int64_t H, std::int64_t W, std::int64_t k, T* out) {
    const std::int64_t r = k / 2;
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t ky = 0; ky < k; ++ky)
            for (std::int64_t kx = 0; kx < k; ++kx) {
                const T* row = col + ((c * k + ky) * k + kx) * H * W;
                const std::int64_t dy = ky - r, dx = kx - r;
                for (std::int64_t y = 0; y < H; ++y) {
                    const std::int64_t sy = y + dy;
                    if (sy < 0 || sy >= H) continue;
                    T* dst = out + (c * H + sy) * W;
                    const T* src = row + y * W;
                    const std::int64_t x0 = std::max<std::int64_t>(0, -dx);
                    const std::int64_t x1 = std::min<std::int64_t>(W, W - dx);
                    for (std::int64_t x = x0; x < x1; ++x) dst[x + dx] += src[x];
                }
            }
}

}  // namespace

template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const std::optional<Tensor<T>>& bias) {
    require_chw(input, "conv2d");
    if (kernel.ndim() != 4 || kernel.is_complex()) {
        throw ShapeError("conv2d: kernel must be real [C_out, C_in, k, k], got " + shape_str(kernel.shape()));
    }
    const auto Cin = input.dim(0), H = input.dim(1), W = input.dim(2);
    const auto Cout = kernel.dim(0), k = kernel.dim(2);
    if (kernel.dim(1) != Cin) {
        throw ShapeError("conv2d: channel mismatch, input has " + std::to_string(Cin) + ", kernel expects " +
                         std::to_string(kernel.dim(1)));
    }
    if (kernel.dim(3) != k || k % 2 == 0) throw ShapeError("conv2d: kernel must be square with odd size");
    if (bias && (bias->ndim() != 1 || bias->dim(0) != Cout)) {
        throw ShapeError("conv2d: bias must have shape [" + std::to_string(Cout) + "]");
    }

    std::vector<Tensor<T>> inputs{input, kernel};
    if (bias) inputs.push_back(*bias);
    auto out = make_result<T>({Cout, H, W}, Kind::real, inputs, "conv2d");

    const std::int64_t K = Cin * k * k, HW = H * W;
    // Products run on Eigen-owned (aligned) buffers only. Eigen peels
    // unaligned maps by address, which would make rounding depend on where
    // the heap placed a tensor.
    RowMat<T> col(K, HW);
    if (k == 1) std::copy(input.values().begin(), input.values().end(), col.data());
    else im2col(input.values().data(), Cin, H, W, k, col.data());
    const RowMat<T> Km = Eigen::Map<const RowMat<T>>(kernel.values().data(), Cout, K);
    RowMat<T> Ym = Km * col;
    if (bias) {
        const auto& b = bias->values();
        for (std::int64_t c = 0; c < Cout; ++c) Ym.row(c).array() += b[static_cast<std::size_t>(c)];
    }
    std::copy(Ym.data(), Ym.data() + Cout * HW, out.values().data());

    if (out.requires_grad()) {
        out.node().backward = [Cin, Cout, H, W, k, K, HW, col = std::move(col)](detail::Node<T>& self) {
            const RowMat<T> G = Eigen::Map<const RowMat<T>>(self.grad.data(), Cout, HW);
            auto& in = *self.inputs[0];
            auto& ker = *self.inputs[1];
            if (ker.requires_grad) {
                const RowMat<T> dK = G * col.transpose();
                auto& g = ker.ensure_grad();
                for (std::int64_t i = 0; i < Cout * K; ++i) g[static_cast<std::size_t>(i)] += dK.data()[i];
            }
            if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
                auto& db = self.inputs[2]->ensure_grad();
                for (std::int64_t c = 0; c < Cout; ++c) {
                    T acc = 0;
                    for (std::int64_t i = 0; i < HW; ++i) acc += G(c, i);
                    db[static_cast<std::size_t>(c)] += acc;
                }
            }
            if (in.requires_grad) {
                const RowMat<T> Kt = Eigen::Map<const RowMat<T>>(ker.data.data(), Cout, K).transpose();
                const RowMat<T> dcol = Kt * G;
                auto& g = in.ensure_grad();
                if (k == 1) {
                    for (std::int64_t i = 0; i < K * HW; ++i) g[static_cast<std::size_t>(i)] += dcol.data()[i];
                } else {
                    col2im(dcol.data(), Cin, H, W, k, g.data());
                }
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> to_complex(const Tensor<T>& real) {
    if (real.is_complex()) throw ShapeError("to_complex: input already complex");
    auto out = make_result<T>(real.shape(), Kind::complex, {real}, "to_complex");
    auto& o = out.values();
    const auto& v = real.values();
    for (std::size_t i = 0; i < v.size(); ++i) o[2 * i] = v[i];
    if (out.requires_grad()) {
        out.node().backward = [](detail::Node<T>& self) {
            auto& g = self.inputs[0]->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[2 * i];
        };
    }
    return out;
}

template <class T>
Tensor<T> real_part(const Tensor<T>& z) {
    require_complex(z, "real_part");
    auto out = make_result<T>(z.shape(), Kind::real, {z}, "real_part");
    auto& o = out.values();
    const auto& v = z.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = v[2 * i];
    if (out.requires_grad()) {
        out.node().backward = [](detail::Node<T>& self) {
            auto& g = self.inputs[0]->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[2 * i] += self.grad[i];
        };
    }
    return out;
}

template <class T>
Tensor<T> complex_abs(const Tensor<T>& z) {
    require_complex(z, "complex_abs");
    auto out = make_result<T>(z.shape(), Kind::real, {z}, "complex_abs");
    auto& o = out.values();
    const auto& v = z.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::hypot(v[2 * i], v[2 * i + 1]);
    if (out.requires_grad()) {
        out.node().backward = [](detail::Node<T>& self) {
            const auto& v = self.inputs[0]->data;
            auto& g = self.inputs[0]->ensure_grad();
            for (std::size_t i = 0; i < self.data.size(); ++i) {
                const T m = self.data[i];
                if (m <= T(0)) continue;
                g[2 * i] += self.grad[i] * v[2 * i] / m;
                g[2 * i + 1] += self.grad[i] * v[2 * i + 1] / m;
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> rss(const Tensor<T>& z) {
    require_complex(z, "rss");
    if (z.ndim() < 1 || z.dim(0) < 1) throw ShapeError("rss: need at least one coil");
    const Shape out_shape(z.shape().begin() + 1, z.shape().end());
    const auto nc = static_cast<std::size_t>(z.dim(0));
    const auto n = static_cast<std::size_t>(shape_numel(out_shape));
    auto out = make_result<T>(out_shape, Kind::real, {z}, "rss");
    auto& o = out.values();
    const auto& v = z.values();
    for (std::size_t p = 0; p < n; ++p) {
        double acc = 0.0;
        for (std::size_t c = 0; c < nc; ++c) {
            const double re = v[2 * (c * n + p)], im = v[2 * (c * n + p) + 1];
            acc += re * re + im * im;
        }
        o[p] = static_cast<T>(std::sqrt(acc));
    }
    if (out.requires_grad()) {
        out.node().backward = [nc, n](detail::Node<T>& self) {
            const auto& v = self.inputs[0]->data;
            auto& g = self.inputs[0]->ensure_grad();
            for (std::size_t p = 0; p < n; ++p) {
                const T m = self.data[p];
                if (m <= T(0)) continue;
                const T s = self.grad[p] / m;
                for (std::size_t c = 0; c < nc; ++c) {
                    const std::size_t q = 2 * (c * n + p);
                    g[q] += s * v[q];
                    g[q + 1] += s * v[q + 1];
                }
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> coil_expand(const Tensor<T>& image, const Tensor<T>& sens) {
    require_complex(sens, "coil_expand");
    if (image.is_complex() || sens.ndim() != 3 || image.numel() != sens.dim(1) * sens.dim(2)) {
        throw ShapeError("coil_expand: image " + shape_str(image.shape()) + " incompatible with maps " +
                         shape_str(sens.shape()));
    }
    const auto nc = static_cast<std::size_t>(sens.dim(0));
    const auto n = static_cast<std::size_t>(image.numel());
    auto out = make_result<T>(sens.shape(), Kind::complex, {image, sens}, "coil_expand");
    auto& o = out.values();
    const auto& x = image.values();
    const auto& s = sens.values();
    for (std::size_t c = 0; c < nc; ++c)
        for (std::size_t p = 0; p < n; ++p) {
            const std::size_t q = 2 * (c * n + p);
            o[q] = s[q] * x[p];
            o[q + 1] = s[q + 1] * x[p];
        }
    if (out.requires_grad()) {
        out.node().backward = [nc, n](detail::Node<T>& self) {
            auto& img = *self.inputs[0];
            auto& sm = *self.inputs[1];
            if (img.requires_grad) {
                // Re(conj(S) * g) summed over coils
                auto& g = img.ensure_grad();
                for (std::size_t c = 0; c < nc; ++c)
                    for (std::size_t p = 0; p < n; ++p) {
                        const std::size_t q = 2 * (c * n + p);
                        g[p] += sm.data[q] * self.grad[q] + sm.data[q + 1] * self.grad[q + 1];
                    }
            }
            if (sm.requires_grad) {
                auto& g = sm.ensure_grad();
                for (std::size_t c = 0; c < nc; ++c)
                    for (std::size_t p = 0; p < n; ++p) {
                        const std::size_t q = 2 * (c * n + p);
                        g[q] += self.grad[q] * img.data[p];
                        g[q + 1] += self.grad[q + 1] * img.data[p];
                    }
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> coil_combine(const Tensor<T>& z, const Tensor<T>& sens) {
    require_complex(z, "coil_combine");
    require_complex(sens, "coil_combine");
    if (z.shape() != sens.shape() || z.ndim() != 3) {
        throw ShapeError("coil_combine: coil images " + shape_str(z.shape()) + " vs maps " + shape_str(sens.shape()));
    }
    const auto nc = static_cast<std::size_t>(z.dim(0));
    const auto n = static_cast<std::size_t>(z.dim(1) * z.dim(2));
    auto out = make_result<T>({z.dim(1), z.dim(2)}, Kind::complex, {z, sens}, "coil_combine");
    auto& o = out.values();
    const auto& v = z.values();
    const auto& s = sens.values();
    for (std::size_t c = 0; c < nc; ++c)
        for (std::size_t p = 0; p < n; ++p) {
            const std::size_t q = 2 * (c * n + p);
            o[2 * p] += s[q] * v[q] + s[q + 1] * v[q + 1];
            o[2 * p + 1] += s[q] * v[q + 1] - s[q + 1] * v[q];
        }
    if (out.requires_grad()) {
        out.node().backward = [nc, n](detail::Node<T>& self) {
            auto& zn = *self.inputs[0];
            auto& sn = *self.inputs[1];
            const auto& go = self.grad;
            if (zn.requires_grad) {
                // out = conj(S) z  ->  g_z = S g
                auto& g = zn.ensure_grad();
                for (std::size_t c = 0; c < nc; ++c)
                    for (std::size_t p = 0; p < n; ++p) {
                        const std::size_t q = 2 * (c * n + p);
                        g[q] += sn.data[q] * go[2 * p] - sn.data[q + 1] * go[2 * p + 1];
                        g[q + 1] += sn.data[q] * go[2 * p + 1] + sn.data[q + 1] * go[2 * p];
                    }
            }
            if (sn.requires_grad) {
                // out = conj(S) z is anti-linear in S: g_S = z conj(g)
                auto& g = sn.ensure_grad();
                for (std::size_t c = 0; c < nc; ++c)
                    for (std::size_t p = 0; p < n; ++p) {
                        const std::size_t q = 2 * (c * n + p);
                        g[q] += zn.data[q] * go[2 * p] + zn.data[q + 1] * go[2 * p + 1];
                        g[q + 1] += zn.data[q + 1] * go[2 * p] - zn.data[q] * go[2 * p + 1];
                    }
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> mask_columns(const Tensor<T>& x, const std::vector<std::uint8_t>& columns) {
    if (x.ndim() < 1 || static_cast<std::size_t>(x.shape().back()) != columns.size()) {
        throw ShapeError("mask_columns: mask width " + std::to_string(columns.size()) +
                         " does not match tensor " + shape_str(x.shape()));
    }
    const std::size_t W = columns.size();
    const std::size_t per = x.is_complex() ? 2 : 1;
    auto out = make_result<T>(x.shape(), x.kind(), {x}, "mask_columns");
    auto& o = out.values();
    const auto& v = x.values();
    const std::size_t rows = o.size() / (W * per);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < W; ++c) {
            if (!columns[c]) continue;
            for (std::size_t k = 0; k < per; ++k) o[(r * W + c) * per + k] = v[(r * W + c) * per + k];
        }
    if (out.requires_grad()) {
        out.node().backward = [columns, W, per, rows](detail::Node<T>& self) {
            auto& g = self.inputs[0]->ensure_grad();
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < W; ++c) {
                    if (!columns[c]) continue;
                    for (std::size_t k = 0; k < per; ++k) g[(r * W + c) * per + k] += self.grad[(r * W + c) * per + k];
                }
        };
    }
    return out;
}

template <class T>
Tensor<T> l1(const Tensor<T>& x) {
    auto out = make_result<T>({}, Kind::real, {x}, "l1");
    double acc = 0.0;
    for (T v : x.values()) acc += std::abs(static_cast<double>(v));
    out.values()[0] = static_cast<T>(acc);
    if (out.requires_grad()) {
        out.node().backward = [](detail::Node<T>& self) {
            const auto& v = self.inputs[0]->data;
            auto& g = self.inputs[0]->ensure_grad();
            const T go = self.grad[0];
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += go * sign(v[i]);
        };
    }
    return out;
}

template <class T>
Tensor<T> sum_squares(const Tensor<T>& x) {
    auto out = make_result<T>({}, Kind::real, {x}, "sum_squares");
    double acc = 0.0;
    for (T v : x.values()) acc += static_cast<double>(v) * v;
    out.values()[0] = static_cast<T>(acc);
    if (out.requires_grad()) {
        out.node().backward = [](detail::Node<T>& self) {
            const auto& v = self.inputs[0]->data;
            auto& g = self.inputs[0]->ensure_grad();
            const T go = self.grad[0];
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += T(2) * go * v[i];
        };
    }
    return out;
}

template <class T>
Tensor<T> l2(const Tensor<T>& x) {
    auto out = make_result<T>({}, Kind::real, {x}, "l2");
    double acc = 0.0;
    for (T v : x.values()) acc += static_cast<double>(v) * v;
    out.values()[0] = static_cast<T>(std::sqrt(acc));
    if (out.requires_grad()) {
        out.node().backward = [](detail::Node<T>& self) {
            const T norm = self.data[0];
            if (norm <= T(0)) return;
            const auto& v = self.inputs[0]->data;
            auto& g = self.inputs[0]->ensure_grad();
            const T s = self.grad[0] / norm;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * v[i];
        };
    }
    return out;
}

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
    if (x.is_complex()) throw ShapeError("sum: real input required");
    auto out = make_result<T>({}, Kind::real, {x}, "sum");
    double acc = 0.0;
    for (T v : x.values()) acc += v;
    out.values()[0] = static_cast<T>(acc);
    if (out.requires_grad()) {
        out.node().backward = [](detail::Node<T>& self) {
            auto& g = self.inputs[0]->ensure_grad();
            for (auto& gi : g) gi += self.grad[0];
        };
    }
    return out;
}

template <class T>
double max_abs(const Tensor<T>& x) {
    double m = 0.0;
    if (x.is_complex()) {
        const auto& v = x.values();
        for (std::size_t i = 0; i < v.size(); i += 2) m = std::max(m, std::hypot(double(v[i]), double(v[i + 1])));
    } else {
        for (T v : x.values()) m = std::max(m, std::abs(static_cast<double>(v)));
    }
    return m;
}

#define TTT_INSTANTIATE(T)                                                                           \
    template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                      \
    template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                      \
    template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                      \
    template Tensor<T> scale(const Tensor<T>&, double);                                              \
    template Tensor<T> reshape(const Tensor<T>&, Shape);                                             \
    template Tensor<T> leaky_relu(const Tensor<T>&, double);                                         \
    template Tensor<T> instance_norm(const Tensor<T>&, double);                                      \
    template Tensor<T> avgpool2x(const Tensor<T>&);                                                  \
    template Tensor<T> upsample2x(const Tensor<T>&);                                                 \
    template Tensor<T> concat(const Tensor<T>&, const Tensor<T>&);                                   \
    template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const std::optional<Tensor<T>>&);  \
    template Tensor<T> to_complex(const Tensor<T>&);                                                 \
    template Tensor<T> real_part(const Tensor<T>&);                                                  \
    template Tensor<T> complex_abs(const Tensor<T>&);                                                \
    template Tensor<T> rss(const Tensor<T>&);                                                        \
    template Tensor<T> coil_expand(const Tensor<T>&, const Tensor<T>&);                              \
    template Tensor<T> coil_combine(const Tensor<T>&, const Tensor<T>&);                             \
    template Tensor<T> mask_columns(const Tensor<T>&, const std::vector<std::uint8_t>&);             \
    template Tensor<T> l1(const Tensor<T>&);                                                         \
    template Tensor<T> sum_squares(const Tensor<T>&);                                                \
    template Tensor<T> l2(const Tensor<T>&);                                                         \
    template Tensor<T> sum(const Tensor<T>&);                                                        \
    template double max_abs(const Tensor<T>&);

TTT_INSTANTIATE(float)
TTT_INSTANTIATE(double)

#undef TTT_INSTANTIATE

}  // namespace ttt::ops
