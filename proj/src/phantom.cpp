#include "ttt/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "json.hpp"
#include "ttt/fft.hpp"
#include "ttt/ksp.hpp"
#include "ttt/ops.hpp"
#include "ttt/random.hpp"

namespace ttt {

namespace {

constexpr double kFeatherPixels = 2.0;

struct Shape2D {
    double cx, cy, a, b, angle, intensity;
};

// Signed distance (normalized units, negative inside) from (x, y) to the shape
// boundary. Exact for rectangles; radial distance for ellipses.
double signed_distance(PhantomFamily family, const Shape2D& s, double x, double y) {
    const double c = std::cos(s.angle), sn = std::sin(s.angle);
    const double dx = x - s.cx, dy = y - s.cy;
    const double u = c * dx + sn * dy;
    const double v = -sn * dx + c * dy;
    if (family == PhantomFamily::rectangles) {
        return std::max(std::abs(u) - s.a, std::abs(v) - s.b);
    }
    const double rho = std::hypot(u, v);
    if (rho == 0.0) return -std::min(s.a, s.b);
    const double cu = u / rho, cv = v / rho;
    const double boundary = 1.0 / std::sqrt((cu / s.a) * (cu / s.a) + (cv / s.b) * (cv / s.b));
    return rho - boundary;
}

}  // namespace

void PhantomSpec::validate() const {
    if (count_min < 0 || count_max < count_min) throw ConfigError("phantom: invalid count range");
    if (resolution < 32 || resolution > 128) throw ConfigError("phantom: resolution must lie in [32, 128]");
    if (n_coils < 1) throw ConfigError("phantom: n_coils must be >= 1");
    if (transform == IntensityTransform::gamma && !(gamma > 0.0)) throw ConfigError("phantom: gamma must be > 0");
}

std::string to_string(PhantomFamily f) { return f == PhantomFamily::ellipses ? "ellipses" : "rectangles"; }

std::string to_string(IntensityTransform t) {
    switch (t) {
        case IntensityTransform::identity: return "identity";
        case IntensityTransform::inverted: return "inverted";
        case IntensityTransform::gamma: return "gamma";
    }
    return "?";
}

PhantomFamily parse_family(const std::string& s) {
    if (s == "ellipses") return PhantomFamily::ellipses;
    if (s == "rectangles") return PhantomFamily::rectangles;
    throw ConfigError("unknown phantom family '" + s + "'");
}

IntensityTransform parse_transform(const std::string& s) {
    if (s == "identity") return IntensityTransform::identity;
    if (s == "inverted") return IntensityTransform::inverted;
    if (s == "gamma") return IntensityTransform::gamma;
    throw ConfigError("unknown intensity transform '" + s + "'");
}

Tensor<float> sample_phantom(const PhantomSpec& spec, std::uint64_t index) {
    spec.validate();
    const auto R = spec.resolution;
    Rng rng(derive_seed(spec.seed, index));
    const int count = spec.count_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.count_max - spec.count_min + 1)));

    // The first shape is a large low-intensity body, the rest are features.
    std::vector<Shape2D> shapes;
    for (int i = 0; i < count; ++i) {
        Shape2D s{};
        if (i == 0) {
            s.cx = rng.uniform(-0.05, 0.05);
            s.cy = rng.uniform(-0.05, 0.05);
            s.a = rng.uniform(0.65, 0.85);
            s.b = rng.uniform(0.55, 0.8);
            s.angle = rng.uniform(0.0, std::numbers::pi);
            s.intensity = rng.uniform(0.2, 0.4);
        } else {
            s.cx = rng.uniform(-0.5, 0.5);
            s.cy = rng.uniform(-0.5, 0.5);
            s.a = rng.uniform(0.06, 0.3);
            s.b = rng.uniform(0.06, 0.3);
            s.angle = rng.uniform(0.0, std::numbers::pi);
            s.intensity = rng.uniform(0.15, 0.6);
        }
        shapes.push_back(s);
    }

    auto img = Tensor<float>::zeros({R, R});
    auto& v = img.values();
    const double px = 2.0 / static_cast<double>(R);  // normalized units per pixel
    for (std::int64_t i = 0; i < R; ++i) {
        const double y = (static_cast<double>(i) + 0.5) * px - 1.0;
        for (std::int64_t j = 0; j < R; ++j) {
            const double x = (static_cast<double>(j) + 0.5) * px - 1.0;
            double acc = 0.0;
            for (const auto& s : shapes) {
                const double d = signed_distance(spec.family, s, x, y) / px;
                const double cover = std::clamp(0.5 - d / kFeatherPixels, 0.0, 1.0);
                acc += cover * s.intensity;
            }
            acc = std::clamp(acc, 0.0, 1.0);
            switch (spec.transform) {
                case IntensityTransform::identity: break;
                case IntensityTransform::inverted: acc = 1.0 - acc; break;
                case IntensityTransform::gamma: acc = std::pow(acc, spec.gamma); break;
            }
            v[static_cast<std::size_t>(i * R + j)] = static_cast<float>(acc);
        }
    }
    return img;
}

Tensor<float> synth_sens(int n_coils, std::int64_t H, std::int64_t W, std::uint64_t seed) {
    if (n_coils < 1) throw ConfigError("synth_sens: n_coils must be >= 1");
    auto sens = Tensor<float>::zeros({n_coils, H, W}, Kind::complex);
    auto& s = sens.values();
    const auto plane = static_cast<std::size_t>(H * W);
    if (n_coils == 1) {
        for (std::size_t p = 0; p < plane; ++p) s[2 * p] = 1.0f;
        return sens;
    }

    Rng rng(seed);
    std::vector<double> mag(static_cast<std::size_t>(n_coils) * plane), phase(mag.size());
    const double width = 0.9;
    for (int c = 0; c < n_coils; ++c) {
        const double theta = 2.0 * std::numbers::pi * (c + rng.uniform(-0.15, 0.15)) / n_coils;
        const double cx = 1.3 * std::cos(theta), cy = 1.3 * std::sin(theta);
        const double kx = rng.uniform(-0.5, 0.5), ky = rng.uniform(-0.5, 0.5);
        const double phi0 = rng.uniform(-std::numbers::pi, std::numbers::pi);
        for (std::int64_t i = 0; i < H; ++i) {
            const double y = (static_cast<double>(i) + 0.5) * 2.0 / static_cast<double>(H) - 1.0;
            for (std::int64_t j = 0; j < W; ++j) {
                const double x = (static_cast<double>(j) + 0.5) * 2.0 / static_cast<double>(W) - 1.0;
                const double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                const std::size_t q = static_cast<std::size_t>(c) * plane + static_cast<std::size_t>(i * W + j);
                mag[q] = std::exp(-r2 / (2.0 * width * width));
                phase[q] = phi0 + kx * x + ky * y;
            }
        }
    }
    for (std::size_t p = 0; p < plane; ++p) {
        double norm = 0.0;
        for (int c = 0; c < n_coils; ++c) norm += mag[static_cast<std::size_t>(c) * plane + p] * mag[static_cast<std::size_t>(c) * plane + p];
        norm = std::sqrt(norm);
        for (int c = 0; c < n_coils; ++c) {
            const std::size_t q = static_cast<std::size_t>(c) * plane + p;
            const double m = mag[q] / norm;
            s[2 * q] = static_cast<float>(m * std::cos(phase[q]));
            s[2 * q + 1] = static_cast<float>(m * std::sin(phase[q]));
        }
    }
    return sens;
}

KSpaceSample make_sample(const PhantomSpec& spec, std::uint64_t index) {
    KSpaceSample s;
    s.reference = sample_phantom(spec, index);
    s.sens = synth_sens(spec.n_coils, spec.resolution, spec.resolution, derive_seed(spec.seed ^ 0x5e25ULL, index));
    s.kspace_full = fft2c(ops::coil_expand(s.reference, s.sens)).detach();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%05llu", static_cast<unsigned long long>(index));
    s.id = buf;
    return s;
}

void make_dataset(const PhantomSpec& spec, std::int64_t n_samples, const std::filesystem::path& out_dir,
                  const std::string& id_prefix) {
    spec.validate();
    if (n_samples < 0) throw ConfigError("make_dataset: n_samples must be >= 0");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());

    nlohmann::json manifest;
    manifest["version"] = 1;
    manifest["spec"] = {{"family", to_string(spec.family)},
                        {"count_range", {spec.count_min, spec.count_max}},
                        {"intensity_transform", to_string(spec.transform)},
                        {"gamma", spec.gamma},
                        {"resolution", spec.resolution},
                        {"n_coils", spec.n_coils},
                        {"seed", spec.seed}};
    manifest["samples"] = nlohmann::json::array();
    for (std::int64_t i = 0; i < n_samples; ++i) {
        auto sample = make_sample(spec, static_cast<std::uint64_t>(i));
        sample.id = id_prefix + "_" + sample.id;
        const std::string file = sample.id + ".ksp";
        ksp::write_sample(out_dir / file, sample);
        manifest["samples"].push_back({{"id", sample.id}, {"file", file}});
    }
    const std::string text = manifest.dump(2) + "\n";
    ksp::write_bytes(out_dir / "manifest.json", std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace ttt
