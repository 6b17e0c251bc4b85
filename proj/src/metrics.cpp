#include "ttt/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <vector>

#include "json.hpp"

namespace ttt {

namespace {

constexpr int kWin = 7;

void require_image_pair(const Tensor<float>& x, const Tensor<float>& ref) {
    if (x.ndim() != 2 || x.is_complex() || x.shape() != ref.shape() || ref.is_complex()) {
        throw ShapeError("image pair must be real [H, W] of equal shape, got " + shape_str(x.shape()) + " and " +
                         shape_str(ref.shape()));
    }
}

// Box sums over every kWin x kWin window via a summed-area table.
std::vector<double> window_sums(const std::vector<double>& v, std::int64_t H, std::int64_t W) {
    std::vector<double> sat(static_cast<std::size_t>((H + 1) * (W + 1)), 0.0);
    for (std::int64_t i = 0; i < H; ++i) {
        double row = 0.0;
        for (std::int64_t j = 0; j < W; ++j) {
            row += v[static_cast<std::size_t>(i * W + j)];
            sat[static_cast<std::size_t>((i + 1) * (W + 1) + j + 1)] = sat[static_cast<std::size_t>(i * (W + 1) + j + 1)] + row;
        }
    }
    const std::int64_t oh = H - kWin + 1, ow = W - kWin + 1;
    std::vector<double> out(static_cast<std::size_t>(oh * ow));
    auto at = [&](std::int64_t i, std::int64_t j) { return sat[static_cast<std::size_t>(i * (W + 1) + j)]; };
    for (std::int64_t i = 0; i < oh; ++i)
        for (std::int64_t j = 0; j < ow; ++j)
            out[static_cast<std::size_t>(i * ow + j)] = at(i + kWin, j + kWin) - at(i, j + kWin) - at(i + kWin, j) + at(i, j);
    return out;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

}  // namespace

double ssim(const Tensor<float>& x, const Tensor<float>& ref, double data_range) {
    require_image_pair(x, ref);
    if (!(data_range > 0.0)) throw ContractError("ssim: data_range must be positive");
    const auto H = x.dim(0), W = x.dim(1);
    if (H < kWin || W < kWin) throw SizeError("ssim: image must be at least 7x7, got " + shape_str(x.shape()));

    const auto n = static_cast<std::size_t>(H * W);
    std::vector<double> a(n), b(n), aa(n), bb(n), ab(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = x.values()[i];
        b[i] = ref.values()[i];
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    const auto sa = window_sums(a, H, W), sb = window_sums(b, H, W);
    const auto saa = window_sums(aa, H, W), sbb = window_sums(bb, H, W), sab = window_sums(ab, H, W);

    const double np = kWin * kWin;
    const double cov_norm = np / (np - 1.0);
    const double c1 = (0.01 * data_range) * (0.01 * data_range);
    const double c2 = (0.03 * data_range) * (0.03 * data_range);
    double total = 0.0;
    for (std::size_t k = 0; k < sa.size(); ++k) {
        const double ux = sa[k] / np, uy = sb[k] / np;
        const double vx = cov_norm * (saa[k] / np - ux * ux);
        const double vy = cov_norm * (sbb[k] / np - uy * uy);
        const double vxy = cov_norm * (sab[k] / np - ux * uy);
        const double num = (2.0 * ux * uy + c1) * (2.0 * vxy + c2);
        const double den = (ux * ux + uy * uy + c1) * (vx + vy + c2);
        total += num / den;
    }
    return total / static_cast<double>(sa.size());
}

double nl1(const Tensor<float>& x, const Tensor<float>& ref) {
    if (x.shape() != ref.shape() || x.kind() != ref.kind()) throw ShapeError("nl1: shape mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < x.values().size(); ++i) {
        num += std::abs(static_cast<double>(x.values()[i]) - ref.values()[i]);
        den += std::abs(static_cast<double>(ref.values()[i]));
    }
    if (den == 0.0) throw DegenerateError("nl1: reference has zero l1 norm");
    return num / den;
}

GapReport gap_metrics(double ssim_qq, double ssim_pq, double ssim_qq_ttt, double ssim_pq_ttt) {
    for (double v : {ssim_qq, ssim_pq, ssim_qq_ttt, ssim_pq_ttt}) {
        if (!(v >= -1.0 && v <= 1.0)) throw ContractError("gap_metrics: SSIM values must lie in [-1, 1]");
    }
    GapReport r;
    r.ssim_qq = ssim_qq;
    r.ssim_pq = ssim_pq;
    r.ssim_qq_ttt = ssim_qq_ttt;
    r.ssim_pq_ttt = ssim_pq_ttt;
    r.gap_before = ssim_qq - ssim_pq;
    r.gap_after = ssim_qq_ttt - ssim_pq_ttt;
    if (r.gap_before > GapReport::kGapThreshold) r.fraction_closed = (r.gap_before - r.gap_after) / r.gap_before;
    return r;
}

std::string GapReport::to_json() const {
    nlohmann::json j{{"ssim_QQ", ssim_qq},         {"ssim_PQ", ssim_pq},       {"ssim_QQ_ttt", ssim_qq_ttt},
                     {"ssim_PQ_ttt", ssim_pq_ttt}, {"gap_before", gap_before}, {"gap_after", gap_after}};
    j["fraction_closed"] = fraction_closed ? nlohmann::json(*fraction_closed) : nlohmann::json(nullptr);
    return j.dump(2);
}

std::string GapReport::csv_header() {
    return "ssim_QQ,ssim_PQ,ssim_QQ_ttt,ssim_PQ_ttt,gap_before,gap_after,fraction_closed";
}

std::string GapReport::csv_row() const {
    std::string row;
    for (double v : {ssim_qq, ssim_pq, ssim_qq_ttt, ssim_pq_ttt, gap_before, gap_after}) row += fmt("%.6f", v) + ",";
    row += fraction_closed ? fmt("%.6f", *fraction_closed) : std::string("undefined");
    return row;
}

std::string GapReport::table() const {
    std::string t;
    t += "train on Q test on Q                 " + fmt("%.4f", ssim_qq) + "\n";
    t += "train on P test on Q                 " + fmt("%.4f", ssim_pq) + "\n";
    t += "distribution shift performance gap   " + fmt("%.4f", gap_before) + "\n";
    t += "train on Q test on Q + TTT           " + fmt("%.4f", ssim_qq_ttt) + "\n";
    t += "train on P test on Q + TTT           " + fmt("%.4f", ssim_pq_ttt) + "\n";
    t += "distribution shift performance gap   " + fmt("%.4f", gap_after) + "\n";
    t += "fraction of gap closed by TTT        " +
         (fraction_closed ? fmt("%.1f%%", 100.0 * *fraction_closed) : std::string("undefined (gap below threshold)")) +
         "\n";
    return t;
}

}  // namespace ttt
