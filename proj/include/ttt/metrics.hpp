#pragma once

#include <optional>
#include <string>

#include "ttt/tensor.hpp"

namespace ttt {

// SSIM with a 7x7 uniform window, C1 = (0.01 L)^2, C2 = (0.03 L)^2 and sample
// (N-1) covariance normalization, averaged over every window position that
// fits inside the image (no padding).
double ssim(const Tensor<float>& x, const Tensor<float>& ref, double data_range);

// ||x - ref||_1 / ||ref||_1
double nl1(const Tensor<float>& x, const Tensor<float>& ref);

// Gap bookkeeping for one shift. fraction_closed is only defined when the gap
// before adaptation exceeds kGapThreshold.
struct GapReport {
    static constexpr double kGapThreshold = 1e-3;

    double ssim_qq = 0.0;
    double ssim_pq = 0.0;
    double ssim_qq_ttt = 0.0;
    double ssim_pq_ttt = 0.0;
    double gap_before = 0.0;
    double gap_after = 0.0;
    std::optional<double> fraction_closed;

    std::string to_json() const;
    static std::string csv_header();
    std::string csv_row() const;
    // Human-readable table in the layout of the results tables.
    std::string table() const;
};

GapReport gap_metrics(double ssim_qq, double ssim_pq, double ssim_qq_ttt, double ssim_pq_ttt);

}  // namespace ttt
