#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ttt/mri.hpp"
#include "ttt/unet.hpp"

namespace ttt {

enum class LossMode { supervised, self, joint };
enum class MaskPolicy { fixed_per_sample, resampled_per_epoch };

std::string to_string(LossMode m);
LossMode parse_loss_mode(const std::string& s);
std::string to_string(MaskPolicy p);
MaskPolicy parse_mask_policy(const std::string& s);

struct TrainConfig {
    LossMode mode = LossMode::joint;
    int epochs = 10;
    double lr = 1e-4;
    int batch_size = 1;
    double acceleration = 4.0;
    double center_fraction = 0.08;
    MaskPolicy mask_policy = MaskPolicy::fixed_per_sample;
    std::uint64_t seed = 0;
    double sup_weight = 1.0;
    double self_weight = 1.0;
    double val_fraction = 0.1;  // share of each training pool held out for checkpoint selection
    std::int64_t epoch_size = 0;  // 0: size of the (primary) training pool

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;  // 1-based
    double l_sup = 0.0;
    double l_self = 0.0;
    double val_ssim = 0.0;  // NaN when nothing is held out
    double seconds = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    double seconds = 0.0;

    // epoch,l_sup,l_self,val_ssim,seconds
    std::string to_csv() const;
};

struct TrainResult {
    ReconModel best;   // highest validation SSIM (final model if nothing is held out)
    ReconModel final;
    TrainHistory history;
};

template <class T>
struct LossParts {
    Tensor<T> total;
    double l_sup = 0.0;
    double l_self = 0.0;
};

// L_sup = ||x - out||_1 / ||x||_1 and L_self = ||y - A out||_1 / ||y||_1 for a
// given reconstruction `out` (real [H, W]). The total combines them per mode
// with the configured weights.
template <class T>
LossParts<T> joint_loss_from_output(const Tensor<T>& output, const Measurement<T>& m, LossMode mode,
                                    double sup_weight = 1.0, double self_weight = 1.0);

// Same, with out = f(A^dagger y) for the model.
template <class T>
LossParts<T> joint_loss(const ReconModelT<T>& model, const Measurement<T>& m, LossMode mode,
                        double sup_weight = 1.0, double self_weight = 1.0);

// One drawn training example: pool 0 is P (or the only pool), pool 1 is Q.
struct Pick {
    int pool = 0;
    std::size_t index = 0;
    bool operator==(const Pick&) const = default;
};

// The per-epoch sample stream: round(m * n) draws from Q and the rest from P,
// each without replacement (cycling through fresh permutations if a pool is
// too small), shuffled together.
std::vector<Pick> mixture_epoch_stream(std::size_t pool_p, std::size_t pool_q, double m, std::size_t n,
                                       std::uint64_t seed, int epoch);

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult train(const ReconModel& model, const std::vector<KSpaceSample>& dataset, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

TrainResult train_mixture(const ReconModel& model, const std::vector<KSpaceSample>& dataset_p,
                          const std::vector<KSpaceSample>& dataset_q, double m, const TrainConfig& cfg,
                          const EpochCallback& on_epoch = {});

// Mean SSIM (data range = max of each reference) of f(A^dagger y) over samples.
double evaluate_baseline(const ReconModel& model, const std::vector<Measurement<float>>& measurements);

}  // namespace ttt
