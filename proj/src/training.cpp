#include "ttt/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include "ttt/adam.hpp"
#include "ttt/autodiff.hpp"
#include "ttt/dataset.hpp"
#include "ttt/metrics.hpp"
#include "ttt/ops.hpp"
#include "ttt/random.hpp"

namespace ttt {

namespace {

constexpr std::uint64_t kHoldoutKey = 0x401d;
constexpr std::uint64_t kStreamKey = 0x57ea;

std::vector<std::size_t> draw_without_replacement(std::size_t count, std::size_t pool, Rng& rng) {
    std::vector<std::size_t> out;
    out.reserve(count);
    while (out.size() < count && pool > 0) {
        std::vector<std::size_t> perm(pool);
        for (std::size_t i = 0; i < pool; ++i) perm[i] = i;
        rng.shuffle(perm);
        for (std::size_t i = 0; i < pool && out.size() < count; ++i) out.push_back(perm[i]);
    }
    return out;
}

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};

// Same seed for every pool, so a pool behaves identically whichever slot it
// occupies.
Split holdout(std::size_t n, double val_fraction, std::uint64_t seed) {
    Split s;
    const auto n_val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(n) + 1e-9));
    Rng rng(derive_seed(seed, kHoldoutKey));
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);
    std::vector<std::uint8_t> is_val(n, 0);
    for (std::size_t i = 0; i < n_val; ++i) is_val[perm[i]] = 1;
    for (std::size_t i = 0; i < n; ++i) (is_val[i] ? s.val : s.train).push_back(i);
    return s;
}

struct Example {
    const KSpaceSample* sample;
    Measurement<float> measurement;  // cached for the fixed mask policy
    Tensor<float> input;             // A^dagger y
};

Measurement<float> make_training_measurement(const KSpaceSample& s, const TrainConfig& cfg, int epoch) {
    const std::uint64_t salt = cfg.mask_policy == MaskPolicy::fixed_per_sample ? 0 : static_cast<std::uint64_t>(epoch) + 1;
    const auto mask = mask_for_sample(s.id, s.kspace_full.dim(2), cfg.acceleration, cfg.center_fraction, cfg.seed, salt);
    return measure(s, mask);
}

TrainResult run_training(const ReconModel& init, const std::vector<const KSpaceSample*>& pool_p,
                         const std::vector<const KSpaceSample*>& pool_q, double m,
                         const std::vector<const KSpaceSample*>& val_samples, const TrainConfig& cfg,
                         const EpochCallback& on_epoch) {
    cfg.validate();
    TrainResult result;
    result.final = init.clone();
    result.best = init.clone();
    if (cfg.epochs == 0) return result;

    const auto t_start = std::chrono::steady_clock::now();
    ReconModel model = init.clone();
    AdamState<float> adam(model.params, AdamHyper{cfg.lr});

    std::vector<Example> ex_p, ex_q;
    auto prepare = [&](const std::vector<const KSpaceSample*>& pool, std::vector<Example>& out) {
        for (const auto* s : pool) {
            auto meas = make_training_measurement(*s, cfg, 0);
            auto input = adjoint_zf(meas.kspace, meas.mask);
            out.push_back({s, std::move(meas), std::move(input)});
        }
    };
    prepare(pool_p, ex_p);
    prepare(pool_q, ex_q);

    std::vector<Measurement<float>> val;
    for (const auto* s : val_samples) {
        val.push_back(measure(*s, mask_for_sample(s->id, s->kspace_full.dim(2), cfg.acceleration, cfg.center_fraction,
                                                  cfg.seed)));
    }

    std::size_t n = cfg.epoch_size > 0 ? static_cast<std::size_t>(cfg.epoch_size)
                                       : (m < 1.0 ? ex_p.size() : ex_q.size());
    double best_ssim = -std::numeric_limits<double>::infinity();

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t_epoch = std::chrono::steady_clock::now();
        const auto stream = mixture_epoch_stream(ex_p.size(), ex_q.size(), m, n, cfg.seed, epoch);
        double sum_sup = 0.0, sum_self = 0.0;
        int batch_index = 0;
        for (std::size_t b0 = 0; b0 < stream.size(); b0 += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
            const std::size_t b1 = std::min(stream.size(), b0 + static_cast<std::size_t>(cfg.batch_size));
            std::vector<Tensor<float>> grads;
            for (std::size_t k = b0; k < b1; ++k) {
                Example& ex = (stream[k].pool == 0 ? ex_p : ex_q)[stream[k].index];
                if (cfg.mask_policy == MaskPolicy::resampled_per_epoch) {
                    ex.measurement = make_training_measurement(*ex.sample, cfg, epoch);
                    ex.input = adjoint_zf(ex.measurement.kspace, ex.measurement.mask);
                }
                double l_sup = 0.0, l_self = 0.0;
                auto vg = value_and_grad<float>(
                    [&] {
                        auto parts = joint_loss_from_output(reconstruct(model, ex.input), ex.measurement, cfg.mode,
                                                            cfg.sup_weight, cfg.self_weight);
                        l_sup = parts.l_sup;
                        l_self = parts.l_self;
                        return parts.total;
                    },
                    model.params);
                if (!std::isfinite(vg.value)) {
                    throw TrainingError("training loss became non-finite at epoch " + std::to_string(epoch) +
                                            ", batch " + std::to_string(batch_index),
                                        epoch, batch_index);
                }
                sum_sup += l_sup;
                sum_self += l_self;
                if (grads.empty()) {
                    grads = std::move(vg.grads);
                } else {
                    for (std::size_t i = 0; i < grads.size(); ++i) {
                        auto& g = grads[i].values();
                        const auto& h = vg.grads[i].values();
                        for (std::size_t j = 0; j < g.size(); ++j) g[j] += h[j];
                    }
                }
            }
            const float inv = 1.0f / static_cast<float>(b1 - b0);
            for (auto& g : grads)
                for (auto& v : g.values()) v *= inv;
            try {
                adam_step(model.params, grads, adam);
            } catch (const NumericError& e) {
                throw TrainingError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", batch " +
                                        std::to_string(batch_index) + ")",
                                    epoch, batch_index);
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        const double denom = stream.empty() ? 1.0 : static_cast<double>(stream.size());
        rec.l_sup = sum_sup / denom;
        rec.l_self = sum_self / denom;
        rec.val_ssim = val.empty() ? std::numeric_limits<double>::quiet_NaN() : evaluate_baseline(model, val);
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_epoch).count();
        result.history.epochs.push_back(rec);
        if (!val.empty() && rec.val_ssim > best_ssim) {
            best_ssim = rec.val_ssim;
            result.best = model.clone();
        }
        if (on_epoch) on_epoch(rec);
    }
    result.final = model.clone();
    if (val.empty()) result.best = result.final.clone();
    result.history.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

}  // namespace

std::string to_string(LossMode m) {
    switch (m) {
        case LossMode::supervised: return "supervised";
        case LossMode::self: return "self";
        case LossMode::joint: return "joint";
    }
    return "?";
}

LossMode parse_loss_mode(const std::string& s) {
    if (s == "supervised") return LossMode::supervised;
    if (s == "self") return LossMode::self;
    if (s == "joint") return LossMode::joint;
    throw ConfigError("unknown loss mode '" + s + "'");
}

std::string to_string(MaskPolicy p) {
    return p == MaskPolicy::fixed_per_sample ? "fixed_per_sample" : "resampled_per_epoch";
}

MaskPolicy parse_mask_policy(const std::string& s) {
    if (s == "fixed_per_sample") return MaskPolicy::fixed_per_sample;
    if (s == "resampled_per_epoch") return MaskPolicy::resampled_per_epoch;
    throw ConfigError("unknown mask policy '" + s + "'");
}

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("train: lr must be > 0");
    if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(acceleration >= 1.0)) throw ConfigError("train: acceleration must be >= 1");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("train: val_fraction must lie in [0, 1)");
    if (epoch_size < 0) throw ConfigError("train: epoch_size must be >= 0");
}

std::string TrainHistory::to_csv() const {
    std::string out = "epoch,l_sup,l_self,val_ssim,seconds\n";
    char buf[160];
    for (const auto& e : epochs) {
        std::snprintf(buf, sizeof buf, "%d,%.8f,%.8f,%.8f,%.3f\n", e.epoch, e.l_sup, e.l_self, e.val_ssim, e.seconds);
        out += buf;
    }
    return out;
}

template <class T>
LossParts<T> joint_loss_from_output(const Tensor<T>& output, const Measurement<T>& m, LossMode mode, double sup_weight,
                                    double self_weight) {
    LossParts<T> parts;
    Tensor<T> sup, self;
    const bool needs_sup = mode != LossMode::self;
    if (needs_sup && !m.reference) throw ContractError("joint_loss: supervised term needs a reference image");
    if (m.reference) {
        // In self mode the supervised term is only reported, never optimized.
        const double ref_l1 = ops::l1(*m.reference).item();
        if (ref_l1 == 0.0 && needs_sup) throw DegenerateError("joint_loss: reference image has zero l1 norm");
        if (ref_l1 == 0.0) {
            parts.l_sup = std::numeric_limits<double>::quiet_NaN();
        } else {
            sup = ops::scale(ops::l1(ops::sub(*m.reference, output)), 1.0 / ref_l1);
            parts.l_sup = static_cast<double>(sup.item());
        }
    }
    const double y_l1 = ops::l1(m.kspace).item();
    if (y_l1 == 0.0) throw DegenerateError("joint_loss: measurement has zero l1 norm");
    self = ops::scale(ops::l1(ops::sub(m.kspace, forward(output, m.sens, m.mask))), 1.0 / y_l1);
    parts.l_self = static_cast<double>(self.item());

    switch (mode) {
        case LossMode::supervised: parts.total = ops::scale(sup, sup_weight); break;
        case LossMode::self: parts.total = ops::scale(self, self_weight); break;
        case LossMode::joint: parts.total = ops::add(ops::scale(sup, sup_weight), ops::scale(self, self_weight)); break;
    }
    return parts;
}

template <class T>
LossParts<T> joint_loss(const ReconModelT<T>& model, const Measurement<T>& m, LossMode mode, double sup_weight,
                        double self_weight) {
    const auto input = adjoint_zf(m.kspace, m.mask);
    return joint_loss_from_output(reconstruct(model, input), m, mode, sup_weight, self_weight);
}

std::vector<Pick> mixture_epoch_stream(std::size_t pool_p, std::size_t pool_q, double m, std::size_t n,
                                       std::uint64_t seed, int epoch) {
    if (!(m >= 0.0 && m <= 1.0)) throw ConfigError("mixture coefficient must lie in [0, 1]");
    const auto n_q = static_cast<std::size_t>(std::llround(m * static_cast<double>(n)));
    const std::size_t n_p = n - n_q;
    if ((n_p > 0 && pool_p == 0) || (n_q > 0 && pool_q == 0)) {
        throw ConfigError("mixture: a pool with positive weight is empty");
    }
    const std::uint64_t epoch_seed = derive_seed(derive_seed(seed, kStreamKey), static_cast<std::uint64_t>(epoch));
    std::vector<Pick> out;
    out.reserve(n);
    {
        Rng rng(derive_seed(epoch_seed, 0));
        for (auto i : draw_without_replacement(n_p, pool_p, rng)) out.push_back({0, i});
    }
    {
        Rng rng(derive_seed(epoch_seed, 0));
        for (auto i : draw_without_replacement(n_q, pool_q, rng)) out.push_back({1, i});
    }
    Rng mix(derive_seed(epoch_seed, 1));
    mix.shuffle(out);
    return out;
}

TrainResult train(const ReconModel& model, const std::vector<KSpaceSample>& dataset, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
    return train_mixture(model, dataset, {}, 0.0, cfg, on_epoch);
}

TrainResult train_mixture(const ReconModel& model, const std::vector<KSpaceSample>& dataset_p,
                          const std::vector<KSpaceSample>& dataset_q, double m, const TrainConfig& cfg,
                          const EpochCallback& on_epoch) {
    cfg.validate();
    if (!(m >= 0.0 && m <= 1.0)) throw ConfigError("mixture coefficient must lie in [0, 1]");
    const bool use_p = m < 1.0, use_q = m > 0.0;
    if ((use_p && dataset_p.empty()) || (use_q && dataset_q.empty())) {
        throw ConfigError("train: training dataset is empty");
    }
    std::vector<const KSpaceSample*> pool_p, pool_q, val;
    auto split_pool = [&](const std::vector<KSpaceSample>& data, std::vector<const KSpaceSample*>& pool) {
        const auto s = holdout(data.size(), cfg.val_fraction, cfg.seed);
        for (auto i : s.train) pool.push_back(&data[i]);
        for (auto i : s.val) val.push_back(&data[i]);
    };
    if (use_p) split_pool(dataset_p, pool_p);
    if (use_q) split_pool(dataset_q, pool_q);
    return run_training(model, pool_p, pool_q, m, val, cfg, on_epoch);
}

double evaluate_baseline(const ReconModel& model, const std::vector<Measurement<float>>& measurements) {
    if (measurements.empty()) return std::numeric_limits<double>::quiet_NaN();
    double total = 0.0;
    for (const auto& m : measurements) {
        if (!m.reference) throw ContractError("evaluate_baseline: measurement without reference");
        const auto out = reconstruct(model, adjoint_zf(m.kspace, m.mask));
        double range = ops::max_abs(*m.reference);
        if (!(range > 0.0)) range = 1.0;
        total += ssim(out, *m.reference, range);
    }
    return total / static_cast<double>(measurements.size());
}

template LossParts<float> joint_loss_from_output(const Tensor<float>&, const Measurement<float>&, LossMode, double, double);
template LossParts<double> joint_loss_from_output(const Tensor<double>&, const Measurement<double>&, LossMode, double,
                                                  double);
template LossParts<float> joint_loss(const ReconModelT<float>&, const Measurement<float>&, LossMode, double, double);
template LossParts<double> joint_loss(const ReconModelT<double>&, const Measurement<double>&, LossMode, double, double);

}  // namespace ttt
