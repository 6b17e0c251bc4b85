#include "ttt/ttt.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "ttt/adam.hpp"
#include "ttt/autodiff.hpp"
#include "ttt/metrics.hpp"
#include "ttt/ops.hpp"
#include "ttt/random.hpp"

namespace ttt {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double normalized_residual(const Tensor<float>& y, const Tensor<float>& predicted, double y_norm) {
    return static_cast<double>(ops::l1(ops::sub(y, predicted)).item()) / y_norm;
}

}  // namespace

std::string to_string(FinalInput f) { return f == FinalInput::full ? "full" : "train"; }

FinalInput parse_final_input(const std::string& s) {
    if (s == "full") return FinalInput::full;
    if (s == "train") return FinalInput::train;
    throw ConfigError("final input must be 'full' or 'train', got '" + s + "'");
}

void TTTConfig::validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("ttt: lr must be finite and >= 0");
    if (max_iters < 0) throw ConfigError("ttt: max_iters must be >= 0");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("ttt: val_fraction must lie in [0, 1)");
    if (patience < 1) throw ConfigError("ttt: patience must be >= 1");
    if (eval_every < 1) throw ConfigError("ttt: eval_every must be >= 1");
}

const TTTEval* TTTTrace::chosen() const {
    for (const auto& e : evals)
        if (e.iteration == chosen_iteration) return &e;
    return nullptr;
}

std::string TTTTrace::to_csv() const {
    std::string out = "iter,train_loss,val_loss,oracle_ssim,chosen\n";
    char buf[160];
    for (const auto& e : evals) {
        std::snprintf(buf, sizeof buf, "%d,%.8f,%.8f,%.8f,%d\n", e.iteration, e.train_loss, e.val_loss, e.oracle_ssim,
                      e.iteration == chosen_iteration ? 1 : 0);
        out += buf;
    }
    return out;
}

ColumnSplit split_measurement(const SamplingMask& mask, double val_fraction, std::uint64_t seed) {
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("split: val_fraction must lie in [0, 1)");
    ColumnSplit split{mask.columns, std::vector<std::uint8_t>(mask.columns.size(), 0)};
    if (val_fraction == 0.0) return split;

    std::vector<std::size_t> candidates;
    for (std::int64_t c = 0; c < mask.width; ++c)
        if (mask.selected(c) && !mask.is_acs(c)) candidates.push_back(static_cast<std::size_t>(c));
    const auto n_val =
        static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(candidates.size()) + 1e-9));
    if (n_val == 0) {
        throw ConfigError("split: val_fraction " + std::to_string(val_fraction) + " of " +
                          std::to_string(candidates.size()) +
                          " non-ACS columns leaves no validation column; use a larger mask or val_fraction");
    }
    Rng rng(seed);
    for (auto k : rng.choose(candidates.size(), n_val)) {
        const auto c = candidates[k];
        split.train[c] = 0;
        split.val[c] = 1;
    }
    return split;
}

TTTResult ttt_adapt(const ReconModel& model, const Measurement<float>& measurement, const TTTConfig& cfg) {
    cfg.validate();
    const auto split = split_measurement(measurement.mask, cfg.val_fraction, cfg.seed);
    const auto y_train = ops::mask_columns(measurement.kspace, split.train);
    const auto y_val = ops::mask_columns(measurement.kspace, split.val);
    const auto input = adjoint_zf(measurement.kspace, split.train);
    const double train_norm = ops::l1(y_train).item();
    if (train_norm == 0.0) throw DegenerateError("ttt: train split of the measurement is all zero");
    const bool has_val = cfg.val_fraction > 0.0;
    const double val_norm = has_val ? static_cast<double>(ops::l1(y_val).item()) : 0.0;
    if (has_val && val_norm == 0.0) throw DegenerateError("ttt: validation split of the measurement is all zero");
    double ref_range = 1.0;
    if (measurement.reference) {
        ref_range = ops::max_abs(*measurement.reference);
        if (!(ref_range > 0.0)) ref_range = 1.0;
    }

    TTTResult result{model.clone(), {}};
    ReconModel current = model.clone();
    AdamState<float> adam(current.params, AdamHyper{cfg.lr});
    double best = std::numeric_limits<double>::infinity();
    int since_best = 0;

    for (int it = 0; it <= cfg.max_iters; ++it) {
        const bool evaluate = it % cfg.eval_every == 0 || it == cfg.max_iters;
        const bool step = it < cfg.max_iters;
        Tensor<float> output;
        double train_loss = 0.0;
        std::vector<Tensor<float>> grads;

        if (step) {
            auto vg = value_and_grad<float>(
                [&] {
                    output = reconstruct(current, input);
                    const auto pred = forward(output, measurement.sens, split.train);
                    return ops::scale(ops::l1(ops::sub(y_train, pred)), 1.0 / train_norm);
                },
                current.params);
            train_loss = vg.value;
            grads = std::move(vg.grads);
            output = output.detach();
        } else {
            output = reconstruct(current, input);
            const auto pred = forward(output, measurement.sens, split.train);
            train_loss = ops::scale(ops::l1(ops::sub(y_train, pred)), 1.0 / train_norm).item();
        }

        if (evaluate) {
            TTTEval e;
            e.iteration = it;
            e.train_loss = train_loss;
            e.val_loss = has_val ? normalized_residual(y_val, forward(output, measurement.sens, split.val), val_norm) : kNaN;
            e.oracle_ssim = measurement.reference ? ssim(output, *measurement.reference, ref_range) : kNaN;
            result.trace.evals.push_back(e);
            if (!std::isfinite(train_loss) || (has_val && !std::isfinite(e.val_loss))) {
                result.trace.nonfinite = true;
                break;
            }
            const double score = has_val ? e.val_loss : -static_cast<double>(it);
            if (score < best) {
                best = score;
                since_best = 0;
                result.trace.chosen_iteration = it;
                result.model = current.clone();
            } else if (++since_best >= cfg.patience && cfg.early_stop && has_val) {
                result.trace.stopped_early = true;
                break;
            }
        } else if (!std::isfinite(train_loss)) {
            result.trace.nonfinite = true;
            break;
        }

        if (step) {
            try {
                adam_step(current.params, grads, adam);
            } catch (const NumericError&) {
                result.trace.nonfinite = true;
                break;
            }
        }
    }
    return result;
}

TTTReconstruction reconstruct_with_ttt(const ReconModel& model, const Measurement<float>& measurement,
                                       const TTTConfig& cfg) {
    auto adapted = ttt_adapt(model, measurement, cfg);
    Tensor<float> input;
    if (cfg.final_input == FinalInput::full) {
        input = adjoint_zf(measurement.kspace, measurement.mask);
    } else {
        const auto split = split_measurement(measurement.mask, cfg.val_fraction, cfg.seed);
        input = adjoint_zf(measurement.kspace, split.train);
    }
    return {reconstruct(adapted.model, input), std::move(adapted.trace)};
}

}  // namespace ttt
