#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ttt/mri.hpp"
#include "ttt/unet.hpp"

namespace ttt {

enum class FinalInput { full, train };

std::string to_string(FinalInput f);
FinalInput parse_final_input(const std::string& s);

struct TTTConfig {
    double lr = 1e-4;
    int max_iters = 500;
    double val_fraction = 0.2;
    int patience = 20;
    int eval_every = 1;
    std::uint64_t seed = 0;
    // Off: run all max_iters iterations (the best snapshot is still returned).
    bool early_stop = true;
    FinalInput final_input = FinalInput::full;

    void validate() const;
};

struct TTTEval {
    int iteration = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;     // NaN with an empty validation split
    double oracle_ssim = 0.0;  // NaN unless the measurement carries a reference
};

struct TTTTrace {
    std::vector<TTTEval> evals;
    int chosen_iteration = 0;
    bool stopped_early = false;
    bool nonfinite = false;  // adaptation aborted on a non-finite loss or gradient

    const TTTEval* chosen() const;
    // iter,train_loss,val_loss,oracle_ssim,chosen
    std::string to_csv() const;
};

struct ColumnSplit {
    std::vector<std::uint8_t> train;
    std::vector<std::uint8_t> val;
};

// Withholds floor(val_fraction * k) of the k selected non-ACS columns for
// validation. ACS columns always stay in the train split.
ColumnSplit split_measurement(const SamplingMask& mask, double val_fraction, std::uint64_t seed);

struct TTTResult {
    ReconModel model;
    TTTTrace trace;
};

// Adam on the self-supervised loss of the train columns, with A^dagger y_train
// as network input. Returns the parameters of the evaluation with the lowest
// validation loss.
TTTResult ttt_adapt(const ReconModel& model, const Measurement<float>& measurement, const TTTConfig& cfg);

struct TTTReconstruction {
    Tensor<float> image;
    TTTTrace trace;
};

TTTReconstruction reconstruct_with_ttt(const ReconModel& model, const Measurement<float>& measurement,
                                       const TTTConfig& cfg);

}  // namespace ttt
