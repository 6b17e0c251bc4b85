#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ttt/config.hpp"
#include "ttt/metrics.hpp"
#include "ttt/mri.hpp"
#include "ttt/ttt.hpp"
#include "ttt/unet.hpp"

namespace ttt {

// Worker count for per-sample loops: TTT_RECON_THREADS if set, otherwise the
// hardware concurrency. Always >= 1.
int worker_count();

// Calls fn(i) for i in [0, n) on up to worker_count() threads. Results must be
// written to per-index slots so output order does not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

std::filesystem::path dataset_dir(const ExperimentConfig& cfg, DistId dist, bool test);
std::filesystem::path model_path(const ExperimentConfig& cfg, LossMode mode, DistId dist);

// Writes train and test sets of both distributions under output_dir/data.
void generate_data(const ExperimentConfig& cfg);

// The same samples generate_data writes, built in memory.
std::vector<KSpaceSample> make_split(const ExperimentConfig& cfg, DistId dist, bool test);
// Reads the split from disk when generate_data has been run, else builds it.
std::vector<KSpaceSample> load_split(const ExperimentConfig& cfg, DistId dist, bool test);

// Test-time measurements: each sample gets its own mask from the test seed.
std::vector<Measurement<float>> make_measurements(const std::vector<KSpaceSample>& samples, const Acquisition& acq,
                                                  std::uint64_t mask_seed);

struct EvalRow {
    std::string id;
    double ssim = 0.0;
    double nl1 = 0.0;
    int ttt_iteration = -1;  // chosen TTT iterate, -1 without TTT
};

struct EvalResult {
    EvalRow row;
    Tensor<float> image;
    TTTTrace trace;
};

// Reconstructs every measurement (with or without TTT) and scores it against
// its reference. The TTT split seed is derived per sample id.
std::vector<EvalResult> evaluate(const ReconModel& model, const std::vector<Measurement<float>>& measurements,
                                 bool use_ttt, const TTTConfig& ttt_cfg);

// id,ssim,nl1,ttt_iteration
std::string eval_csv(const std::vector<EvalRow>& rows);
std::vector<EvalRow> parse_eval_csv(const std::string& text);
std::vector<EvalRow> read_eval_csv(const std::filesystem::path& path);
double mean_ssim(const std::vector<EvalRow>& rows);

// Gap report from four eval CSVs, in the order QQ, PQ, QQ+TTT, PQ+TTT.
GapReport gap_report_from_files(const std::filesystem::path& qq, const std::filesystem::path& pq,
                                const std::filesystem::path& qq_ttt, const std::filesystem::path& pq_ttt);

// Binary 8-bit PGM; [0, data_range] maps linearly onto [0, 255] with clipping.
std::vector<std::uint8_t> encode_pgm(const Tensor<float>& image, double data_range);
void write_pgm(const std::filesystem::path& path, const Tensor<float>& image, double data_range);

struct MixturePoint {
    double coefficient = 0.0;
    double ssim_p = 0.0;
    double ssim_q = 0.0;
    double train_seconds = 0.0;
};

struct MixtureData {
    std::vector<KSpaceSample> train_p, train_q;
    std::vector<Measurement<float>> test_p, test_q;
};

using ModelHook = std::function<void(double coefficient, const ReconModel& model)>;

// One model per coefficient, trained on the (1 - m) P + m Q stream with the
// config's loss mode, then scored without TTT on the P and Q test sets.
std::vector<MixturePoint> mixture_sweep(const ExperimentConfig& cfg, const MixtureData& data,
                                        const std::vector<double>& coefficients, const ModelHook& on_model = {});

// coefficient,ssim_P,ssim_Q
std::string mixture_csv(const std::vector<MixturePoint>& points);

}  // namespace ttt
