#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ttt/phantom.hpp"
#include "ttt/training.hpp"
#include "ttt/ttt.hpp"
#include "ttt/unet.hpp"

namespace ttt {

enum class DistId { P, Q };

std::string to_string(DistId d);
DistId parse_dist(const std::string& s);

struct Acquisition {
    double acceleration = 4.0;
    double center_fraction = 0.08;
};

struct ShiftConfig {
    bool anatomy_analog = false;     // P and Q phantom families (or shape counts) differ
    bool modality_analog = false;    // P and Q intensity transforms differ
    bool resolution_analog = false;  // P and Q grid sizes differ
    Acquisition p;
    Acquisition q;
};

// One complete experiment. Parsing is strict: unknown keys and type errors are
// reported with the JSON pointer of the offending value.
struct ExperimentConfig {
    std::string name = "experiment";
    PhantomSpec data_p;
    PhantomSpec data_q;
    std::int64_t n_train = 128;
    std::int64_t n_test = 20;
    UNetConfig model;
    TrainConfig train;
    TTTConfig ttt;
    ShiftConfig shift;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "out";

    const PhantomSpec& spec(DistId d) const { return d == DistId::P ? data_p : data_q; }
    const Acquisition& acquisition(DistId d) const { return d == DistId::P ? shift.p : shift.q; }

    // Train/test phantom specs. The test split uses its own seed so that no
    // test image appears in training.
    PhantomSpec split_spec(DistId d, bool test) const;
    // TrainConfig with the acquisition of `d` filled in.
    TrainConfig train_config(DistId d, LossMode mode) const;
    // Seed of the test-time masks.
    std::uint64_t test_mask_seed() const;
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Canonical JSON (all fields, fixed key order) that parses back to the same config.
std::string to_json(const ExperimentConfig& cfg);

}  // namespace ttt
