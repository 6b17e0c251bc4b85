#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ttt/mri.hpp"

namespace ttt {

// Reads every sample listed in <dir>/manifest.json, in manifest order.
std::vector<KSpaceSample> load_dataset(const std::filesystem::path& dir);

// Mask owned by one sample: depends only on (seed, sample id, acquisition).
SamplingMask mask_for_sample(const std::string& id, std::int64_t width, double acceleration, double center_fraction,
                             std::uint64_t seed, std::uint64_t salt = 0);

}  // namespace ttt
