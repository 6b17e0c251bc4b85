#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ttt/mri.hpp"

namespace ttt {

enum class PhantomFamily { ellipses, rectangles };
enum class IntensityTransform { identity, inverted, gamma };

// Parameterized phantom distribution. Two specs that differ only in the
// intensity transform produce identical geometry for the same seed.
struct PhantomSpec {
    PhantomFamily family = PhantomFamily::ellipses;
    int count_min = 3;
    int count_max = 8;
    IntensityTransform transform = IntensityTransform::identity;
    double gamma = 1.0;
    std::int64_t resolution = 64;
    int n_coils = 4;
    std::uint64_t seed = 0;

    void validate() const;
};

std::string to_string(PhantomFamily f);
std::string to_string(IntensityTransform t);
PhantomFamily parse_family(const std::string& s);
IntensityTransform parse_transform(const std::string& s);

// Real [H, W] image with values in [0, 1].
Tensor<float> sample_phantom(const PhantomSpec& spec, std::uint64_t index);

// Smooth complex coil profiles normalized so that sum_c |S_c|^2 = 1 per pixel.
Tensor<float> synth_sens(int n_coils, std::int64_t H, std::int64_t W, std::uint64_t seed);

// Full instance: phantom, coil maps and kspace_full = fft2c(S * image).
KSpaceSample make_sample(const PhantomSpec& spec, std::uint64_t index);

// Writes n_samples .ksp files plus manifest.json into out_dir.
void make_dataset(const PhantomSpec& spec, std::int64_t n_samples, const std::filesystem::path& out_dir,
                  const std::string& id_prefix = "s");

}  // namespace ttt
