#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ttt/tensor.hpp"

namespace ttt {

struct UNetConfig {
    int n_pools = 3;
    int base_channels = 16;
    double negative_slope = 0.2;
    std::uint64_t seed = 0;
    // Both switches exist for analysis (e.g. locality checks); the
    // reconstructor always runs with them enabled.
    bool instance_norm = true;
    bool scale_input = true;

    void validate() const;
};

template <class T>
struct ReconModelT {
    UNetConfig config;
    ParamList<T> params;

    std::int64_t param_count() const;
    ReconModelT clone() const { return {config, clone_params(params)}; }

    template <class U>
    ReconModelT<U> cast() const {
        ReconModelT<U> out;
        out.config = config;
        for (const auto& p : params) out.params.push_back({p.name, p.value.template cast<U>()});
        return out;
    }
};

using ReconModel = ReconModelT<float>;

// Closed-form parameter count of the architecture built by unet_init.
std::int64_t unet_param_count(const UNetConfig& config);

// Kaiming-uniform weights (gain for the leaky-relu slope), zero biases.
ReconModel unet_init(const UNetConfig& config);

// Encoder: per level 2 x [conv3x3 -> instance norm -> leaky relu], then
// avgpool2x. Decoder: nearest upsample + conv3x3 block, skip concatenation,
// 2-conv block. Final 1x1 conv with bias. input and output are real [1, H, W]
// with H, W divisible by 2^n_pools.
//
// With scale_input, the input is divided by s = max|input| (s = 1 when the
// input is all zero) and the output multiplied by s.
template <class T>
Tensor<T> unet_forward(const ReconModelT<T>& model, const Tensor<T>& input);

// Convenience wrapper: real [H, W] in, real [H, W] out.
template <class T>
Tensor<T> reconstruct(const ReconModelT<T>& model, const Tensor<T>& zero_filled);

void save_checkpoint(const std::filesystem::path& path, const ReconModel& model);
ReconModel load_checkpoint(const std::filesystem::path& path);

std::string to_json(const UNetConfig& config);
UNetConfig unet_config_from_json(const std::string& text);

}  // namespace ttt
