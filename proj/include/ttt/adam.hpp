#pragma once

#include <cstdint>
#include <vector>

#include "ttt/tensor.hpp"

namespace ttt {

struct AdamHyper {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <class T>
struct AdamState {
    std::int64_t step_count = 0;
    std::vector<std::vector<T>> first_moment;
    std::vector<std::vector<T>> second_moment;
    AdamHyper hyper;

    AdamState() = default;
    AdamState(const ParamList<T>& params, AdamHyper h);
};

// One bias-corrected Adam update, applied in place to the parameter values.
// Throws NumericError naming the parameter if a gradient entry is not finite;
// in that case nothing is modified.
template <class T>
void adam_step(ParamList<T>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& state);

}  // namespace ttt
