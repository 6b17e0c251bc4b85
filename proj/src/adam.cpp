#include "ttt/adam.hpp"

#include <cmath>

namespace ttt {

template <class T>
AdamState<T>::AdamState(const ParamList<T>& params, AdamHyper h) : hyper(h) {
    if (!(h.lr >= 0.0)) throw ConfigError("adam: learning rate must be non-negative");
    first_moment.reserve(params.size());
    second_moment.reserve(params.size());
    for (const auto& p : params) {
        first_moment.emplace_back(p.value.values().size(), T(0));
        second_moment.emplace_back(p.value.values().size(), T(0));
    }
}

template <class T>
void adam_step(ParamList<T>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& state) {
    if (grads.size() != params.size() || state.first_moment.size() != params.size()) {
        throw ShapeError("adam_step: " + std::to_string(params.size()) + " params, " +
                         std::to_string(grads.size()) + " grads, " + std::to_string(state.first_moment.size()) +
                         " moment slots");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].shape() != params[i].value.shape() ||
            state.first_moment[i].size() != params[i].value.values().size()) {
            throw ShapeError("adam_step: shape mismatch for parameter '" + params[i].name + "'");
        }
        for (T g : grads[i].values()) {
            if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient in parameter '" + params[i].name + "'");
        }
    }

    const auto& h = state.hyper;
    const std::int64_t t = ++state.step_count;
    const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i].value.values();
        const auto& g = grads[i].values();
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double gk = g[k];
            const double mk = h.beta1 * m[k] + (1.0 - h.beta1) * gk;
            const double vk = h.beta2 * v[k] + (1.0 - h.beta2) * gk * gk;
            m[k] = static_cast<T>(mk);
            v[k] = static_cast<T>(vk);
            const double update = h.lr * (mk / c1) / (std::sqrt(vk / c2) + h.eps);
            p[k] = static_cast<T>(p[k] - update);
        }
    }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(ParamList<float>&, const std::vector<Tensor<float>>&, AdamState<float>&);
template void adam_step(ParamList<double>&, const std::vector<Tensor<double>>&, AdamState<double>&);

}  // namespace ttt
