#pragma once

#include <functional>
#include <vector>

#include "ttt/tensor.hpp"

namespace ttt {

template <class T>
struct ValueAndGrad {
    double value = 0.0;
    std::vector<Tensor<T>> grads;  // one per parameter, same shape
};

// Evaluates loss_fn with gradient tracking enabled on `params` and returns the
// scalar value with exact reverse-mode gradients. loss_fn must return a real
// scalar built from registered primitives.
template <class T>
ValueAndGrad<T> value_and_grad(const std::function<Tensor<T>()>& loss_fn, std::vector<Tensor<T>>& params);

template <class T>
ValueAndGrad<T> value_and_grad(const std::function<Tensor<T>()>& loss_fn, ParamList<T>& params);

}  // namespace ttt
