#include "ttt/autodiff.hpp"

namespace ttt {

template <class T>
ValueAndGrad<T> value_and_grad(const std::function<Tensor<T>()>& loss_fn, std::vector<Tensor<T>>& params) {
    for (auto& p : params) {
        p.set_requires_grad(true);
        p.zero_grad();
    }
    Tensor<T> loss = loss_fn();
    if (!loss.defined() || loss.numel() != 1 || loss.is_complex() || loss.ndim() != 0) {
        throw ContractError("value_and_grad: loss must be a real scalar, got shape " +
                            (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
    }
    loss.backward();
    ValueAndGrad<T> out;
    out.value = static_cast<double>(loss.item());
    out.grads.reserve(params.size());
    for (auto& p : params) {
        out.grads.push_back(p.grad());
        p.zero_grad();
    }
    return out;
}

template <class T>
ValueAndGrad<T> value_and_grad(const std::function<Tensor<T>()>& loss_fn, ParamList<T>& params) {
    std::vector<Tensor<T>> handles;
    handles.reserve(params.size());
    for (auto& p : params) handles.push_back(p.value);  // aliases, not copies
    return value_and_grad<T>(loss_fn, handles);
}

template ValueAndGrad<float> value_and_grad(const std::function<Tensor<float>()>&, std::vector<Tensor<float>>&);
template ValueAndGrad<double> value_and_grad(const std::function<Tensor<double>()>&, std::vector<Tensor<double>>&);
template ValueAndGrad<float> value_and_grad(const std::function<Tensor<float>()>&, ParamList<float>&);
template ValueAndGrad<double> value_and_grad(const std::function<Tensor<double>()>&, ParamList<double>&);

}  // namespace ttt
