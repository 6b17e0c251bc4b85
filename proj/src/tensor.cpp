#include "ttt/tensor.hpp"

#include <sstream>
#include <unordered_set>

namespace ttt {

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (auto d : shape) {
        if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
    os << ']';
    return os.str();
}

template <class T>
Tensor<T> Tensor<T>::zeros(Shape shape, Kind kind) {
    auto node = std::make_shared<node_type>();
    node->data.assign(detail::storage_size<T>(shape, kind), T(0));
    node->shape = std::move(shape);
    node->kind = kind;
    return Tensor(std::move(node));
}

template <class T>
Tensor<T> Tensor<T>::from(std::vector<T> values, Shape shape, Kind kind) {
    if (values.size() != detail::storage_size<T>(shape, kind)) {
        throw ShapeError("value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
    }
    auto node = std::make_shared<node_type>();
    node->data = std::move(values);
    node->shape = std::move(shape);
    node->kind = kind;
    return Tensor(std::move(node));
}

template <class T>
T Tensor<T>::item() const {
    if (numel() != 1 || is_complex()) {
        throw ContractError("item() requires a single real element, got shape " +
                            shape_str(shape()));
    }
    return node_->data[0];
}

template <class T>
Tensor<T> Tensor<T>::grad() const {
    auto g = Tensor::zeros(node_->shape, node_->kind);
    if (!node_->grad.empty()) g.values() = node_->grad;
    return g;
}

template <class T>
Tensor<T> Tensor<T>::clone() const {
    auto t = Tensor::from(node_->data, node_->shape, node_->kind);
    t.set_requires_grad(node_->requires_grad);
    return t;
}

template <class T>
Tensor<T> Tensor<T>::detach() const {
    return Tensor::from(node_->data, node_->shape, node_->kind);
}

template <class T>
void Tensor<T>::backward() {
    if (numel() != 1 || is_complex()) {
        throw ContractError("backward() needs a real scalar, got shape " + shape_str(shape()));
    }
    if (!node_->requires_grad) return;

    // Iterative post-order DFS gives a topological order without recursion
    // depth limits on long graphs.
    std::vector<node_type*> order;
    std::unordered_set<node_type*> seen;
    std::vector<std::pair<node_type*, std::size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->inputs.size()) {
            node_type* child = n->inputs[next++].get();
            if (child->requires_grad && seen.insert(child).second) stack.push_back({child, 0});
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    node_->ensure_grad()[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        node_type* n = *it;
        if (n->backward && !n->grad.empty()) n->backward(*n);
    }
    // Interior gradients are not needed after the sweep.
    for (node_type* n : order) {
        if (n->backward) std::vector<T>().swap(n->grad);
    }
}

namespace detail {

template <class T>
Tensor<T> make_result(Shape shape, Kind kind, std::vector<Tensor<T>> inputs, const char* op) {
    auto node = std::make_shared<Node<T>>();
    node->data.assign(storage_size<T>(shape, kind), T(0));
    node->shape = std::move(shape);
    node->kind = kind;
    node->op = op;
    for (auto& in : inputs) {
        if (in.requires_grad()) node->requires_grad = true;
    }
    if (node->requires_grad) {
        node->inputs.reserve(inputs.size());
        for (auto& in : inputs) node->inputs.push_back(in.node_ptr());
    }
    return Tensor<T>(std::move(node));
}

template Tensor<float> make_result(Shape, Kind, std::vector<Tensor<float>>, const char*);
template Tensor<double> make_result(Shape, Kind, std::vector<Tensor<double>>, const char*);

}  // namespace detail

template <class T>
ParamList<T> clone_params(const ParamList<T>& params) {
    ParamList<T> out;
    out.reserve(params.size());
    for (const auto& p : params) out.push_back({p.name, p.value.clone()});
    return out;
}

template class Tensor<float>;
template class Tensor<double>;
template ParamList<float> clone_params(const ParamList<float>&);
template ParamList<double> clone_params(const ParamList<double>&);

}  // namespace ttt
