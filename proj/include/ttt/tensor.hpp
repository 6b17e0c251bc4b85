#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ttt/errors.hpp"

namespace ttt {

using Shape = std::vector<std::int64_t>;

enum class Kind : std::uint8_t { real, complex };

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

template <class T>
struct Node {
    Shape shape;
    Kind kind = Kind::real;
    std::vector<T> data;  // complex values interleaved (re, im)
    std::vector<T> grad;  // empty until something is accumulated
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    // Reads self.grad and accumulates into the inputs' grads.
    std::function<void(Node& self)> backward;
    const char* op = "leaf";

    std::vector<T>& ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), T(0));
        return grad;
    }
};

}  // namespace detail

// Dense row-major array with optional reverse-mode gradient tracking.
//
// A Tensor is a shared handle: copies alias the same storage, clone() makes an
// independent copy. Complex tensors store interleaved (re, im) pairs, so
// storage() holds 2 * numel() scalars; gradients use the same layout and treat
// the real and imaginary channels as independent real variables.
template <class T>
class Tensor {
public:
    using value_type = T;
    using node_type = detail::Node<T>;

    Tensor() = default;
    explicit Tensor(std::shared_ptr<node_type> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, Kind kind = Kind::real);
    static Tensor from(std::vector<T> values, Shape shape, Kind kind = Kind::real);
    static Tensor scalar(T value) { return from({value}, {}); }

    bool defined() const noexcept { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    std::int64_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t ndim() const { return node_->shape.size(); }
    Kind kind() const { return node_->kind; }
    bool is_complex() const { return node_->kind == Kind::complex; }
    std::int64_t numel() const { return shape_numel(node_->shape); }

    std::span<T> storage() { return node_->data; }
    std::span<const T> storage() const { return node_->data; }
    std::vector<T>& values() { return node_->data; }
    const std::vector<T>& values() const { return node_->data; }

    T item() const;

    bool requires_grad() const { return node_->requires_grad; }
    Tensor& set_requires_grad(bool on) {
        node_->requires_grad = on;
        return *this;
    }
    bool has_grad() const { return !node_->grad.empty(); }
    // Gradient as a detached real-layout tensor of the same shape; zeros when
    // nothing was accumulated.
    Tensor grad() const;
    void zero_grad() { node_->grad.clear(); }

    // Seeds d(self)/d(self) = 1 and propagates through the recorded graph.
    void backward();

    Tensor clone() const;   // deep copy, no graph, keeps requires_grad
    Tensor detach() const;  // deep copy, no graph, requires_grad = false

    node_type& node() const { return *node_; }
    const std::shared_ptr<node_type>& node_ptr() const { return node_; }

    template <class U>
    Tensor<U> cast() const {
        std::vector<U> out(node_->data.begin(), node_->data.end());
        auto t = Tensor<U>::from(std::move(out), node_->shape, node_->kind);
        t.set_requires_grad(node_->requires_grad);
        return t;
    }

private:
    std::shared_ptr<node_type> node_;
};

namespace detail {

// Creates an output node wired to its inputs. requires_grad is inherited.
template <class T>
Tensor<T> make_result(Shape shape, Kind kind, std::vector<Tensor<T>> inputs, const char* op);

template <class T>
inline std::size_t storage_size(const Shape& shape, Kind kind) {
    return static_cast<std::size_t>(shape_numel(shape)) * (kind == Kind::complex ? 2 : 1);
}

}  // namespace detail

template <class T>
struct Param {
    std::string name;
    Tensor<T> value;
};

template <class T>
using ParamList = std::vector<Param<T>>;

template <class T>
ParamList<T> clone_params(const ParamList<T>& params);

}  // namespace ttt
