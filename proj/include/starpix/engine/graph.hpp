#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_set>
#include <utility>
#include <vector>

#include "starpix/engine/tensor.hpp"

namespace starpix::engine {

// One recorded operation (or leaf) of a computation graph. Nodes are created
// during the forward pass and freed when the last Var referencing the graph
// goes out of scope. A graph is confined to one thread.
template <typename T>
struct Node {
    TensorT<T> value;
    TensorT<T> grad;  // empty until first accumulation
    std::vector<std::shared_ptr<Node<T>>> inputs;
    std::function<void(Node<T>&)> backprop;  // unset for leaves
    bool requires_grad = false;

    bool has_grad() const { return !grad.data.empty(); }

    TensorT<T>& ensure_grad() {
        if (!has_grad()) grad = TensorT<T>::zeros(value.shape);
        return grad;
    }

    void clear_grad() { grad = TensorT<T>(); }
};

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

// Value handle into the graph. Cheap to copy; ops take and return Vars.
template <typename T>
class Var {
public:
    Var() = default;
    explicit Var(NodePtr<T> node) : node_(std::move(node)) {}

    static Var leaf(TensorT<T> value, bool requires_grad = false) {
        auto node = std::make_shared<Node<T>>();
        node->value = std::move(value);
        node->requires_grad = requires_grad;
        return Var(std::move(node));
    }

    bool valid() const { return node_ != nullptr; }
    const TensorT<T>& value() const { return node_->value; }
    TensorT<T>& value() { return node_->value; }
    bool requires_grad() const { return node_->requires_grad; }

    // Gradient buffer, or nullptr when none was ever accumulated.
    const TensorT<T>* grad() const { return node_->has_grad() ? &node_->grad : nullptr; }

    NodePtr<T>& node() { return node_; }
    const NodePtr<T>& node() const { return node_; }

private:
    NodePtr<T> node_;
};

template <typename T, typename BackpropFn>
Var<T> make_op(TensorT<T> value, std::vector<NodePtr<T>> inputs, BackpropFn&& backprop) {
    auto node = std::make_shared<Node<T>>();
    node->value = std::move(value);
    node->inputs = std::move(inputs);
    for (const auto& in : node->inputs)
        if (in->requires_grad) node->requires_grad = true;
    if (node->requires_grad) node->backprop = std::forward<BackpropFn>(backprop);
    return Var<T>(std::move(node));
}

// Reverse-mode sweep from a scalar loss. Visits each reachable node exactly
// once in reverse topological order; frozen leaves never receive gradient.
template <typename T>
void backward(const Var<T>& loss) {
    if (!loss.valid()) throw std::invalid_argument("backward: empty variable");
    if (loss.value().numel() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                    shape_str(loss.value().shape));

    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    // Iterative post-order DFS.
    std::vector<std::pair<Node<T>*, std::size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node<T>* child = node->inputs[next++].get();
            if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->ensure_grad().data[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* node = *it;
        if (node->backprop && node->requires_grad) node->backprop(*node);
    }
}

}  // namespace starpix::engine
