#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "trifusion/tensor.hpp"

namespace trifusion {

// Reverse-mode differentiation over the fixed operator set in ops.hpp.
// Each operator produces a Node holding its output value plus a closure
// that scatters the node's cotangent into its parents. backward() walks
// the recorded graph once in reverse topological order.
struct Node {
    Tensor value;
    Tensor grad;  // allocated on first write, same shape as value
    bool needs_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backprop;

    Tensor& ensure_grad() {
        if (grad.shape.empty()) grad = Tensor::zeros(value.shape);
        return grad;
    }
};

using NodePtr = std::shared_ptr<Node>;

NodePtr make_leaf(Tensor value, bool needs_grad = false);

// Creates an op node; needs_grad is inherited from the parents.
NodePtr make_node(Tensor value, std::vector<NodePtr> parents);

// Seeds the (scalar) root with `seed` and propagates cotangents to every
// node with needs_grad. Leaf grads accumulate across calls.
void backward(const NodePtr& root, double seed = 1.0);

}  // namespace trifusion
