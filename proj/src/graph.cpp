#include "trifusion/graph.hpp"

#include <unordered_set>

#include "trifusion/errors.hpp"

namespace trifusion {

NodePtr make_leaf(Tensor value, bool needs_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->needs_grad = needs_grad;
    return n;
}

NodePtr make_node(Tensor value, std::vector<NodePtr> parents) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    for (const NodePtr& p : parents)
        if (p->needs_grad) n->needs_grad = true;
    n->parents = std::move(parents);
    return n;
}

void backward(const NodePtr& root, double seed) {
    if (root->value.numel() != 1) throw ShapeError("backward: root must be scalar");
    if (!root->needs_grad) return;

    // Iterative post-order DFS; order holds nodes with every parent listed
    // after the node itself once reversed.
    std::vector<Node*> order;
    std::vector<std::pair<Node*, size_t>> stack;
    std::unordered_set<Node*> visited;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->needs_grad && visited.insert(parent).second)
                stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad().data[0] += seed;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backprop) (*it)->backprop();
}

}  // namespace trifusion
