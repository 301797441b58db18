#include "vdn/var.hpp"

#include "vdn/error.hpp"

#include <unordered_set>

namespace vdn {

Tensor& detail::Node::grad_buffer() {
    if (grad.empty()) grad = Tensor(value.shape(), 0.0);
    return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<detail::Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

const Tensor& Var::grad() const {
    return node_->grad_buffer();
}

void Var::zero_grad() {
    if (node_ && !node_->grad.empty()) node_->grad.fill(0.0);
}

double Var::item() const {
    if (value().numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return value()[0];
}

Var Var::make(Tensor value, std::vector<Var> inputs, std::function<void(detail::Node&)> backward) {
    Var out(std::move(value), false);
    for (const Var& in : inputs) {
        if (in.requires_grad()) out.node_->requires_grad = true;
    }
    if (out.node_->requires_grad) {
        for (Var& in : inputs) out.node_->parents.push_back(std::move(in.node_));
        out.node_->backward = std::move(backward);
    }
    return out;
}

void Var::backward() const {
    if (value().numel() != 1) throw ShapeError("backward() requires a scalar root");
    if (!requires_grad()) return;

    // Iterative post-order DFS gives a topological order without recursion depth limits.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            detail::Node* p = n->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    node_->grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* n = *it;
        if (n->backward && !n->grad.empty()) n->backward(*n);
    }
}

}  // namespace vdn
