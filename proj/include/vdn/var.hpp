#pragma once

#include "vdn/tensor.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace vdn {

namespace detail {

struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into the parents that require it.
    std::function<void(Node&)> backward;

    Tensor& grad_buffer();
};

}  // namespace detail

/// Handle to a value in a reverse-mode computation graph.
///
/// Leaves created with requires_grad=true collect gradients on backward();
/// interior nodes are produced by the functions in ops.hpp. Copies share the
/// same node.
class Var {
public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false);

    const Tensor& value() const { return node_->value; }
    Tensor& mutable_value() { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }

    bool has_grad() const { return node_ && !node_->grad.empty(); }
    /// Gradient after backward(); zeros if nothing reached this node.
    const Tensor& grad() const;
    void zero_grad();

    /// Seeds d(self)/d(self) = 1 (self must be a single-element tensor) and
    /// propagates through every reachable node in reverse topological order.
    void backward() const;

    double item() const;

    // Graph construction helpers for op implementations.
    static Var make(Tensor value, std::vector<Var> inputs, std::function<void(detail::Node&)> backward);
    detail::Node& node() const { return *node_; }
    explicit operator bool() const { return static_cast<bool>(node_); }

private:
    std::shared_ptr<detail::Node> node_;
};

}  // namespace vdn
