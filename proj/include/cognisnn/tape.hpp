#pragma once

#include <deque>
#include <functional>
#include <vector>

#include "cognisnn/tensor.hpp"

namespace cognisnn {

class Tape;

// Handle into a tape's computation record.
struct Var {
    int index = -1;
    bool valid() const { return index >= 0; }
};

// Eagerly-evaluated reverse-mode tape. Every operation appends one node whose
// parents were created earlier, so creation order is a topological order and
// backward() is a single reverse sweep that touches each node once.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, int)>;

    struct Node {
        Tensor value;
        Tensor grad;  // empty until backward reaches this node
        std::vector<int> parents;
        BackwardFn backward;
        const char* tag = "";
    };

    Var push(Tensor value, std::vector<int> parents, BackwardFn backward, const char* tag) {
        int self = int(nodes_.size());
        for (int p : parents) {
            if (p < 0 || p >= self)
                throw InternalError("tape: parent index out of order (cycle?)");
        }
        nodes_.push_back(Node{std::move(value), Tensor{}, std::move(parents),
                              std::move(backward), tag});
        return Var{self};
    }

    Var leaf(Tensor value, const char* tag = "leaf") {
        return push(std::move(value), {}, nullptr, tag);
    }

    const Tensor& value(Var v) const { return nodes_.at(std::size_t(v.index)).value; }
    const Node& node(int i) const { return nodes_.at(std::size_t(i)); }
    Node& node(int i) { return nodes_.at(std::size_t(i)); }
    std::size_t size() const { return nodes_.size(); }

    bool has_grad(Var v) const { return !nodes_.at(std::size_t(v.index)).grad.data.empty(); }

    // Gradient of the last backward() root with respect to v (zeros when the
    // root does not depend on v).
    Tensor grad(Var v) const {
        const Node& n = nodes_.at(std::size_t(v.index));
        if (n.grad.data.empty()) return Tensor::zeros(n.value.shape);
        return n.grad;
    }

    // Adds g (length n, matching the node's value) into the node's gradient.
    void accumulate(int index, const double* g, std::size_t n) {
        Node& nd = nodes_.at(std::size_t(index));
        if (nd.grad.data.empty()) nd.grad = Tensor::zeros(nd.value.shape);
        if (nd.grad.size() != n) throw InternalError("tape: gradient size mismatch");
        double* dst = nd.grad.data.data();
        for (std::size_t i = 0; i < n; ++i) dst[i] += g[i];
    }

    void accumulate(int index, const Tensor& g) { accumulate(index, g.data.data(), g.size()); }

    void backward(Var root) {
        if (!root.valid()) throw InvalidArgument("backward: invalid root");
        Node& r = nodes_.at(std::size_t(root.index));
        if (r.value.size() != 1) throw InvalidArgument("backward: root must be scalar");
        for (auto& n : nodes_) n.grad = Tensor{};
        r.grad = Tensor::full(r.value.shape, 1.0);
        for (int i = root.index; i >= 0; --i) {
            Node& n = nodes_[std::size_t(i)];
            if (n.grad.data.empty() || !n.backward) continue;
            n.backward(*this, i);
        }
    }

private:
    std::deque<Node> nodes_;
};

}  // namespace cognisnn
