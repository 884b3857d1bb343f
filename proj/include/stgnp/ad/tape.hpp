#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "stgnp/core/array.hpp"
#include "stgnp/core/errors.hpp"

namespace stgnp::ad {

/// Handle to a value recorded on a Tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode differentiation record. Values are appended in execution
/// order, so the node list is already a topological order; backward walks it
/// once in reverse. Single-owner, single-threaded.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Array value, bool trainable = false, std::string name = std::string()) {
        const int id = push_value(std::move(value));
        if (trainable) {
            trainable_.push_back(id);
            names_.emplace_back(id, std::move(name));
        }
        return Var{id};
    }

    Var constant(Array value) { return leaf(std::move(value), false); }

    const Array& val(Var v) const { return values_[check(v)]; }

    std::size_t size() const { return values_.size(); }
    const std::vector<int>& trainable() const { return trainable_; }

    std::string name_of(int id) const {
        for (const auto& [nid, name] : names_)
            if (nid == id) return name;
        return "leaf#" + std::to_string(id);
    }

    /// Record a computed value together with its local gradient rule.
    Var record(Array value, std::function<void()> backward_fn) {
        const int id = push_value(std::move(value));
        nodes_.push_back(NodeRec{id, std::move(backward_fn)});
        return Var{id};
    }

    /// Backward pass from a scalar loss. Gradients of leaves never reached
    /// stay at zero.
    void backward(Var loss) {
        const int lid = check(loss);
        if (!values_[lid].is_scalar()) {
            throw contract_error("backward: loss must be scalar, got shape " +
                                 values_[lid].shape_string());
        }
        grads_.assign(values_.size(), Array());
        grads_[lid] = Array::scalar(1.0);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            if (it->output <= lid && !grads_[it->output].empty()) it->backward();
        }
    }

    bool has_grad(Var v) const {
        const int id = check(v);
        return id < static_cast<int>(grads_.size()) && !grads_[id].empty();
    }

    /// Gradient of the last backward() w.r.t. v; zeros if v was unreachable.
    Array gradient(Var v) const {
        const int id = check(v);
        if (id < static_cast<int>(grads_.size()) && !grads_[id].empty()) return grads_[id];
        return Array(values_[id].shape());
    }

    /// Accumulation target during backward; allocates zeros on first touch.
    Array& grad_acc(int id) {
        if (grads_[id].empty()) grads_[id] = Array(values_[id].shape());
        return grads_[id];
    }

    const Array& grad_ref(int id) const { return grads_[id]; }
    bool grad_present(int id) const { return !grads_[id].empty(); }

private:
    struct NodeRec {
        int output;
        std::function<void()> backward;
    };

    int push_value(Array v) {
        values_.push_back(std::move(v));
        return static_cast<int>(values_.size()) - 1;
    }

    int check(Var v) const {
        if (!v.valid() || v.id >= static_cast<int>(values_.size()))
            throw contract_error("Tape: invalid Var handle");
        return v.id;
    }

    std::vector<Array> values_;
    std::vector<Array> grads_;
    std::vector<NodeRec> nodes_;
    std::vector<int> trainable_;
    std::vector<std::pair<int, std::string>> names_;
};

}  // namespace stgnp::ad
