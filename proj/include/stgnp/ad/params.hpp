#pragma once

#include <string>
#include <vector>

#include "stgnp/ad/tape.hpp"
#include "stgnp/core/array.hpp"
#include "stgnp/core/errors.hpp"

namespace stgnp::ad {

/// Owns every trainable array of a model in registration order. The order is
/// the contract for optimizer state, gradients and checkpoints.
class ParamStore {
public:
    int add(std::string name, Array value) {
        names_.push_back(std::move(name));
        arrays_.push_back(std::move(value));
        return static_cast<int>(arrays_.size()) - 1;
    }

    std::size_t size() const { return arrays_.size(); }
    const std::string& name(int i) const { return names_[i]; }
    Array& array(int i) { return arrays_[i]; }
    const Array& array(int i) const { return arrays_[i]; }
    std::vector<Array>& arrays() { return arrays_; }
    const std::vector<Array>& arrays() const { return arrays_; }
    const std::vector<std::string>& names() const { return names_; }

    int index_of(const std::string& name) const {
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == name) return static_cast<int>(i);
        return -1;
    }

private:
    std::vector<std::string> names_;
    std::vector<Array> arrays_;
};

/// Per-step view of a ParamStore on a Tape: every parameter becomes a
/// trainable leaf, and gradients are read back by store index.
class TapeBinding {
public:
    TapeBinding(Tape& tape, const ParamStore& store) : tape_(&tape) {
        vars_.reserve(store.size());
        for (std::size_t i = 0; i < store.size(); ++i)
            vars_.push_back(tape.leaf(store.array(static_cast<int>(i)), true,
                                      store.name(static_cast<int>(i))));
    }

    Var var(int store_index) const { return vars_.at(static_cast<std::size_t>(store_index)); }
    std::size_t size() const { return vars_.size(); }

    /// Gradients aligned with the store order; unreached leaves give zeros.
    std::vector<Array> gradients() const {
        std::vector<Array> g;
        g.reserve(vars_.size());
        for (Var v : vars_) g.push_back(tape_->gradient(v));
        return g;
    }

private:
    Tape* tape_;
    std::vector<Var> vars_;
};

}  // namespace stgnp::ad
