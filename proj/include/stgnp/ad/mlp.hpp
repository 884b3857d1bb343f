#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "stgnp/ad/ops.hpp"
#include "stgnp/ad/params.hpp"
#include "stgnp/core/rng.hpp"

namespace stgnp::ad {

enum class Activation { identity, relu, tanh, softplus };

inline Activation activation_from_string(const std::string& s) {
    if (s == "identity") return Activation::identity;
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    if (s == "softplus") return Activation::softplus;
    throw contract_error("unknown activation: " + s);
}

inline std::string to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::softplus: return "softplus";
    }
    return "identity";
}

inline Var apply_activation(Tape& t, Var x, Activation a) {
    switch (a) {
        case Activation::identity: return x;
        case Activation::relu: return relu(t, x);
        case Activation::tanh: return tanh(t, x);
        case Activation::softplus: return softplus(t, x);
    }
    return x;
}

/// Feed-forward network over row-batched inputs. Weights are registered in a
/// ParamStore; forward passes run against a TapeBinding so one set of
/// parameters can serve many recorded graphs.
class Mlp {
public:
    Mlp() = default;

    /// Glorot-uniform weights, zero biases. `zero_final` zeroes the last
    /// layer, which starts residual/derivative nets at the identity/zero map.
    static Mlp make(ParamStore& store, const std::string& name,
                    const std::vector<std::size_t>& layer_sizes, Activation hidden,
                    Activation output, Rng& rng, bool zero_final = false) {
        if (layer_sizes.size() < 2) throw contract_error("Mlp: need at least input and output widths");
        Mlp net;
        net.sizes_ = layer_sizes;
        net.hidden_ = hidden;
        net.output_ = output;
        for (std::size_t layer = 0; layer + 1 < layer_sizes.size(); ++layer) {
            const std::size_t fan_in = layer_sizes[layer];
            const std::size_t fan_out = layer_sizes[layer + 1];
            Array w({fan_in, fan_out});
            const bool zero = zero_final && layer + 2 == layer_sizes.size();
            if (!zero) {
                const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
                for (std::size_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-bound, bound);
            }
            Array b({1, fan_out});
            const std::string stem = name + ".layer" + std::to_string(layer);
            net.weight_idx_.push_back(store.add(stem + ".weight", std::move(w)));
            net.bias_idx_.push_back(store.add(stem + ".bias", std::move(b)));
        }
        return net;
    }

    /// Overwrite the output-layer bias (e.g. to start scale heads small).
    void fill_final_bias(ParamStore& store, double value) const {
        Array& b = store.array(bias_idx_.back());
        for (std::size_t i = 0; i < b.numel(); ++i) b[i] = value;
    }

    /// Redraw the output-layer weights as a scaled Glorot sample.
    void redraw_final_weight(ParamStore& store, Rng& rng, double scale) const {
        Array& w = store.array(weight_idx_.back());
        const std::size_t fan_in = sizes_[sizes_.size() - 2];
        const std::size_t fan_out = sizes_.back();
        const double bound = scale * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (std::size_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-bound, bound);
    }

    Var forward(Tape& t, const TapeBinding& bind, Var x) const {
        const std::size_t rows = t.val(x).rows();
        if (t.val(x).cols() != sizes_.front()) {
            throw dim_error("Mlp forward: input width " + std::to_string(t.val(x).cols()) +
                            " != layer width " + std::to_string(sizes_.front()));
        }
        Var h = x;
        for (std::size_t layer = 0; layer < weight_idx_.size(); ++layer) {
            Var w = bind.var(weight_idx_[layer]);
            Var b = bind.var(bias_idx_[layer]);
            const bool last = layer + 1 == weight_idx_.size();
            const Activation act = last ? output_ : hidden_;
            // softplus keeps the unfused path: its derivative needs the
            // pre-activation, which the fused layer does not store
            if (act == Activation::softplus) {
                h = add(t, matmul(t, h, w), broadcast(t, b, rows, sizes_[layer + 1]));
                h = softplus(t, h);
            } else {
                const FusedAct fused = act == Activation::relu  ? FusedAct::relu
                                       : act == Activation::tanh ? FusedAct::tanh
                                                                 : FusedAct::identity;
                h = linear(t, h, w, b, fused);
            }
        }
        return h;
    }

    std::size_t input_width() const { return sizes_.front(); }
    std::size_t output_width() const { return sizes_.back(); }
    const std::vector<std::size_t>& layer_sizes() const { return sizes_; }

private:
    std::vector<std::size_t> sizes_;
    std::vector<int> weight_idx_;
    std::vector<int> bias_idx_;
    Activation hidden_ = Activation::relu;
    Activation output_ = Activation::identity;
};

}  // namespace stgnp::ad
