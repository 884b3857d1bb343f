#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "stgnp/ad/params.hpp"
#include "stgnp/core/errors.hpp"

namespace stgnp::ad {

struct AdamConfig {
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;
    // Decoupled decay shrinks parameters after the update; the classic
    // alternative folds wd*p into the gradient.
    bool decoupled_weight_decay = true;
};

/// Bias-corrected Adam over a ParamStore. Moment buffers are allocated to
/// parameter shapes on first use.
class Adam {
public:
    explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

    const AdamConfig& config() const { return cfg_; }
    double learning_rate() const { return cfg_.learning_rate; }
    void set_learning_rate(double lr) { cfg_.learning_rate = lr; }
    long step_count() const { return step_; }

    void step(ParamStore& params, const std::vector<Array>& grads) {
        if (grads.size() != params.size())
            throw contract_error("Adam: gradient list does not match parameter store");
        if (m_.empty()) {
            m_.reserve(params.size());
            v_.reserve(params.size());
            for (std::size_t i = 0; i < params.size(); ++i) {
                m_.emplace_back(params.array(static_cast<int>(i)).shape());
                v_.emplace_back(params.array(static_cast<int>(i)).shape());
            }
        }
        ++step_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
        const double shrink = 1.0 - cfg_.learning_rate * cfg_.weight_decay;
        for (std::size_t i = 0; i < params.size(); ++i) {
            Array& p = params.array(static_cast<int>(i));
            const Array& g = grads[i];
            if (!p.same_shape(g))
                throw dim_error("Adam: gradient shape " + g.shape_string() + " vs parameter " +
                                p.shape_string() + " for " + params.name(static_cast<int>(i)));
            Array& m = m_[i];
            Array& v = v_[i];
            for (std::size_t k = 0; k < p.numel(); ++k) {
                double gk = g[k];
                if (std::isnan(gk)) {
                    throw divergence_error("Adam: NaN gradient in leaf '" +
                                           params.name(static_cast<int>(i)) + "' at element " +
                                           std::to_string(k));
                }
                if (!cfg_.decoupled_weight_decay && cfg_.weight_decay != 0.0)
                    gk += cfg_.weight_decay * p[k];
                m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * gk;
                v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * gk * gk;
                const double mhat = m[k] / bc1;
                const double vhat = v[k] / bc2;
                p[k] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
                if (cfg_.decoupled_weight_decay && cfg_.weight_decay != 0.0) p[k] *= shrink;
            }
        }
    }

private:
    AdamConfig cfg_;
    long step_ = 0;
    std::vector<Array> m_;
    std::vector<Array> v_;
};

}  // namespace stgnp::ad
