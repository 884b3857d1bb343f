#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "stgnp/ad/ops.hpp"
#include "stgnp/model/gaussian.hpp"
#include "stgnp/model/model.hpp"

namespace stgnp::train {

struct LossWeights {
    double beta1 = 1.0;
    double beta2 = 0.0;
    double beta3 = 0.0;

    void validate() const {
        if (beta1 < 0 || beta2 < 0 || beta3 < 0)
            throw contract_error("LossWeights: betas must be non-negative");
        if (beta1 == 0 && beta2 == 0 && beta3 == 0)
            throw contract_error("LossWeights: at least one beta must be positive");
    }
};

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5*log(2*pi)

/// Negative Gaussian log likelihood, summed over all elements:
/// 0.5*[log(2*pi*sigma^2) + (x-mu)^2/sigma^2].
inline ad::Var gaussian_nll(ad::Tape& t, const model::GaussianLatent& pred, ad::Var target) {
    if (!t.val(target).same_shape(t.val(pred.mean)))
        throw dim_error("gaussian_nll: target shape " + t.val(target).shape_string() +
                        " vs prediction " + t.val(pred.mean).shape_string());
    ad::Var ratio2 = ad::square(t, ad::div(t, ad::sub(t, target, pred.mean), pred.scale));
    ad::Var elems = ad::axpy(t, ad::log(t, pred.scale), 0.5, ratio2);
    const double n = static_cast<double>(t.val(target).numel());
    return ad::add(t, ad::sum(t, elems), t.constant(Array::scalar(n * kHalfLog2Pi)));
}

inline ad::Var gaussian_nll(ad::Tape& t, const model::GaussianLatent& pred, const Array& target) {
    return gaussian_nll(t, pred, t.constant(target));
}

/// Closed-form KL(q_target || q_context) for diagonal Gaussians, summed over
/// elements. Arranged so that identical inputs cancel exactly to zero.
inline ad::Var gaussian_kl(ad::Tape& t, const model::GaussianLatent& q_target,
                           const model::GaussianLatent& q_context) {
    if (!t.val(q_target.mean).same_shape(t.val(q_context.mean)))
        throw dim_error("gaussian_kl: shape mismatch");
    ad::Var log_ratio = ad::sub(t, ad::log(t, q_context.scale), ad::log(t, q_target.scale));
    ad::Var var_ratio = ad::square(t, ad::div(t, q_target.scale, q_context.scale));
    ad::Var mean_term =
        ad::square(t, ad::div(t, ad::sub(t, q_target.mean, q_context.mean), q_context.scale));
    ad::Var elems = ad::axpy(t, ad::axpy(t, log_ratio, 0.5, var_ratio), 0.5, mean_term);
    const double n = static_cast<double>(t.val(q_target.mean).numel());
    return ad::add(t, ad::sum(t, elems), t.constant(Array::scalar(-0.5 * n)));
}

inline ad::Var abs_values(ad::Tape& t, ad::Var x) {
    return ad::add(t, ad::relu(t, x), ad::relu(t, ad::scale(t, x, -1.0)));
}

struct LossBreakdown {
    ad::Var total, nll, kl, l2, l1;
    double total_value = 0, nll_value = 0, kl_value = 0, l2_value = 0, l1_value = 0;
};

/// beta1*(NLL + sum of KLs) + beta2*mean||l||^2 over the trajectory +
/// beta3*(mean|z_s| + mean|z_t|). NLL and KL are batch means of per-sample
/// sums; the regularizers are plain means.
inline LossBreakdown total_loss(ad::Tape& t, const model::Rollout& roll,
                                const std::vector<Array>& target_rows,
                                const model::EncoderPosterior& q_context, const LossWeights& w,
                                std::size_t batch_size) {
    w.validate();
    if (target_rows.size() != roll.outputs.size())
        throw contract_error("total_loss: rollout must cover exactly the target grid (" +
                             std::to_string(target_rows.size()) + " frames, got " +
                             std::to_string(roll.outputs.size()) + ")");
    const double inv_b = 1.0 / static_cast<double>(batch_size);

    ad::Var nll_sum;
    for (std::size_t f = 0; f < roll.outputs.size(); ++f) {
        ad::Var frame = gaussian_nll(t, roll.outputs[f], target_rows[f]);
        nll_sum = f == 0 ? frame : ad::add(t, nll_sum, frame);
    }
    ad::Var nll = ad::scale(t, nll_sum, inv_b);

    ad::Var kl_sum = ad::add(
        t,
        ad::add(t, gaussian_kl(t, roll.posterior.qL, q_context.qL),
                gaussian_kl(t, roll.posterior.qD, q_context.qD)),
        ad::add(t, gaussian_kl(t, roll.posterior.qZs, q_context.qZs),
                gaussian_kl(t, roll.posterior.qZt, q_context.qZt)));
    ad::Var kl = ad::scale(t, kl_sum, inv_b);

    const double inv_f = 1.0 / static_cast<double>(roll.l_frames.size());
    ad::Var l2_sum, l1_sum;
    for (std::size_t f = 0; f < roll.l_frames.size(); ++f) {
        ad::Var sq = ad::mean(t, ad::square(t, roll.l_frames[f]));
        l2_sum = f == 0 ? sq : ad::add(t, l2_sum, sq);
        ad::Var zabs = ad::add(t, ad::mean(t, abs_values(t, roll.zs_frames[f])),
                               ad::mean(t, abs_values(t, roll.zt_frames[f])));
        l1_sum = f == 0 ? zabs : ad::add(t, l1_sum, zabs);
    }
    ad::Var l2 = ad::scale(t, l2_sum, inv_f);
    ad::Var l1 = ad::scale(t, l1_sum, inv_f);

    LossBreakdown out;
    out.nll = nll;
    out.kl = kl;
    out.l2 = l2;
    out.l1 = l1;
    out.total = ad::add(t, ad::scale(t, ad::add(t, nll, kl), w.beta1),
                        ad::add(t, ad::scale(t, l2, w.beta2), ad::scale(t, l1, w.beta3)));
    out.total_value = t.val(out.total)[0];
    out.nll_value = t.val(out.nll)[0];
    out.kl_value = t.val(out.kl)[0];
    out.l2_value = t.val(out.l2)[0];
    out.l1_value = t.val(out.l1)[0];
    if (!std::isfinite(out.total_value)) {
        throw divergence_error(
            "total_loss: non-finite loss (nll=" + std::to_string(out.nll_value) +
            " kl=" + std::to_string(out.kl_value) + " l2=" + std::to_string(out.l2_value) +
            " l1=" + std::to_string(out.l1_value) + ")");
    }
    return out;
}

}  // namespace stgnp::train
