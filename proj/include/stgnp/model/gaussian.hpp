#pragma once

#include "stgnp/ad/ops.hpp"

namespace stgnp::model {

/// Diagonal Gaussian resident on a tape: mean and strictly positive scale of
/// equal shape.
struct GaussianLatent {
    ad::Var mean;
    ad::Var scale;
};

/// Build a Gaussian from two raw head outputs; scale = softplus(raw) + floor.
inline GaussianLatent gaussian_from_heads(ad::Tape& t, ad::Var mean_raw, ad::Var scale_raw,
                                          double sigma_floor) {
    const Array& s = t.val(scale_raw);
    ad::Var floor = t.constant(Array::full(s.shape(), sigma_floor));
    return GaussianLatent{mean_raw, ad::add(t, ad::softplus(t, scale_raw), floor)};
}

/// Reparameterized draw: mean + scale (.) noise.
inline ad::Var sample_latent(ad::Tape& t, const GaussianLatent& g, const Array& noise) {
    if (!noise.same_shape(t.val(g.mean)))
        throw dim_error("sample_latent: noise shape " + noise.shape_string() + " vs mean " +
                        t.val(g.mean).shape_string());
    return ad::add(t, g.mean, ad::mul(t, g.scale, t.constant(noise)));
}

/// Posterior mean (the zero-noise draw).
inline ad::Var latent_mean(const GaussianLatent& g) { return g.mean; }

}  // namespace stgnp::model
