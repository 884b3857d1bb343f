#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stgnp/ad/mlp.hpp"
#include "stgnp/ad/params.hpp"
#include "stgnp/core/rng.hpp"
#include "stgnp/model/batch.hpp"
#include "stgnp/model/config.hpp"
#include "stgnp/model/gaussian.hpp"
#include "stgnp/model/mpgcn.hpp"

namespace stgnp::model {

/// All networks of the graph-latent ODE process, parameters owned by one
/// store: four context encoders plus the external encoder, the vector-field
/// combiner, the autoregressive update nets and the Gaussian decoder.
struct ModelParams {
    ModelConfig cfg;
    std::size_t n_features = 0;   // K
    std::size_t sp_attr_dim = 1;  // observed spatial edge channels
    std::size_t tp_attr_dim = 1;

    ad::ParamStore store;

    ad::Mlp control_trunk, control_mean, control_scale;
    ad::Mlp state_trunk, state_mean, state_scale;
    ad::Mlp sp_trunk, sp_mean, sp_scale;
    ad::Mlp tp_trunk, tp_mean, tp_scale;
    ad::Mlp external;  // only used when global_dim > 0
    ad::Mlp f_theta, f_delta, f_s, f_t;
    ad::Mlp dec_trunk, dec_mean, dec_scale;

    static ModelParams make(const ModelConfig& cfg, std::size_t n_features,
                            std::size_t sp_attr_dim, std::size_t tp_attr_dim,
                            std::uint64_t seed) {
        cfg.validate();
        ModelParams p;
        p.cfg = cfg;
        p.n_features = n_features;
        p.sp_attr_dim = sp_attr_dim;
        p.tp_attr_dim = tp_attr_dim;
        Rng rng = Rng::substream(seed, 0x9a7a);

        const auto hidden = ad::activation_from_string(cfg.mlp_activation);
        const auto vf_act = ad::activation_from_string(cfg.vf_activation);
        const std::size_t Ld = cfg.latent_dim, Dd = cfg.control_dim(), rd = cfg.rho_dim;
        const std::size_t wn = cfg.node_encoder_width, we = cfg.edge_encoder_width;

        auto trunk_sizes = [](std::size_t in, std::size_t w, std::size_t depth) {
            std::vector<std::size_t> sizes{in};
            for (std::size_t i = 0; i < depth; ++i) sizes.push_back(w);
            return sizes;
        };

        auto& s = p.store;
        const std::size_t nd = cfg.depth_node_encoders, ed = cfg.depth_edge_encoders;
        p.control_trunk = ad::Mlp::make(s, "control_encoder.trunk",
                                        trunk_sizes(1 + n_features + rd, wn, nd), hidden,
                                        ad::Activation::identity, rng);
        p.control_mean = ad::Mlp::make(s, "control_encoder.mean", {wn, Dd}, hidden,
                                       ad::Activation::identity, rng);
        p.control_scale = ad::Mlp::make(s, "control_encoder.scale", {wn, Dd}, hidden,
                                        ad::Activation::identity, rng);
        p.state_trunk = ad::Mlp::make(s, "state_encoder.trunk",
                                      trunk_sizes(n_features + rd, wn, nd), hidden,
                                      ad::Activation::identity, rng);
        p.state_mean =
            ad::Mlp::make(s, "state_encoder.mean", {wn, Ld}, hidden, ad::Activation::identity, rng);
        p.state_scale = ad::Mlp::make(s, "state_encoder.scale", {wn, Ld}, hidden,
                                      ad::Activation::identity, rng);
        p.sp_trunk = ad::Mlp::make(s, "spatial_edge_encoder.trunk",
                                   trunk_sizes(sp_attr_dim + rd, we, ed), hidden,
                                   ad::Activation::identity, rng);
        p.sp_mean = ad::Mlp::make(s, "spatial_edge_encoder.mean", {we, cfg.spatial_planes}, hidden,
                                  ad::Activation::identity, rng);
        p.sp_scale = ad::Mlp::make(s, "spatial_edge_encoder.scale", {we, cfg.spatial_planes},
                                   hidden, ad::Activation::identity, rng);
        p.tp_trunk = ad::Mlp::make(s, "temporal_edge_encoder.trunk",
                                   trunk_sizes(tp_attr_dim + rd, we, ed), hidden,
                                   ad::Activation::identity, rng);
        p.tp_mean = ad::Mlp::make(s, "temporal_edge_encoder.mean", {we, cfg.temporal_planes},
                                  hidden, ad::Activation::identity, rng);
        p.tp_scale = ad::Mlp::make(s, "temporal_edge_encoder.scale", {we, cfg.temporal_planes},
                                   hidden, ad::Activation::identity, rng);
        if (cfg.global_dim > 0)
            p.external = ad::Mlp::make(s, "external_encoder", {cfg.global_dim, wn, rd}, hidden,
                                       ad::Activation::identity, rng);

        p.f_theta = ad::Mlp::make(s, "vector_field", {3 * Ld + Dd, cfg.vf_width, Ld}, vf_act,
                                  ad::Activation::identity, rng, /*zero_final=*/true);
        if (cfg.vf_final_scale > 0.0) p.f_theta.redraw_final_weight(s, rng, cfg.vf_final_scale);
        p.f_delta = ad::Mlp::make(s, "control_update", {Dd + Ld, cfg.update_width, Dd}, hidden,
                                  ad::Activation::identity, rng, /*zero_final=*/true);
        auto edge_update_sizes = [&](std::size_t k) {
            std::vector<std::size_t> sizes{k + Dd};
            if (cfg.edge_update_width > 0) sizes.push_back(cfg.edge_update_width);
            sizes.push_back(k);
            return sizes;
        };
        p.f_s = ad::Mlp::make(s, "spatial_edge_update", edge_update_sizes(cfg.spatial_planes),
                              hidden, ad::Activation::identity, rng, /*zero_final=*/true);
        p.f_t = ad::Mlp::make(s, "temporal_edge_update", edge_update_sizes(cfg.temporal_planes),
                              hidden, ad::Activation::identity, rng, /*zero_final=*/true);

        for (const ad::Mlp* head : {&p.control_scale, &p.state_scale, &p.sp_scale, &p.tp_scale})
            head->fill_final_bias(s, cfg.scale_head_bias);
        if (cfg.edge_mean_bias_one) {
            p.sp_mean.fill_final_bias(s, 1.0 / static_cast<double>(cfg.spatial_planes));
            p.tp_mean.fill_final_bias(s, 1.0 / static_cast<double>(cfg.temporal_planes));
        }

        const std::size_t dec_in =
            cfg.decode_just_latent ? Ld : Ld + Dd + 1 + rd;
        p.dec_trunk = ad::Mlp::make(s, "decoder.trunk",
                                    trunk_sizes(dec_in, cfg.decoder_width, cfg.decoder_depth),
                                    hidden, ad::Activation::identity, rng);
        p.dec_mean = ad::Mlp::make(s, "decoder.mean", {cfg.decoder_width, n_features}, hidden,
                                   ad::Activation::identity, rng);
        p.dec_scale = ad::Mlp::make(s, "decoder.scale", {cfg.decoder_width, n_features}, hidden,
                                    ad::Activation::identity, rng);
        return p;
    }

    DynamicsNets dynamics() const { return DynamicsNets{f_theta, f_delta, f_s, f_t}; }
};

/// The four latent posteriors inferred from one frame subset.
struct EncoderPosterior {
    GaussianLatent qL;   // [B*V x latent]
    GaussianLatent qD;   // [B*V x control]
    GaussianLatent qZs;  // [B*Es x k_es]
    GaussianLatent qZt;  // [B*Et x k_et]
};

/// Deterministic reparameterization noise; zero gives posterior means.
struct NoiseSource {
    Rng rng;
    bool zero = false;

    static NoiseSource zeros() { return NoiseSource{Rng(0), true}; }
    static NoiseSource seeded(std::uint64_t seed, std::uint64_t index) {
        return NoiseSource{Rng::substream(seed, index), false};
    }

    Array draw(const std::vector<std::size_t>& shape) {
        Array a(shape);
        if (!zero)
            for (std::size_t i = 0; i < a.numel(); ++i) a[i] = rng.normal();
        return a;
    }
};

namespace detail {

/// Append externally encoded features to each row when present.
inline ad::Var with_rho(ad::Tape& t, ad::Var rows, ad::Var rho, const ad::IndexPtr& row_sample) {
    if (!rho.valid()) return rows;
    return ad::concat(t, rows, ad::gather_rows(t, rho, row_sample));
}

}  // namespace detail

/// rho = f_psi(globals), or an invalid Var when there are no externals.
inline ad::Var encode_external(ad::Tape& t, const ad::TapeBinding& bind, const ModelParams& p,
                               const BatchData& batch) {
    if (p.cfg.global_dim == 0) return ad::Var{};
    return p.external.forward(t, bind, t.constant(batch.globals));
}

/// Control posterior: per-row representations mean-pooled over frames, then
/// Gaussian heads. Pooling is order-invariant by construction.
inline GaussianLatent encode_control(ad::Tape& t, const ad::TapeBinding& bind,
                                     const ModelParams& p, const EncoderFeed& feed,
                                     std::size_t n_node_rows, ad::Var rho, double sigma_floor) {
    if (feed.node_in.rows() == 0) throw contract_error("encode_control: empty context");
    ad::Var rows = detail::with_rho(t, t.constant(feed.node_in), rho, feed.node_sample);
    ad::Var rep = ad::relu(t, p.control_trunk.forward(t, bind, rows));
    ad::Var pooled = ad::scatter_mean(t, rep, feed.node_group, n_node_rows);
    return gaussian_from_heads(t, p.control_mean.forward(t, bind, pooled),
                               p.control_scale.forward(t, bind, pooled), sigma_floor);
}

/// State posterior from the frame-0 observation alone.
inline GaussianLatent encode_state(ad::Tape& t, const ad::TapeBinding& bind, const ModelParams& p,
                                   const BatchData& batch, ad::Var rho, double sigma_floor) {
    ad::Var rows = detail::with_rho(t, t.constant(batch.x0_in), rho, batch.node_sample);
    ad::Var rep = ad::relu(t, p.state_trunk.forward(t, bind, rows));
    return gaussian_from_heads(t, p.state_mean.forward(t, bind, rep),
                               p.state_scale.forward(t, bind, rep), sigma_floor);
}

/// Edge posteriors: per-frame edge encodings mean-pooled per edge.
inline std::pair<GaussianLatent, GaussianLatent> encode_edges(ad::Tape& t,
                                                              const ad::TapeBinding& bind,
                                                              const ModelParams& p,
                                                              const EncoderFeed& feed,
                                                              std::size_t n_sp_rows,
                                                              std::size_t n_tp_rows, ad::Var rho,
                                                              double sigma_floor) {
    ad::Var sp_rows = detail::with_rho(t, t.constant(feed.sp_in), rho, feed.sp_sample);
    ad::Var sp_rep = ad::relu(t, p.sp_trunk.forward(t, bind, sp_rows));
    ad::Var sp_pooled = ad::scatter_mean(t, sp_rep, feed.sp_group, n_sp_rows);
    GaussianLatent qZs = gaussian_from_heads(t, p.sp_mean.forward(t, bind, sp_pooled),
                                             p.sp_scale.forward(t, bind, sp_pooled), sigma_floor);

    ad::Var tp_rows = detail::with_rho(t, t.constant(feed.tp_in), rho, feed.tp_sample);
    ad::Var tp_rep = ad::relu(t, p.tp_trunk.forward(t, bind, tp_rows));
    ad::Var tp_pooled = ad::scatter_mean(t, tp_rep, feed.tp_group, n_tp_rows);
    GaussianLatent qZt = gaussian_from_heads(t, p.tp_mean.forward(t, bind, tp_pooled),
                                             p.tp_scale.forward(t, bind, tp_pooled), sigma_floor);
    return {qZs, qZt};
}

inline EncoderPosterior encode_posteriors(ad::Tape& t, const ad::TapeBinding& bind,
                                          const ModelParams& p, const BatchData& batch,
                                          const EncoderFeed& feed, ad::Var rho) {
    EncoderPosterior post;
    post.qD = encode_control(t, bind, p, feed, batch.B * batch.V, rho, p.cfg.sigma_floor);
    post.qL = encode_state(t, bind, p, batch, rho, p.cfg.sigma_floor);
    auto qz = encode_edges(t, bind, p, feed, batch.B * batch.Es, batch.B * batch.Et, rho,
                           p.cfg.sigma_floor);
    post.qZs = qz.first;
    post.qZt = qz.second;
    return post;
}

/// Gaussian observation decode of one latent frame.
inline GaussianLatent decode_frame(ad::Tape& t, const ad::TapeBinding& bind, const ModelParams& p,
                                   ad::Var l, ad::Var d0, double time_value, double time_scale,
                                   ad::Var rho, const ad::IndexPtr& node_sample) {
    ad::Var input = l;
    if (!p.cfg.decode_just_latent) {
        const std::size_t rows = t.val(l).rows();
        ad::Var t_col = t.constant(Array::full({rows, 1}, time_value / time_scale));
        std::vector<ad::Var> parts{l, d0, t_col};
        input = ad::concat(t, parts);
        input = detail::with_rho(t, input, rho, node_sample);
    }
    ad::Var rep = ad::relu(t, p.dec_trunk.forward(t, bind, input));
    return gaussian_from_heads(t, p.dec_mean.forward(t, bind, rep),
                               p.dec_scale.forward(t, bind, rep), p.cfg.sigma_floor);
}

/// Everything the loss, the metrics and the latent export need from one pass.
struct Rollout {
    EncoderPosterior posterior;  // the posterior that was sampled from
    ad::Var l0, d0, z_s0, z_t0;
    std::vector<double> times;                      // decode grid
    std::vector<GaussianLatent> outputs;            // per frame, [B*V x K]
    std::vector<ad::Var> l_frames;                  // latent trace
    std::vector<ad::Var> zs_frames, zt_frames;      // edge weight traces
};

/// Full pipeline: encode (conditioning feed), sample, integrate frame by
/// frame over the window (plus the horizon when requested), decode at every
/// grid point.
inline Rollout forward(ad::Tape& t, const ad::TapeBinding& bind, const ModelParams& p,
                       const GraphPlan& plan, const BatchData& batch, const EncoderFeed& feed,
                       NoiseSource& noise, bool include_extrapolation) {
    Rollout roll;
    ad::Var rho = encode_external(t, bind, p, batch);
    roll.posterior = encode_posteriors(t, bind, p, batch, feed, rho);

    roll.l0 = sample_latent(t, roll.posterior.qL, noise.draw(t.val(roll.posterior.qL.mean).shape()));
    roll.d0 = sample_latent(t, roll.posterior.qD, noise.draw(t.val(roll.posterior.qD.mean).shape()));
    roll.z_s0 =
        sample_latent(t, roll.posterior.qZs, noise.draw(t.val(roll.posterior.qZs.mean).shape()));
    roll.z_t0 =
        sample_latent(t, roll.posterior.qZt, noise.draw(t.val(roll.posterior.qZt.mean).shape()));

    roll.times = batch.window_times;
    if (include_extrapolation)
        roll.times.insert(roll.times.end(), batch.extra_times.begin(), batch.extra_times.end());

    ModelState state{roll.l0, roll.d0, roll.z_s0, roll.z_t0, roll.l0};
    const DynamicsNets nets = p.dynamics();
    for (std::size_t i = 0; i < roll.times.size(); ++i) {
        if (i > 0)
            state = advance_frame(t, bind, nets, plan, state, roll.times[i - 1], roll.times[i],
                                  p.cfg.n_rk4_substeps);
        roll.l_frames.push_back(state.l);
        roll.zs_frames.push_back(state.z_s);
        roll.zt_frames.push_back(state.z_t);
        roll.outputs.push_back(decode_frame(t, bind, p, state.l, roll.d0, roll.times[i],
                                            batch.time_scale, rho, batch.node_sample));
    }
    return roll;
}

}  // namespace stgnp::model
