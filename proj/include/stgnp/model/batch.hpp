#pragma once

#include <vector>

#include "stgnp/ad/ops.hpp"
#include "stgnp/graph/dataset.hpp"
#include "stgnp/graph/normalize.hpp"

namespace stgnp::model {

/// Row-batched encoder inputs for one frame subset (context or target).
/// Node rows are (sample, frame, node) in that nesting order; edge rows are
/// (sample, frame, edge). Group lists map rows onto pooled outputs
/// ([b*V + v] or [b*E + e]); sample lists map rows onto batch entries for
/// external conditioning.
struct EncoderFeed {
    Array node_in;  // [(b,ci,v) x (1+K)] scaled time then normalized features
    ad::IndexPtr node_group;
    ad::IndexPtr node_sample;
    Array sp_in;  // [(b,ci,e) x k_es_obs], raw edge attributes
    ad::IndexPtr sp_group;
    ad::IndexPtr sp_sample;
    Array tp_in;
    ad::IndexPtr tp_group;
    ad::IndexPtr tp_sample;
};

struct BatchData {
    std::size_t B = 0, V = 0, K = 0, Es = 0, Et = 0, G = 0;
    double time_scale = 1.0;
    std::vector<int> samples;

    EncoderFeed context_feed;
    EncoderFeed target_feed;  // built only when requested
    bool has_target_feed = false;

    Array x0_in;     // [B*V x K] normalized frame-0 observations
    Array globals;   // [B x G] normalized
    ad::IndexPtr node_sample;     // [B*V] -> b
    ad::IndexPtr sp_edge_sample;  // [B*Es] -> b
    ad::IndexPtr tp_edge_sample;  // [B*Et] -> b

    std::vector<double> window_times;
    std::vector<double> extra_times;        // empty unless extrapolation requested
    std::vector<Array> target_rows;         // normalized truth per window frame [B*V x K]
    std::vector<int> context_frames;
};

namespace detail {

inline EncoderFeed build_feed(const graph::MultiplexDataset& ds,
                              const graph::NormalizationStats& st,
                              const std::vector<int>& samples, const std::vector<int>& frames,
                              double time_scale) {
    EncoderFeed feed;
    const std::size_t B = samples.size();
    const std::size_t V = ds.n_nodes(), K = ds.n_node_features();
    const std::size_t Es = ds.adjacency.n_spatial_edges();
    const std::size_t Et = ds.adjacency.n_temporal_edges();
    const std::size_t F = ds.n_frames();

    // temporal edge attributes exist for frame transitions only
    std::vector<int> tp_frames;
    for (int f : frames)
        if (f + 1 < static_cast<int>(F)) tp_frames.push_back(f);

    feed.node_in = Array({B * frames.size() * V, 1 + K});
    std::vector<int> node_group, node_sample;
    node_group.reserve(B * frames.size() * V);
    node_sample.reserve(B * frames.size() * V);
    std::size_t r = 0;
    for (std::size_t b = 0; b < B; ++b) {
        const std::size_t s = static_cast<std::size_t>(samples[b]);
        for (int f : frames) {
            for (std::size_t v = 0; v < V; ++v, ++r) {
                feed.node_in.at2(r, 0) = ds.times[static_cast<std::size_t>(f)] / time_scale;
                for (std::size_t k = 0; k < K; ++k)
                    feed.node_in.at2(r, 1 + k) = graph::zscore_apply(
                        st, k, ds.node_value(s, static_cast<std::size_t>(f), v, k));
                node_group.push_back(static_cast<int>(b * V + v));
                node_sample.push_back(static_cast<int>(b));
            }
        }
    }
    feed.node_group = ad::make_indices(std::move(node_group));
    feed.node_sample = ad::make_indices(std::move(node_sample));

    const std::size_t kes = ds.spatial_edge_attrs.dim(3);
    feed.sp_in = Array({B * frames.size() * Es, kes});
    std::vector<int> sp_group, sp_sample;
    r = 0;
    for (std::size_t b = 0; b < B; ++b) {
        const std::size_t s = static_cast<std::size_t>(samples[b]);
        for (int f : frames) {
            for (std::size_t e = 0; e < Es; ++e, ++r) {
                for (std::size_t k = 0; k < kes; ++k)
                    feed.sp_in.at2(r, k) =
                        ds.spatial_edge_attrs[((s * F + static_cast<std::size_t>(f)) * Es + e) * kes +
                                              k];
                sp_group.push_back(static_cast<int>(b * Es + e));
                sp_sample.push_back(static_cast<int>(b));
            }
        }
    }
    feed.sp_group = ad::make_indices(std::move(sp_group));
    feed.sp_sample = ad::make_indices(std::move(sp_sample));

    const std::size_t ket = ds.temporal_edge_attrs.dim(3);
    feed.tp_in = Array({B * tp_frames.size() * Et, ket});
    std::vector<int> tp_group, tp_sample;
    r = 0;
    for (std::size_t b = 0; b < B; ++b) {
        const std::size_t s = static_cast<std::size_t>(samples[b]);
        for (int f : tp_frames) {
            for (std::size_t e = 0; e < Et; ++e, ++r) {
                for (std::size_t k = 0; k < ket; ++k)
                    feed.tp_in.at2(r, k) =
                        ds.temporal_edge_attrs[((s * (F - 1) + static_cast<std::size_t>(f)) * Et + e) *
                                                   ket +
                                               k];
                tp_group.push_back(static_cast<int>(b * Et + e));
                tp_sample.push_back(static_cast<int>(b));
            }
        }
    }
    feed.tp_group = ad::make_indices(std::move(tp_group));
    feed.tp_sample = ad::make_indices(std::move(tp_sample));
    return feed;
}

}  // namespace detail

inline BatchData make_batch(const graph::MultiplexDataset& ds,
                            const graph::NormalizationStats& st, const std::vector<int>& samples,
                            const std::vector<int>& context_frames, bool build_target_feed,
                            bool include_extrapolation, double time_scale) {
    if (samples.empty()) throw contract_error("make_batch: empty sample list");
    if (context_frames.empty() || context_frames.front() != 0)
        throw contract_error("make_batch: context must be non-empty and include frame 0");
    BatchData batch;
    batch.B = samples.size();
    batch.V = ds.n_nodes();
    batch.K = ds.n_node_features();
    batch.Es = ds.adjacency.n_spatial_edges();
    batch.Et = ds.adjacency.n_temporal_edges();
    batch.G = ds.n_globals();
    batch.time_scale = time_scale;
    batch.samples = samples;
    batch.context_frames = context_frames;
    batch.window_times = ds.times;
    if (include_extrapolation) batch.extra_times = ds.extra_times;

    batch.context_feed = detail::build_feed(ds, st, samples, context_frames, time_scale);
    if (build_target_feed) {
        std::vector<int> all_frames(ds.n_frames());
        for (std::size_t f = 0; f < all_frames.size(); ++f) all_frames[f] = static_cast<int>(f);
        batch.target_feed = detail::build_feed(ds, st, samples, all_frames, time_scale);
        batch.has_target_feed = true;
    }

    const std::size_t B = batch.B, V = batch.V, K = batch.K;
    batch.x0_in = Array({B * V, K});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t v = 0; v < V; ++v)
            for (std::size_t k = 0; k < K; ++k)
                batch.x0_in.at2(b * V + v, k) = graph::zscore_apply(
                    st, k, ds.node_value(static_cast<std::size_t>(samples[b]), 0, v, k));

    batch.globals = Array({B, batch.G});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t g = 0; g < batch.G; ++g)
            batch.globals.at2(b, g) = graph::zscore_apply_global(
                st, g, ds.globals[static_cast<std::size_t>(samples[b]) * batch.G + g]);

    std::vector<int> ns(B * V), ss(B * batch.Es), ts(B * batch.Et);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t v = 0; v < V; ++v) ns[b * V + v] = static_cast<int>(b);
        for (std::size_t e = 0; e < batch.Es; ++e) ss[b * batch.Es + e] = static_cast<int>(b);
        for (std::size_t e = 0; e < batch.Et; ++e) ts[b * batch.Et + e] = static_cast<int>(b);
    }
    batch.node_sample = ad::make_indices(std::move(ns));
    batch.sp_edge_sample = ad::make_indices(std::move(ss));
    batch.tp_edge_sample = ad::make_indices(std::move(ts));

    batch.target_rows.reserve(ds.n_frames());
    for (std::size_t f = 0; f < ds.n_frames(); ++f) {
        Array rows({B * V, K});
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t v = 0; v < V; ++v)
                for (std::size_t k = 0; k < K; ++k)
                    rows.at2(b * V + v, k) = graph::zscore_apply(
                        st, k, ds.node_value(static_cast<std::size_t>(samples[b]), f, v, k));
        batch.target_rows.push_back(std::move(rows));
    }
    return batch;
}

}  // namespace stgnp::model
