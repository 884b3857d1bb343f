#pragma once

#include <functional>
#include <string>
#include <vector>

#include "stgnp/graph/normalize.hpp"
#include "stgnp/model/model.hpp"
#include "stgnp/train/metrics.hpp"

namespace stgnp::train {

/// Row sink for trajectory dumps: (sample id, time, node, feature, truth
/// present?, truth, mean, scale), all in de-normalized units.
using TrajectorySink =
    std::function<void(int, double, std::size_t, std::size_t, bool, double, double, double)>;

/// Context-conditioned, zero-noise evaluation of one task. Reconstruction
/// scores every frame of the training window; extrapolation scores the
/// appended horizon against the stored ground truth. Metrics are computed in
/// de-normalized units.
inline MetricsReport evaluate(const model::ModelParams& params, const graph::MultiplexDataset& ds,
                              const graph::NormalizationStats& st, const std::vector<int>& samples,
                              const std::vector<int>& context_frames, const std::string& task,
                              std::size_t batch_size, const TrajectorySink& sink = {}) {
    if (task != "reconstruction" && task != "extrapolation")
        throw contract_error("evaluate: task must be reconstruction or extrapolation");
    const bool extrapolate = task == "extrapolation";
    if (extrapolate && ds.extra_times.empty())
        throw contract_error("evaluate: dataset has no extrapolation ground truth");

    const std::size_t K = ds.n_node_features(), V = ds.n_nodes(), F = ds.n_frames();
    const double time_scale = ds.times.back();
    std::vector<MetricAccumulator> acc;
    acc.reserve(K);
    for (std::size_t k = 0; k < K; ++k) acc.emplace_back(samples.size());

    for (std::size_t start = 0; start < samples.size(); start += batch_size) {
        const std::size_t stop = std::min(samples.size(), start + batch_size);
        std::vector<int> ids(samples.begin() + static_cast<long>(start),
                             samples.begin() + static_cast<long>(stop));
        auto batch = model::make_batch(ds, st, ids, context_frames, /*target_feed=*/false,
                                       extrapolate, time_scale);
        auto plan = model::GraphPlan::build(ds.adjacency, ids.size());
        ad::Tape t;
        ad::TapeBinding bind(t, params.store);
        auto noise = model::NoiseSource::zeros();
        auto roll =
            model::forward(t, bind, params, plan, batch, batch.context_feed, noise, extrapolate);

        for (std::size_t fi = 0; fi < roll.times.size(); ++fi) {
            const bool in_window = fi < F;
            const bool scored = extrapolate ? !in_window : in_window;
            const bool dumped = sink && (in_window || extrapolate);
            if (!scored && !dumped) continue;
            const Array& mu = t.val(roll.outputs[fi].mean);
            const Array& sg = t.val(roll.outputs[fi].scale);
            for (std::size_t b = 0; b < ids.size(); ++b) {
                const std::size_t s = static_cast<std::size_t>(ids[b]);
                for (std::size_t v = 0; v < V; ++v) {
                    for (std::size_t k = 0; k < K; ++k) {
                        const double pred = graph::zscore_invert(st, k, mu.at2(b * V + v, k));
                        const double sigma = sg.at2(b * V + v, k) * st.node_std[k];
                        const double truth = in_window ? ds.node_value(s, fi, v, k)
                                                       : ds.extra_value(s, fi - F, v, k);
                        if (scored) acc[k].add(start + b, truth, pred);
                        if (dumped)
                            sink(ids[b], roll.times[fi], v, k, true, truth, pred, sigma);
                    }
                }
            }
        }
    }

    MetricsReport report;
    for (std::size_t k = 0; k < K; ++k)
        report.rows.push_back(acc[k].finalize("model", task, ds.feature_names[k]));
    return report;
}

/// Mean over features of the de-normalized reconstruction MAE; the model
/// selection metric.
inline double validation_mae(const model::ModelParams& params, const graph::MultiplexDataset& ds,
                             const graph::NormalizationStats& st, const std::vector<int>& samples,
                             const std::vector<int>& context_frames, std::size_t batch_size) {
    auto report = evaluate(params, ds, st, samples, context_frames, "reconstruction", batch_size);
    double mae = 0;
    for (const auto& row : report.rows) mae += row.mae;
    return mae / static_cast<double>(report.rows.size());
}

/// Flattened per-sample (l0, d0) posterior means, context-conditioned:
/// [n_samples x V*(latent+control)], node-major within each block.
inline Array export_latents(const model::ModelParams& params, const graph::MultiplexDataset& ds,
                            const graph::NormalizationStats& st, const std::vector<int>& samples,
                            const std::vector<int>& context_frames, std::size_t batch_size) {
    const std::size_t V = ds.n_nodes();
    const std::size_t Ld = params.cfg.latent_dim, Dd = params.cfg.control_dim();
    const double time_scale = ds.times.back();
    Array out({samples.size(), V * (Ld + Dd)});

    for (std::size_t start = 0; start < samples.size(); start += batch_size) {
        const std::size_t stop = std::min(samples.size(), start + batch_size);
        std::vector<int> ids(samples.begin() + static_cast<long>(start),
                             samples.begin() + static_cast<long>(stop));
        auto batch = model::make_batch(ds, st, ids, context_frames, false, false, time_scale);
        ad::Tape t;
        ad::TapeBinding bind(t, params.store);
        ad::Var rho = model::encode_external(t, bind, params, batch);
        auto post = model::encode_posteriors(t, bind, params, batch, batch.context_feed, rho);
        const Array& l0 = t.val(post.qL.mean);
        const Array& d0 = t.val(post.qD.mean);
        for (std::size_t b = 0; b < ids.size(); ++b) {
            double* row = out.data() + (start + b) * out.cols();
            for (std::size_t v = 0; v < V; ++v)
                for (std::size_t c = 0; c < Ld; ++c) *row++ = l0.at2(b * V + v, c);
            for (std::size_t v = 0; v < V; ++v)
                for (std::size_t c = 0; c < Dd; ++c) *row++ = d0.at2(b * V + v, c);
        }
    }
    return out;
}

}  // namespace stgnp::train
