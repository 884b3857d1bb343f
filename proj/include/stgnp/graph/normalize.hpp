#pragma once

#include <cmath>
#include <vector>

#include "stgnp/core/errors.hpp"
#include "stgnp/graph/dataset.hpp"

namespace stgnp::graph {

/// Z-score statistics per node feature and per global feature, fitted on
/// training samples only. Edge attributes are deliberately left untouched.
struct NormalizationStats {
    std::vector<double> node_mean, node_std;      // K entries
    std::vector<double> global_mean, global_std;  // G entries
    bool fitted = false;

    static constexpr double kStdFloor = 1e-8;
};

inline NormalizationStats zscore_fit(const MultiplexDataset& ds, const std::vector<int>& train_samples) {
    if (train_samples.empty()) throw contract_error("zscore_fit: no training samples");
    const std::size_t K = ds.n_node_features();
    const std::size_t G = ds.n_globals();
    NormalizationStats st;
    st.node_mean.assign(K, 0.0);
    st.node_std.assign(K, 0.0);
    st.global_mean.assign(G, 0.0);
    st.global_std.assign(G, 0.0);

    const std::size_t F = ds.n_frames(), V = ds.n_nodes();
    const double n_node_vals = static_cast<double>(train_samples.size() * F * V);
    for (std::size_t k = 0; k < K; ++k) {
        double sum = 0.0;
        for (int s : train_samples)
            for (std::size_t f = 0; f < F; ++f)
                for (std::size_t v = 0; v < V; ++v) sum += ds.node_value(s, f, v, k);
        const double mean = sum / n_node_vals;
        double var = 0.0;
        for (int s : train_samples)
            for (std::size_t f = 0; f < F; ++f)
                for (std::size_t v = 0; v < V; ++v) {
                    const double d = ds.node_value(s, f, v, k) - mean;
                    var += d * d;
                }
        st.node_mean[k] = mean;
        st.node_std[k] = std::max(std::sqrt(var / n_node_vals), NormalizationStats::kStdFloor);
    }
    for (std::size_t g = 0; g < G; ++g) {
        double sum = 0.0;
        for (int s : train_samples) sum += ds.globals[static_cast<std::size_t>(s) * G + g];
        const double mean = sum / static_cast<double>(train_samples.size());
        double var = 0.0;
        for (int s : train_samples) {
            const double d = ds.globals[static_cast<std::size_t>(s) * G + g] - mean;
            var += d * d;
        }
        st.global_mean[g] = mean;
        st.global_std[g] =
            std::max(std::sqrt(var / static_cast<double>(train_samples.size())),
                     NormalizationStats::kStdFloor);
    }
    st.fitted = true;
    return st;
}

inline double zscore_apply(const NormalizationStats& st, std::size_t k, double x) {
    if (!st.fitted) throw state_error("zscore_apply: statistics not fitted");
    return (x - st.node_mean[k]) / st.node_std[k];
}

inline double zscore_invert(const NormalizationStats& st, std::size_t k, double z) {
    if (!st.fitted) throw state_error("zscore_invert: statistics not fitted");
    return z * st.node_std[k] + st.node_mean[k];
}

inline double zscore_apply_global(const NormalizationStats& st, std::size_t g, double x) {
    if (!st.fitted) throw state_error("zscore_apply: statistics not fitted");
    return (x - st.global_mean[g]) / st.global_std[g];
}

/// Normalized copy of the node-feature tensor (any rank-4 [S,F,V,K] block).
inline Array zscore_apply_nodes(const NormalizationStats& st, const Array& nodes) {
    if (!st.fitted) throw state_error("zscore_apply: statistics not fitted");
    Array out = nodes;
    const std::size_t K = st.node_mean.size();
    for (std::size_t i = 0; i < out.numel(); ++i) {
        const std::size_t k = i % K;
        out[i] = (out[i] - st.node_mean[k]) / st.node_std[k];
    }
    return out;
}

}  // namespace stgnp::graph
