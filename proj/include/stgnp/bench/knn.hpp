#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stgnp/core/array.hpp"
#include "stgnp/core/errors.hpp"
#include "stgnp/core/rng.hpp"

namespace stgnp::bench {

/// k-nearest-neighbour vote by Minkowski-p distance (p in {1,2}). Ties in the
/// vote break toward the smallest label id; neighbour ties break by index.
inline std::vector<std::int64_t> knn_classify(const Array& train_x,
                                              const std::vector<std::int64_t>& train_y,
                                              const Array& test_x, std::size_t k,
                                              const std::string& weighting, int p_norm) {
    if (train_x.rows() != train_y.size())
        throw contract_error("knn_classify: label count does not match training rows");
    if (k == 0 || k > train_x.rows())
        throw contract_error("knn_classify: k must be in [1, n_train]");
    if (train_x.cols() != test_x.cols())
        throw dim_error("knn_classify: feature width mismatch");
    if (weighting != "uniform" && weighting != "distance")
        throw contract_error("knn_classify: weighting must be uniform or distance");
    if (p_norm != 1 && p_norm != 2) throw contract_error("knn_classify: p must be 1 or 2");

    const std::size_t d = train_x.cols();
    std::vector<std::int64_t> out(test_x.rows());
    std::vector<std::pair<double, std::size_t>> dist(train_x.rows());
    for (std::size_t i = 0; i < test_x.rows(); ++i) {
        const double* q = test_x.data() + i * d;
        for (std::size_t j = 0; j < train_x.rows(); ++j) {
            const double* r = train_x.data() + j * d;
            double acc = 0;
            if (p_norm == 1) {
                for (std::size_t c = 0; c < d; ++c) acc += std::fabs(q[c] - r[c]);
            } else {
                for (std::size_t c = 0; c < d; ++c) acc += (q[c] - r[c]) * (q[c] - r[c]);
                acc = std::sqrt(acc);
            }
            dist[j] = {acc, j};
        }
        std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(k), dist.end());
        std::map<std::int64_t, double> votes;
        for (std::size_t j = 0; j < k; ++j) {
            const double w = weighting == "uniform" ? 1.0 : 1.0 / (dist[j].first + 1e-12);
            votes[train_y[dist[j].second]] += w;
        }
        std::int64_t winner = votes.begin()->first;
        double best = votes.begin()->second;
        for (const auto& [label, w] : votes) {
            if (w > best) {  // strict: ties keep the smallest label id
                best = w;
                winner = label;
            }
        }
        out[i] = winner;
    }
    return out;
}

/// Deterministic k-fold cross-validated accuracy.
inline double knn_cross_validate(const Array& x, const std::vector<std::int64_t>& y, std::size_t k,
                                 const std::string& weighting, int p_norm, std::size_t folds,
                                 std::uint64_t seed) {
    if (folds < 2 || folds > x.rows()) throw contract_error("knn_cross_validate: bad fold count");
    std::vector<int> order(x.rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng rng = Rng::substream(seed, 0xcf01d);
    rng.shuffle(order);

    const std::size_t d = x.cols();
    double acc_sum = 0;
    for (std::size_t fold = 0; fold < folds; ++fold) {
        std::vector<int> train_ids, test_ids;
        for (std::size_t i = 0; i < order.size(); ++i)
            (i % folds == fold ? test_ids : train_ids).push_back(order[i]);
        Array train_x({train_ids.size(), d});
        Array test_x({test_ids.size(), d});
        std::vector<std::int64_t> train_y(train_ids.size());
        for (std::size_t i = 0; i < train_ids.size(); ++i) {
            std::copy_n(x.data() + static_cast<std::size_t>(train_ids[i]) * d, d,
                        train_x.data() + i * d);
            train_y[i] = y[static_cast<std::size_t>(train_ids[i])];
        }
        for (std::size_t i = 0; i < test_ids.size(); ++i)
            std::copy_n(x.data() + static_cast<std::size_t>(test_ids[i]) * d, d,
                        test_x.data() + i * d);
        const auto pred =
            knn_classify(train_x, train_y, test_x, std::min(k, train_ids.size()), weighting, p_norm);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < test_ids.size(); ++i)
            if (pred[i] == y[static_cast<std::size_t>(test_ids[i])]) ++hits;
        acc_sum += static_cast<double>(hits) / static_cast<double>(test_ids.size());
    }
    return acc_sum / static_cast<double>(folds);
}

}  // namespace stgnp::bench
