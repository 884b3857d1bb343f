#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "stgnp/core/errors.hpp"
#include "stgnp/core/rng.hpp"

namespace stgnp::graph {

struct SplitSpec {
    std::vector<int> train;
    std::vector<int> val;
    std::vector<int> test;
    std::vector<int> context_frame_indices;
};

/// Equally spaced context frames covering ceil(fraction*n) of the training
/// grid: round(linspace(0, n-1, m)) with duplicates collapsed. Frame 0 is
/// always included.
inline std::vector<int> make_context_mask(std::size_t n_train_frames, double fraction = 1.0 / 3.0) {
    if (n_train_frames < 2) throw contract_error("make_context_mask: need at least 2 frames");
    if (!(fraction > 0.0) || fraction > 1.0)
        throw contract_error("make_context_mask: fraction must be in (0, 1]");
    const std::size_t m = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(n_train_frames)));
    std::vector<int> idx;
    idx.reserve(m);
    if (m == 1) {
        idx.push_back(0);
    } else {
        const double span = static_cast<double>(n_train_frames - 1);
        for (std::size_t k = 0; k < m; ++k) {
            const double pos = span * static_cast<double>(k) / static_cast<double>(m - 1);
            idx.push_back(static_cast<int>(std::llround(pos)));
        }
    }
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    return idx;
}

/// Deterministic sample split: 20% test, then 20% of the remainder as
/// validation, rest train.
inline SplitSpec split_dataset(std::size_t n_samples, std::uint64_t seed) {
    if (n_samples < 5) throw contract_error("split_dataset: need at least 5 samples");
    std::vector<int> order(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) order[i] = static_cast<int>(i);
    Rng rng = Rng::substream(seed, 0xa11ce);
    rng.shuffle(order);

    const std::size_t n_test =
        static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n_samples)));
    const std::size_t rest = n_samples - n_test;
    const std::size_t n_val = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(rest)));

    SplitSpec split;
    split.test.assign(order.begin(), order.begin() + static_cast<long>(n_test));
    split.val.assign(order.begin() + static_cast<long>(n_test),
                     order.begin() + static_cast<long>(n_test + n_val));
    split.train.assign(order.begin() + static_cast<long>(n_test + n_val), order.end());
    std::sort(split.test.begin(), split.test.end());
    std::sort(split.val.begin(), split.val.end());
    std::sort(split.train.begin(), split.train.end());
    return split;
}

}  // namespace stgnp::graph
