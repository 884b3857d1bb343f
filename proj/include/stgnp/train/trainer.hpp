#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "stgnp/ad/adam.hpp"
#include "stgnp/graph/split.hpp"
#include "stgnp/model/model.hpp"
#include "stgnp/train/evaluate.hpp"
#include "stgnp/train/loss.hpp"
#include "stgnp/train/schedule.hpp"

namespace stgnp::train {

struct TrainConfig {
    std::size_t epochs = 300;
    std::size_t batch_size = 30;
    double learning_rate = 0.01;
    double plateau_factor = 2.0;
    int plateau_patience = 10;
    double min_lr = 1e-5;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
    std::string kl_annealing = "none";
    std::string lr_schedule = "plateau";  // plateau | halving
    int halving_period = 100;
    std::string weight_decay_mode = "decoupled";  // decoupled | l2
    double context_fraction = 1.0 / 3.0;
    double grad_clip_norm = 5.0;  // global L2 clip; 0 disables

    void validate() const {
        if (epochs < 1) throw contract_error("TrainConfig: epochs must be >= 1");
        if (batch_size < 1) throw contract_error("TrainConfig: batch_size must be >= 1");
        if (min_lr > learning_rate) throw contract_error("TrainConfig: min_lr must be <= lr");
        if (kl_annealing != "none")
            throw contract_error("TrainConfig: only kl_annealing = none is supported");
        if (lr_schedule != "plateau" && lr_schedule != "halving")
            throw contract_error("TrainConfig: lr_schedule must be plateau or halving");
        if (weight_decay_mode != "decoupled" && weight_decay_mode != "l2")
            throw contract_error("TrainConfig: weight_decay_mode must be decoupled or l2");
    }

    std::map<std::string, std::string> to_map() const {
        std::map<std::string, std::string> m;
        auto put = [&m](const std::string& k, auto v) {
            std::ostringstream os;
            os.precision(17);
            os << v;
            m[k] = os.str();
        };
        put("epochs", epochs);
        put("batch_size", batch_size);
        put("learning_rate", learning_rate);
        put("plateau_factor", plateau_factor);
        put("plateau_patience", plateau_patience);
        put("min_lr", min_lr);
        put("weight_decay", weight_decay);
        put("seed", seed);
        m["kl_annealing"] = kl_annealing;
        m["lr_schedule"] = lr_schedule;
        put("halving_period", halving_period);
        m["weight_decay_mode"] = weight_decay_mode;
        put("context_fraction", context_fraction);
        put("grad_clip_norm", grad_clip_norm);
        return m;
    }

    static TrainConfig from_map(const std::map<std::string, std::string>& m) {
        TrainConfig c;
        auto get = [&m](const std::string& k, auto& out) {
            auto it = m.find(k);
            if (it == m.end()) return;
            std::istringstream is(it->second);
            is >> out;
        };
        get("epochs", c.epochs);
        get("batch_size", c.batch_size);
        get("learning_rate", c.learning_rate);
        get("plateau_factor", c.plateau_factor);
        get("plateau_patience", c.plateau_patience);
        get("min_lr", c.min_lr);
        get("weight_decay", c.weight_decay);
        get("seed", c.seed);
        auto gets = [&m](const std::string& k, std::string& out) {
            auto it = m.find(k);
            if (it != m.end()) out = it->second;
        };
        gets("kl_annealing", c.kl_annealing);
        gets("lr_schedule", c.lr_schedule);
        get("halving_period", c.halving_period);
        gets("weight_decay_mode", c.weight_decay_mode);
        get("context_fraction", c.context_fraction);
        get("grad_clip_norm", c.grad_clip_norm);
        c.validate();
        return c;
    }
};

/// Scale the whole gradient list so its global L2 norm is at most max_norm.
inline void clip_global_norm(std::vector<Array>& grads, double max_norm) {
    double sq = 0.0;
    for (const Array& g : grads)
        for (std::size_t i = 0; i < g.numel(); ++i) sq += g[i] * g[i];
    const double norm = std::sqrt(sq);
    if (norm <= max_norm || norm == 0.0) return;
    const double f = max_norm / norm;
    for (Array& g : grads)
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] *= f;
}

struct EpochRecord {
    int epoch = 0;
    double total = 0, nll = 0, kl = 0, l2 = 0, l1 = 0;
    double val_mae = 0;
    double lr = 0;
};

struct TrainOutput {
    std::vector<EpochRecord> history;
    std::vector<Array> best_arrays;
    int best_epoch = -1;
    double best_val = std::numeric_limits<double>::infinity();
    bool diverged = false;
    std::string message;
    std::vector<int> context_frames;
};

/// Minibatch training loop with per-epoch validation MAE, plateau (or fixed
/// halving) schedule and best-validation checkpointing. Sampling uses
/// target-conditioned posteriors; the KL reference is context-conditioned.
inline TrainOutput train(model::ModelParams& params, const graph::MultiplexDataset& ds,
                         const graph::SplitSpec& split, const graph::NormalizationStats& st,
                         const LossWeights& weights, const TrainConfig& tc,
                         const std::function<void(const EpochRecord&)>& on_epoch = {}) {
    tc.validate();
    weights.validate();
    if (split.train.empty() || split.val.empty())
        throw contract_error("train: split must provide train and validation samples");

    const std::vector<int> context = graph::make_context_mask(ds.n_frames(), tc.context_fraction);
    const double time_scale = ds.times.back();

    ad::Adam adam(ad::AdamConfig{.learning_rate = tc.learning_rate,
                                 .weight_decay = tc.weight_decay,
                                 .decoupled_weight_decay = tc.weight_decay_mode == "decoupled"});
    PlateauSchedule plateau(tc.learning_rate, tc.plateau_factor, tc.plateau_patience, tc.min_lr);
    HalvingSchedule halving(tc.learning_rate, tc.halving_period, tc.min_lr);

    TrainOutput out;
    out.context_frames = context;
    std::vector<Array> last_finite = params.store.arrays();

    std::map<std::size_t, model::GraphPlan> plan_cache;
    auto plan_for = [&](std::size_t b) -> const model::GraphPlan& {
        auto it = plan_cache.find(b);
        if (it == plan_cache.end())
            it = plan_cache.emplace(b, model::GraphPlan::build(ds.adjacency, b)).first;
        return it->second;
    };

    for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
        const double lr = tc.lr_schedule == "plateau" ? plateau.lr() : halving.lr();
        adam.set_learning_rate(lr);

        std::vector<int> order = split.train;
        Rng shuffle_rng = Rng::substream(tc.seed, 0xe90c0000ULL + epoch);
        shuffle_rng.shuffle(order);

        EpochRecord rec;
        rec.epoch = static_cast<int>(epoch);
        rec.lr = lr;
        double weight_sum = 0;
        try {
            for (std::size_t start = 0, bi = 0; start < order.size();
                 start += tc.batch_size, ++bi) {
                const std::size_t stop = std::min(order.size(), start + tc.batch_size);
                std::vector<int> ids(order.begin() + static_cast<long>(start),
                                     order.begin() + static_cast<long>(stop));
                auto batch = model::make_batch(ds, st, ids, context, /*target_feed=*/true,
                                               /*extra=*/false, time_scale);
                ad::Tape t;
                ad::TapeBinding bind(t, params.store);
                auto noise = model::NoiseSource::seeded(tc.seed, epoch * 100000ULL + bi);
                auto roll = model::forward(t, bind, params, plan_for(ids.size()), batch,
                                           batch.target_feed, noise, false);
                ad::Var rho = model::encode_external(t, bind, params, batch);
                auto q_ctx =
                    model::encode_posteriors(t, bind, params, batch, batch.context_feed, rho);
                auto loss = total_loss(t, roll, batch.target_rows, q_ctx, weights, ids.size());
                t.backward(loss.total);
                auto grads = bind.gradients();
                if (tc.grad_clip_norm > 0.0) clip_global_norm(grads, tc.grad_clip_norm);
                adam.step(params.store, grads);

                const double w = static_cast<double>(ids.size());
                rec.total += loss.total_value * w;
                rec.nll += loss.nll_value * w;
                rec.kl += loss.kl_value * w;
                rec.l2 += loss.l2_value * w;
                rec.l1 += loss.l1_value * w;
                weight_sum += w;
            }
        } catch (const divergence_error& e) {
            out.diverged = true;
            out.message = e.what();
            if (out.best_epoch < 0) out.best_arrays = last_finite;
            return out;
        }
        rec.total /= weight_sum;
        rec.nll /= weight_sum;
        rec.kl /= weight_sum;
        rec.l2 /= weight_sum;
        rec.l1 /= weight_sum;

        rec.val_mae = validation_mae(params, ds, st, split.val, context, tc.batch_size);
        out.history.push_back(rec);
        if (on_epoch) on_epoch(rec);

        if (rec.val_mae < out.best_val) {
            out.best_val = rec.val_mae;
            out.best_epoch = static_cast<int>(epoch);
            out.best_arrays = params.store.arrays();
        }
        last_finite = params.store.arrays();

        if (tc.lr_schedule == "plateau")
            plateau.observe(rec.val_mae);
        else
            halving.observe_epoch(static_cast<int>(epoch));
    }
    if (out.best_epoch < 0) out.best_arrays = params.store.arrays();
    return out;
}

/// Put the best-validation parameters back into the store.
inline void restore_best(model::ModelParams& params, const TrainOutput& out) {
    if (out.best_arrays.size() != params.store.size())
        throw contract_error("restore_best: parameter count mismatch");
    for (std::size_t i = 0; i < out.best_arrays.size(); ++i)
        params.store.array(static_cast<int>(i)) = out.best_arrays[i];
}

}  // namespace stgnp::train
