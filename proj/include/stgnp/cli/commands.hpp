#pragma once

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "stgnp/ad/checkpoint.hpp"
#include "stgnp/bench/baselines.hpp"
#include "stgnp/bench/knn.hpp"
#include "stgnp/graph/dataset.hpp"
#include "stgnp/graph/normalize.hpp"
#include "stgnp/graph/split.hpp"
#include "stgnp/io/config_file.hpp"
#include "stgnp/io/csv.hpp"
#include "stgnp/model/model.hpp"
#include "stgnp/sim/generate.hpp"
#include "stgnp/train/evaluate.hpp"
#include "stgnp/train/trainer.hpp"

namespace stgnp::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct RunConfig {
    std::string dataset_path;
    std::string output_dir;
    std::uint64_t split_seed = 0;
    model::ModelConfig model;
    train::TrainConfig train;
    train::LossWeights loss;
};

inline std::map<std::string, std::string> loss_to_map(const train::LossWeights& w) {
    std::map<std::string, std::string> m;
    m["beta1"] = io::format_double(w.beta1);
    m["beta2"] = io::format_double(w.beta2);
    m["beta3"] = io::format_double(w.beta3);
    return m;
}

inline train::LossWeights loss_from_map(const std::map<std::string, std::string>& m) {
    train::LossWeights w;
    auto get = [&m](const char* k, double& out) {
        auto it = m.find(k);
        if (it != m.end()) out = std::stod(it->second);
    };
    get("beta1", w.beta1);
    get("beta2", w.beta2);
    get("beta3", w.beta3);
    w.validate();
    return w;
}

inline RunConfig run_config_from_sections(const io::ConfigSections& sections) {
    RunConfig rc;
    auto sec = [&sections](const char* name) {
        auto it = sections.find(name);
        return it == sections.end() ? std::map<std::string, std::string>{} : it->second;
    };
    const auto data = sec("data");
    if (auto it = data.find("dataset"); it != data.end()) rc.dataset_path = it->second;
    const auto run = sec("run");
    if (auto it = run.find("output"); it != run.end()) rc.output_dir = it->second;
    if (auto it = run.find("split_seed"); it != run.end()) rc.split_seed = std::stoull(it->second);
    rc.model = model::ModelConfig::from_map(sec("model"));
    rc.train = train::TrainConfig::from_map(sec("train"));
    rc.loss = loss_from_map(sec("loss"));
    return rc;
}

inline io::ConfigSections run_config_to_sections(const RunConfig& rc) {
    io::ConfigSections s;
    s["data"]["dataset"] = rc.dataset_path;
    s["run"]["output"] = rc.output_dir;
    s["run"]["split_seed"] = std::to_string(rc.split_seed);
    s["model"] = rc.model.to_map();
    s["train"] = rc.train.to_map();
    s["loss"] = loss_to_map(rc.loss);
    return s;
}

/// STGNP_SEED overrides both the split seed and the training seed.
inline void apply_env_seed(RunConfig& rc) {
    if (const char* env = std::getenv("STGNP_SEED")) {
        const std::uint64_t seed = std::stoull(env);
        rc.split_seed = seed;
        rc.train.seed = seed;
    }
}

/// "section.key=value" overrides from the command line.
inline void apply_override(io::ConfigSections& sections, const std::string& spec) {
    const auto eq = spec.find('=');
    const auto dot = spec.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
        throw contract_error("override must look like section.key=value, got '" + spec + "'");
    sections[io::trim(spec.substr(0, dot))][io::trim(spec.substr(dot + 1, eq - dot - 1))] =
        io::trim(spec.substr(eq + 1));
}

// ---------------------------------------------------------------------------
// Checkpoint metadata
// ---------------------------------------------------------------------------

inline std::string join_values(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out += (i ? " " : "") + io::format_double(v[i]);
    return out;
}

inline std::vector<double> split_values(const std::string& s) {
    std::istringstream is(s);
    std::vector<double> v;
    double x;
    while (is >> x) v.push_back(x);
    return v;
}

inline void checkpoint_put_context(ad::Checkpoint& ck, const model::ModelConfig& cfg,
                                   const graph::NormalizationStats& st, double time_scale,
                                   std::uint64_t split_seed, double context_fraction,
                                   const graph::MultiplexDataset& ds) {
    for (const auto& [k, v] : cfg.to_map()) ck.set_meta("model." + k, v);
    ck.set_meta("norm.node_mean", join_values(st.node_mean));
    ck.set_meta("norm.node_std", join_values(st.node_std));
    ck.set_meta("norm.global_mean", join_values(st.global_mean));
    ck.set_meta("norm.global_std", join_values(st.global_std));
    ck.set_meta("norm.time_scale", io::format_double(time_scale));
    ck.set_meta("run.split_seed", std::to_string(split_seed));
    ck.set_meta("run.context_fraction", io::format_double(context_fraction));
    ck.set_meta("data.system", ds.system);
    ck.set_meta("data.n_features", std::to_string(ds.n_node_features()));
    ck.set_meta("data.sp_attr_dim", std::to_string(ds.spatial_edge_attrs.dim(3)));
    ck.set_meta("data.tp_attr_dim", std::to_string(ds.temporal_edge_attrs.dim(3)));
}

struct LoadedModel {
    model::ModelParams params;
    graph::NormalizationStats stats;
    double time_scale = 1.0;
    std::uint64_t split_seed = 0;
    double context_fraction = 1.0 / 3.0;
};

inline LoadedModel load_model(const fs::path& checkpoint_stem) {
    ad::Checkpoint ck = ad::Checkpoint::load(checkpoint_stem);
    std::map<std::string, std::string> model_map;
    for (const auto& [k, v] : ck.metadata)
        if (k.rfind("model.", 0) == 0) model_map[k.substr(6)] = v;
    LoadedModel lm{
        model::ModelParams::make(model::ModelConfig::from_map(model_map),
                                 std::stoul(ck.meta("data.n_features")),
                                 std::stoul(ck.meta("data.sp_attr_dim")),
                                 std::stoul(ck.meta("data.tp_attr_dim")), 0),
        graph::NormalizationStats{},
        std::stod(ck.meta("norm.time_scale")),
        std::stoull(ck.meta("run.split_seed")),
        std::stod(ck.meta("run.context_fraction")),
    };
    ck.restore_into(lm.params.store);
    lm.stats.node_mean = split_values(ck.meta("norm.node_mean"));
    lm.stats.node_std = split_values(ck.meta("norm.node_std"));
    lm.stats.global_mean = split_values(ck.meta("norm.global_mean"));
    lm.stats.global_std = split_values(ck.meta("norm.global_std"));
    lm.stats.fitted = true;
    return lm;
}

inline std::vector<int> pick_split(const graph::SplitSpec& split, const std::string& which,
                                   std::size_t n_samples) {
    if (which == "train") return split.train;
    if (which == "val") return split.val;
    if (which == "test") return split.test;
    if (which == "all") {
        std::vector<int> all(n_samples);
        for (std::size_t i = 0; i < n_samples; ++i) all[i] = static_cast<int>(i);
        return all;
    }
    throw contract_error("unknown split '" + which + "' (train|val|test|all)");
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct GenerateOpts {
    std::string system;
    std::string out;
    std::size_t n = 500;
    std::uint64_t seed = 0;
    double spring = 2.0;
    long label = -1;
    bool lorenz_conventional_y = false;
};

inline void cmd_generate(const GenerateOpts& opts) {
    sim::GenerateOptions gen;
    gen.pendulum_spring = opts.spring;
    gen.label = opts.label;
    gen.lorenz_conventional_y = opts.lorenz_conventional_y;
    auto ds = sim::generate_dataset(sim::system_from_string(opts.system), opts.n, opts.seed, gen);
    graph::save_dataset(ds, opts.out);
    std::cout << "wrote " << ds.n_samples() << " samples (" << ds.n_frames() << "+"
              << ds.extra_times.size() << " frames, " << ds.n_nodes() << " nodes) to " << opts.out
              << "\n";
}

struct TrainResultPaths {
    fs::path run_dir;
    fs::path best_checkpoint;
    bool diverged = false;
};

inline TrainResultPaths cmd_train(const std::string& config_path,
                                  const std::vector<std::string>& overrides = {},
                                  bool quiet = false) {
    io::ConfigSections sections = io::load_config(config_path);
    for (const auto& o : overrides) apply_override(sections, o);
    RunConfig rc = run_config_from_sections(sections);
    apply_env_seed(rc);
    if (rc.dataset_path.empty()) throw contract_error("config: [data] dataset is required");
    if (rc.output_dir.empty()) throw contract_error("config: [run] output is required");

    auto ds = graph::load_dataset(rc.dataset_path);
    rc.model.global_dim = ds.n_globals();
    if (rc.model.global_dim > 0 && rc.model.rho_dim == 0) rc.model.rho_dim = 8;
    rc.model.validate();

    const fs::path run_dir(rc.output_dir);
    fs::create_directories(run_dir);
    io::save_config(run_dir / "config.txt", run_config_to_sections(rc));

    auto split = graph::split_dataset(ds.n_samples(), rc.split_seed);
    auto stats = graph::zscore_fit(ds, split.train);
    auto params = model::ModelParams::make(rc.model, ds.n_node_features(),
                                           ds.spatial_edge_attrs.dim(3),
                                           ds.temporal_edge_attrs.dim(3), rc.train.seed);

    auto out = train::train(params, ds, split, stats, rc.loss, rc.train,
                            [&](const train::EpochRecord& r) {
                                if (quiet) return;
                                std::cout << "epoch " << r.epoch << " loss " << r.total
                                          << " val_mae " << r.val_mae << " lr " << r.lr << "\n";
                            });
    io::write_history_csv(run_dir / "history.csv", out.history);

    // final = last parameter state, best = lowest validation MAE
    ad::Checkpoint final_ck = ad::Checkpoint::from_store(params.store);
    checkpoint_put_context(final_ck, rc.model, stats, ds.times.back(), rc.split_seed,
                           rc.train.context_fraction, ds);
    final_ck.save(run_dir / "checkpoint_final");

    train::restore_best(params, out);
    ad::Checkpoint best_ck = ad::Checkpoint::from_store(params.store);
    checkpoint_put_context(best_ck, rc.model, stats, ds.times.back(), rc.split_seed,
                           rc.train.context_fraction, ds);
    best_ck.save(run_dir / "checkpoint_best");

    TrainResultPaths res{run_dir, run_dir / "checkpoint_best", out.diverged};
    if (out.diverged)
        throw divergence_error("training diverged: " + out.message +
                               " (last finite checkpoint written to " +
                               (run_dir / "checkpoint_best").string() + ")");

    const auto ctx = out.context_frames;
    auto recon = train::evaluate(params, ds, stats, split.test, ctx, "reconstruction",
                                 rc.train.batch_size);
    io::write_metrics_csv(run_dir / "metrics_reconstruction.csv", recon);
    if (!ds.extra_times.empty()) {
        auto extra = train::evaluate(params, ds, stats, split.test, ctx, "extrapolation",
                                     rc.train.batch_size);
        io::write_metrics_csv(run_dir / "metrics_extrapolation.csv", extra);
    }
    if (!quiet)
        std::cout << "run complete; best epoch " << out.best_epoch << " val_mae " << out.best_val
                  << "\n";
    return res;
}

struct EvalOpts {
    std::string checkpoint;
    std::string dataset;
    std::string task = "reconstruction";
    std::string split = "test";
    std::string metrics_out;
    std::string trajectories_out;
    std::size_t batch_size = 30;
};

inline train::MetricsReport cmd_eval(const EvalOpts& opts) {
    LoadedModel lm = load_model(opts.checkpoint);
    auto ds = graph::load_dataset(opts.dataset);
    auto split = graph::split_dataset(ds.n_samples(), lm.split_seed);
    auto samples = pick_split(split, opts.split, ds.n_samples());
    auto ctx = graph::make_context_mask(ds.n_frames(), lm.context_fraction);

    std::ofstream traj;
    train::TrajectorySink sink;
    if (!opts.trajectories_out.empty()) {
        traj = io::open_out(opts.trajectories_out);
        traj << "sample,time,node,feature,truth,mean,scale\n";
        sink = [&traj, &ds](int sample, double time, std::size_t node, std::size_t feature, bool,
                            double truth, double mean, double scale) {
            traj << sample << ',' << io::format_double(time) << ',' << node << ','
                 << ds.feature_names[feature] << ',' << io::format_double(truth) << ','
                 << io::format_double(mean) << ',' << io::format_double(scale) << '\n';
        };
    }
    auto report =
        train::evaluate(lm.params, ds, lm.stats, samples, ctx, opts.task, opts.batch_size, sink);
    if (!opts.metrics_out.empty()) io::write_metrics_csv(opts.metrics_out, report);
    for (const auto& r : report.rows)
        std::cout << r.method << " " << r.task << " " << r.feature << ": mse " << r.mse << " mae "
                  << r.mae << " mspe% " << r.mspe_percent << " mape% " << r.mape_percent << "\n";
    return report;
}

struct BaselineOpts {
    std::string dataset;
    std::size_t horizon = 0;  // 0 = full stored horizon
    std::string split = "test";
    std::uint64_t split_seed = 0;
    std::string metrics_out;
    std::string orders_out;
};

/// LOCF, AR(1) and auto-tuned ARIMA applied independently per (sample, node,
/// feature) on the raw training window, scored on the extrapolation horizon
/// with the shared metric kernels.
inline train::MetricsReport cmd_baselines(const BaselineOpts& opts) {
    auto ds = graph::load_dataset(opts.dataset);
    if (ds.extra_times.empty())
        throw contract_error("baselines: dataset has no extrapolation ground truth");
    auto split = graph::split_dataset(ds.n_samples(), opts.split_seed);
    auto samples = pick_split(split, opts.split, ds.n_samples());

    const std::size_t Fx = ds.extra_times.size();
    const std::size_t horizon = opts.horizon == 0 ? Fx : std::min(opts.horizon, Fx);
    const std::size_t V = ds.n_nodes(), K = ds.n_node_features(), F = ds.n_frames();

    std::ofstream orders;
    if (!opts.orders_out.empty()) {
        orders = io::open_out(opts.orders_out);
        orders << "sample,node,feature,p,d,q\n";
    }

    const char* methods[3] = {"locf", "ar1", "arima"};
    std::vector<std::vector<train::MetricAccumulator>> acc(3);
    for (int m = 0; m < 3; ++m)
        for (std::size_t k = 0; k < K; ++k) acc[m].emplace_back(samples.size());

    std::vector<double> series(F);
    for (std::size_t si = 0; si < samples.size(); ++si) {
        const std::size_t s = static_cast<std::size_t>(samples[si]);
        for (std::size_t v = 0; v < V; ++v) {
            for (std::size_t k = 0; k < K; ++k) {
                for (std::size_t f = 0; f < F; ++f) series[f] = ds.node_value(s, f, v, k);
                const auto locf = bench::locf_forecast(series, horizon);
                const auto ar1 = bench::ar1_fit_forecast(series, horizon);
                const auto fit = bench::arima_fit(series);
                const auto arima = bench::arima_forecast(fit, series, horizon);
                if (orders.is_open())
                    orders << samples[si] << ',' << v << ',' << ds.feature_names[k] << ','
                           << fit.order.p << ',' << fit.order.d << ',' << fit.order.q << '\n';
                for (std::size_t h = 0; h < horizon; ++h) {
                    const double truth = ds.extra_value(s, h, v, k);
                    acc[0][k].add(si, truth, locf[h]);
                    acc[1][k].add(si, truth, ar1[h]);
                    acc[2][k].add(si, truth, arima[h]);
                }
            }
        }
    }

    train::MetricsReport report;
    for (int m = 0; m < 3; ++m)
        for (std::size_t k = 0; k < K; ++k)
            report.rows.push_back(acc[m][k].finalize(methods[m], "extrapolation",
                                                     ds.feature_names[k]));
    if (!opts.metrics_out.empty()) io::write_metrics_csv(opts.metrics_out, report);
    for (const auto& r : report.rows)
        std::cout << r.method << " " << r.task << " " << r.feature << ": mse " << r.mse << " mae "
                  << r.mae << " mspe% " << r.mspe_percent << " mape% " << r.mape_percent << "\n";
    return report;
}

struct ExportLatentsOpts {
    std::string checkpoint;
    std::string dataset;
    std::string out;
    std::string split = "all";
    std::size_t batch_size = 30;
};

inline void cmd_export_latents(const ExportLatentsOpts& opts) {
    LoadedModel lm = load_model(opts.checkpoint);
    auto ds = graph::load_dataset(opts.dataset);
    auto split = graph::split_dataset(ds.n_samples(), lm.split_seed);
    auto samples = pick_split(split, opts.split, ds.n_samples());
    auto ctx = graph::make_context_mask(ds.n_frames(), lm.context_fraction);
    Array lat = train::export_latents(lm.params, ds, lm.stats, samples, ctx, opts.batch_size);

    const std::size_t V = ds.n_nodes();
    const std::size_t Ld = lm.params.cfg.latent_dim, Dd = lm.params.cfg.control_dim();
    auto os = io::open_out(opts.out);
    os << "sample_id,label";
    for (std::size_t i = 0; i < V * Ld; ++i) os << ",l0_" << i;
    for (std::size_t i = 0; i < V * Dd; ++i) os << ",d0_" << i;
    os << "\n";
    for (std::size_t r = 0; r < lat.rows(); ++r) {
        const std::size_t s = static_cast<std::size_t>(samples[r]);
        os << samples[r] << ',' << (ds.labels.empty() ? -1 : ds.labels[s]);
        for (std::size_t c = 0; c < lat.cols(); ++c) os << ',' << io::format_double(lat.at2(r, c));
        os << '\n';
    }
    std::cout << "wrote " << lat.rows() << " rows x " << (lat.cols() + 2) << " columns to "
              << opts.out << "\n";
}

struct ClassifyOpts {
    std::string latents;
    std::size_t k = 5;
    std::string weighting = "uniform";
    int p_norm = 2;
    std::size_t folds = 3;
    std::uint64_t seed = 0;
    std::string out;
};

struct ClassifyResult {
    std::vector<double> fold_accuracy;
    double mean_accuracy = 0;
};

inline ClassifyResult cmd_classify(const ClassifyOpts& opts) {
    std::ifstream is(opts.latents);
    if (!is) throw format_error("cannot open " + opts.latents);
    std::string line;
    if (!std::getline(is, line)) throw format_error("latents csv: empty file");
    std::vector<std::vector<double>> rows;
    std::vector<std::int64_t> labels;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> cells;
        std::string cur;
        for (char c : line) {
            if (c == ',') {
                cells.push_back(std::stod(cur));
                cur.clear();
            } else {
                cur += c;
            }
        }
        cells.push_back(std::stod(cur));
        if (cells.size() < 3) throw format_error("latents csv: too few columns");
        labels.push_back(static_cast<std::int64_t>(cells[1]));
        rows.emplace_back(cells.begin() + 2, cells.end());
    }
    if (rows.empty()) throw format_error("latents csv: no data rows");
    for (std::int64_t l : labels)
        if (l < 0) throw contract_error("classify: latents csv has samples without labels");

    Array x({rows.size(), rows[0].size()});
    for (std::size_t r = 0; r < rows.size(); ++r)
        std::copy(rows[r].begin(), rows[r].end(), x.data() + r * rows[0].size());

    ClassifyResult res;
    // per-fold accuracies with the deterministic fold assignment
    std::vector<int> order(x.rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng rng = Rng::substream(opts.seed, 0xcf01d);
    rng.shuffle(order);
    for (std::size_t fold = 0; fold < opts.folds; ++fold) {
        std::vector<int> train_ids, test_ids;
        for (std::size_t i = 0; i < order.size(); ++i)
            (i % opts.folds == fold ? test_ids : train_ids).push_back(order[i]);
        Array train_x({train_ids.size(), x.cols()});
        Array test_x({test_ids.size(), x.cols()});
        std::vector<std::int64_t> train_y(train_ids.size());
        for (std::size_t i = 0; i < train_ids.size(); ++i) {
            std::copy_n(x.data() + static_cast<std::size_t>(train_ids[i]) * x.cols(), x.cols(),
                        train_x.data() + i * x.cols());
            train_y[i] = labels[static_cast<std::size_t>(train_ids[i])];
        }
        for (std::size_t i = 0; i < test_ids.size(); ++i)
            std::copy_n(x.data() + static_cast<std::size_t>(test_ids[i]) * x.cols(), x.cols(),
                        test_x.data() + i * x.cols());
        auto pred = bench::knn_classify(train_x, train_y, test_x,
                                        std::min(opts.k, train_ids.size()), opts.weighting,
                                        opts.p_norm);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < test_ids.size(); ++i)
            if (pred[i] == labels[static_cast<std::size_t>(test_ids[i])]) ++hits;
        res.fold_accuracy.push_back(static_cast<double>(hits) /
                                    static_cast<double>(test_ids.size()));
    }
    for (double a : res.fold_accuracy) res.mean_accuracy += a;
    res.mean_accuracy /= static_cast<double>(res.fold_accuracy.size());

    for (std::size_t f = 0; f < res.fold_accuracy.size(); ++f)
        std::cout << "fold " << f << " accuracy " << res.fold_accuracy[f] << "\n";
    std::cout << "mean accuracy " << res.mean_accuracy << "\n";
    if (!opts.out.empty()) {
        auto os = io::open_out(opts.out);
        os << "fold,accuracy\n";
        for (std::size_t f = 0; f < res.fold_accuracy.size(); ++f)
            os << f << ',' << io::format_double(res.fold_accuracy[f]) << '\n';
        os << "mean," << io::format_double(res.mean_accuracy) << '\n';
    }
    return res;
}

inline void cmd_inspect(const std::string& dataset_path) {
    auto ds = graph::load_dataset(dataset_path);
    std::ifstream man(fs::path(dataset_path) / "manifest.txt");
    std::string line;
    while (std::getline(man, line)) std::cout << line << "\n";
    std::cout << "derived: " << ds.n_samples() << " samples, " << ds.n_frames() << " frames + "
              << ds.extra_times.size() << " extrapolation frames, " << ds.n_nodes() << " nodes, "
              << ds.n_node_features() << " features, " << ds.adjacency.n_spatial_edges()
              << " spatial edges, " << ds.adjacency.n_temporal_edges() << " temporal edges\n";
}

}  // namespace stgnp::cli
