#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "stgnp/core/errors.hpp"
#include "stgnp/core/rng.hpp"
#include "stgnp/graph/dataset.hpp"
#include "stgnp/sim/rk4.hpp"
#include "stgnp/sim/systems.hpp"

namespace stgnp::sim {

enum class SystemKind { pendulum, lorenz, kuramoto };

inline SystemKind system_from_string(const std::string& s) {
    if (s == "pendulum") return SystemKind::pendulum;
    if (s == "lorenz") return SystemKind::lorenz;
    if (s == "kuramoto") return SystemKind::kuramoto;
    throw contract_error("unknown system '" + s + "' (expected pendulum, lorenz or kuramoto)");
}

inline std::string to_string(SystemKind k) {
    switch (k) {
        case SystemKind::pendulum: return "pendulum";
        case SystemKind::lorenz: return "lorenz";
        case SystemKind::kuramoto: return "kuramoto";
    }
    return "?";
}

struct GenerateOptions {
    double pendulum_spring = 2.0;
    bool lorenz_conventional_y = false;
    std::size_t kuramoto_frames = 100;
    double kuramoto_dt = 0.1;
    int truth_substeps = 4;  // internal RK4 steps per sampled frame
    long label = -1;         // >= 0 assigns this label to every sample
};

namespace detail {

constexpr double kPi = 3.14159265358979323846;

/// Integrate n_frames-1 intervals at frame_dt with internal substeps; returns
/// one state row per frame including the initial one.
template <typename RhsFn, typename GuardFn>
std::vector<std::vector<double>> simulate_frames(const RhsFn& rhs, std::vector<double> x,
                                                 double frame_dt, std::size_t n_frames,
                                                 int substeps, const GuardFn& guard) {
    guard(x);
    std::vector<std::vector<double>> frames;
    frames.reserve(n_frames);
    frames.push_back(x);
    const double h = frame_dt / static_cast<double>(substeps);
    for (std::size_t f = 1; f < n_frames; ++f) {
        for (int s = 0; s < substeps; ++s) {
            x = rk4_step(rhs, x, h);
            for (double v : x)
                if (!std::isfinite(v))
                    throw divergence_error("simulate_frames: non-finite state at frame " +
                                           std::to_string(f));
            guard(x);
        }
        frames.push_back(x);
    }
    return frames;
}

}  // namespace detail

/// Ground-truth benchmark datasets. All randomness is drawn from (seed,
/// sample-index) substreams so regeneration is bit-exact. The extrapolation
/// horizon repeats the training frame count beyond the window and is stored
/// separately as ground truth. Synthetic edge attributes carry one constant
/// channel of 1.0.
inline graph::MultiplexDataset generate_dataset(SystemKind system, std::size_t n_samples,
                                                std::uint64_t seed,
                                                const GenerateOptions& opt = {}) {
    graph::MultiplexDataset ds;
    std::size_t V = 0, K = 0, F = 0;
    double dt = 0.0;

    switch (system) {
        case SystemKind::pendulum:
            V = 2, K = 2, F = 101, dt = 0.1;
            ds.feature_names = {"theta", "theta_dot"};
            ds.feature_units = {"rad", "rad_per_s"};
            break;
        case SystemKind::lorenz:
            V = 3, K = 3, F = 51, dt = 0.05;
            ds.feature_names = {"x", "y", "z"};
            ds.feature_units = {"1", "1", "1"};
            break;
        case SystemKind::kuramoto:
            V = 10, K = 1, F = opt.kuramoto_frames, dt = opt.kuramoto_dt;
            ds.feature_names = {"phase"};
            ds.feature_units = {"rad"};
            break;
    }
    const std::size_t Fx = F;  // extrapolation horizon, same number of frames
    ds.system = to_string(system);
    ds.adjacency = graph::build_adjacency(graph::SpatialKind::full, graph::TemporalKind::diagonal, V);
    ds.times.resize(F);
    ds.extra_times.resize(Fx);
    for (std::size_t f = 0; f < F; ++f) ds.times[f] = static_cast<double>(f) * dt;
    for (std::size_t f = 0; f < Fx; ++f) ds.extra_times[f] = static_cast<double>(F + f) * dt;

    const std::size_t Es = ds.adjacency.n_spatial_edges();
    const std::size_t Et = ds.adjacency.n_temporal_edges();
    ds.node_features = Array({n_samples, F, V, K});
    ds.extra_node_features = Array({n_samples, Fx, V, K});
    ds.spatial_edge_attrs = Array::full({n_samples, F, Es, 1}, 1.0);
    ds.temporal_edge_attrs = Array::full({n_samples, F - 1, Et, 1}, 1.0);
    ds.globals = Array({n_samples, 0});
    if (opt.label >= 0) ds.labels.assign(n_samples, opt.label);

    // Dataset-level Kuramoto system: one oscillator network per dataset, with
    // only initial phases varying across samples.
    KuramotoParams kura;
    if (system == SystemKind::kuramoto) {
        Rng sys_rng = Rng::substream(seed, 0x6b7572616d6f74ULL);
        kura.n = V;
        kura.coupling = barabasi_albert(V, 5, sys_rng);
        kura.omega.resize(V);
        for (auto& w : kura.omega) w = sys_rng.uniform(0.0, 2.0);
    }

    const std::size_t total_frames = F + Fx;
    for (std::size_t s = 0; s < n_samples; ++s) {
        Rng rng = Rng::substream(seed, s);
        std::vector<std::vector<double>> frames;

        switch (system) {
            case SystemKind::pendulum: {
                PendulumParams p;
                p.k = opt.pendulum_spring;
                auto rhs = [&p](const std::vector<double>& x) { return pendulum_rhs(x, p); };
                // The printed dynamics repel trajectories from |theta| = pi/2
                // with diverging force; a fixed-step integrator that gets too
                // close overshoots and the sample is numerically ruined. Such
                // trajectories are rejected and redrawn.
                auto guard = [](const std::vector<double>& x) {
                    if (std::fabs(std::cos(x[0])) < 1e-6 || std::fabs(std::cos(x[2])) < 1e-6)
                        throw rejection_error("pendulum trajectory hit the cos singularity");
                    if (std::fabs(x[1]) > 50.0 || std::fabs(x[3]) > 50.0)
                        throw rejection_error("pendulum trajectory left the physical regime");
                };
                for (int attempt = 0;; ++attempt) {
                    if (attempt >= 1000)
                        throw contract_error("pendulum generator: too many rejected samples");
                    std::vector<double> x0 = {rng.uniform(-detail::kPi / 2, detail::kPi / 2),
                                              rng.uniform(-1.0, 1.0),
                                              rng.uniform(-detail::kPi / 2, detail::kPi / 2),
                                              rng.uniform(-1.0, 1.0)};
                    try {
                        frames = detail::simulate_frames(rhs, x0, dt, total_frames,
                                                         opt.truth_substeps, guard);
                        break;
                    } catch (const rejection_error&) {
                        continue;
                    } catch (const divergence_error&) {
                        continue;
                    }
                }
                break;
            }
            case SystemKind::lorenz: {
                LorenzParams p;
                p.n_systems = V;
                p.conventional_y = opt.lorenz_conventional_y;
                p.coupling.resize(9 * V * V);
                for (auto& c : p.coupling) c = rng.uniform(-1.0, 1.0);
                std::vector<double> x0(3 * V);
                for (std::size_t i = 0; i < V; ++i) {
                    x0[3 * i] = rng.uniform(-10.0, 10.0);
                    x0[3 * i + 1] = rng.uniform(-10.0, 10.0);
                    x0[3 * i + 2] = rng.uniform(15.0, 35.0);
                }
                auto rhs = [&p](const std::vector<double>& x) { return lorenz_rhs(x, p); };
                frames = detail::simulate_frames(rhs, x0, dt, total_frames, opt.truth_substeps,
                                                 [](const std::vector<double>&) {});
                break;
            }
            case SystemKind::kuramoto: {
                std::vector<double> x0(V);
                for (auto& ph : x0) ph = rng.uniform(detail::kPi / 2, 3 * detail::kPi / 2);
                auto rhs = [&kura](const std::vector<double>& x) { return kuramoto_rhs(x, kura); };
                frames = detail::simulate_frames(rhs, x0, dt, total_frames, opt.truth_substeps,
                                                 [](const std::vector<double>&) {});
                break;
            }
        }

        // State layout is node-major in all three systems, so frames map
        // directly onto [V x K] feature rows.
        for (std::size_t f = 0; f < F; ++f)
            for (std::size_t i = 0; i < V * K; ++i)
                ds.node_features[((s * F + f) * V * K) + i] = frames[f][i];
        for (std::size_t f = 0; f < Fx; ++f)
            for (std::size_t i = 0; i < V * K; ++i)
                ds.extra_node_features[((s * Fx + f) * V * K) + i] = frames[F + f][i];
    }
    ds.validate();
    return ds;
}

/// Two datasets concatenated sample-wise; used to assemble labeled
/// multi-regime collections.
inline graph::MultiplexDataset concat_datasets(const graph::MultiplexDataset& a,
                                               const graph::MultiplexDataset& b) {
    a.validate();
    b.validate();
    if (a.n_frames() != b.n_frames() || a.n_nodes() != b.n_nodes() ||
        a.n_node_features() != b.n_node_features() || a.adjacency.spatial != b.adjacency.spatial ||
        a.adjacency.temporal != b.adjacency.temporal || a.times != b.times)
        throw contract_error("concat_datasets: incompatible datasets");
    if (a.labels.empty() != b.labels.empty())
        throw contract_error("concat_datasets: label presence differs");
    graph::MultiplexDataset out = a;
    out.system = a.system;
    auto cat = [](Array& dst, const Array& extra) {
        std::vector<std::size_t> shape = dst.shape();
        shape[0] += extra.dim(0);
        std::vector<double> data = dst.values();
        data.insert(data.end(), extra.values().begin(), extra.values().end());
        dst = Array(shape, std::move(data));
    };
    cat(out.node_features, b.node_features);
    cat(out.extra_node_features, b.extra_node_features);
    cat(out.spatial_edge_attrs, b.spatial_edge_attrs);
    cat(out.temporal_edge_attrs, b.temporal_edge_attrs);
    cat(out.globals, b.globals);
    out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
    out.validate();
    return out;
}

}  // namespace stgnp::sim
