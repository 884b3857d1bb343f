#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "stgnp/core/errors.hpp"
#include "stgnp/core/rng.hpp"

namespace stgnp::sim {

// ---------------------------------------------------------------------------
// Coupled pendulums
// ---------------------------------------------------------------------------

struct PendulumParams {
    double m1 = 1.0, m2 = 1.0;  // kg
    double l1 = 1.5, l2 = 1.5;  // m
    double k = 2.0;             // spring constant of the coupling
    double g = 9.81;            // m/s^2
};

/// State [theta1, theta1_dot, theta2, theta2_dot]. Guarded against the
/// cos(theta) singularity in the angular accelerations.
inline std::vector<double> pendulum_rhs(const std::vector<double>& s, const PendulumParams& p) {
    const double th1 = s[0], w1 = s[1], th2 = s[2], w2 = s[3];
    const double c1 = std::cos(th1), c2 = std::cos(th2);
    if (std::fabs(c1) < 1e-6 || std::fabs(c2) < 1e-6)
        throw rejection_error("pendulum_rhs: cos(theta) within 1e-6 of zero");
    const double a1 =
        (std::sin(th1) * (p.m1 * p.l1 * w1 * w1 - p.g - p.k * p.l1) + p.k * p.l2 * std::sin(th2)) /
        (p.m1 * p.l1 * c1);
    const double a2 =
        (std::sin(th2) * (p.m2 * p.l2 * w2 * w2 - p.g - p.k * p.l2) + p.k * p.l1 * std::sin(th1)) /
        (p.m2 * p.l2 * c2);
    return {w1, a1, w2, a2};
}

// ---------------------------------------------------------------------------
// Coupled Lorenz systems
// ---------------------------------------------------------------------------

struct LorenzParams {
    double sigma = 10.0, rho = 28.0, beta = 8.0 / 3.0;
    std::size_t n_systems = 3;
    double coupling_strength = 0.01;
    std::vector<double> coupling;  // [3n x 3n] row-major; empty = uncoupled
    // The y-equation is implemented as x*(rho - z); this flag restores the
    // conventional extra -y term.
    bool conventional_y = false;
};

/// State is the flat concatenation [x0,y0,z0, x1,y1,z1, ...].
inline std::vector<double> lorenz_rhs(const std::vector<double>& s, const LorenzParams& p) {
    const std::size_t n = p.n_systems;
    if (s.size() != 3 * n) throw contract_error("lorenz_rhs: state size != 3*n_systems");
    std::vector<double> d(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = s[3 * i], y = s[3 * i + 1], z = s[3 * i + 2];
        d[3 * i] = p.sigma * (y - x);
        d[3 * i + 1] = x * (p.rho - z) - (p.conventional_y ? y : 0.0);
        d[3 * i + 2] = x * y - p.beta * z;
    }
    if (!p.coupling.empty()) {
        if (p.coupling.size() != 9 * n * n)
            throw contract_error("lorenz_rhs: coupling matrix must be (3n)x(3n)");
        for (std::size_t r = 0; r < 3 * n; ++r) {
            double acc = 0.0;
            const double* row = p.coupling.data() + r * 3 * n;
            for (std::size_t c = 0; c < 3 * n; ++c) acc += row[c] * s[c];
            d[r] += p.coupling_strength * acc;
        }
    }
    return d;
}

// ---------------------------------------------------------------------------
// Kuramoto oscillators
// ---------------------------------------------------------------------------

struct KuramotoParams {
    std::size_t n = 10;
    std::vector<double> omega;           // natural frequencies, n entries
    std::vector<std::uint8_t> coupling;  // n x n symmetric, zero diagonal
};

inline std::vector<double> kuramoto_rhs(const std::vector<double>& phases,
                                        const KuramotoParams& p) {
    if (phases.size() != p.n) throw contract_error("kuramoto_rhs: phase count != n");
    std::vector<double> d(p.n);
    for (std::size_t i = 0; i < p.n; ++i) {
        double acc = p.omega[i];
        for (std::size_t j = 0; j < p.n; ++j)
            if (p.coupling[i * p.n + j]) acc += std::sin(phases[j] - phases[i]);
        d[i] = acc;
    }
    return d;
}

/// Preferential-attachment graph: complete seed graph on m nodes, then each
/// new node attaches to m distinct existing nodes with degree-proportional
/// probability. Returns a symmetric boolean matrix with zero diagonal.
inline std::vector<std::uint8_t> barabasi_albert(std::size_t n, std::size_t m, Rng& rng) {
    if (m >= n) throw contract_error("barabasi_albert: need m < n");
    std::vector<std::uint8_t> adj(n * n, 0);
    std::vector<std::size_t> degree(n, 0);
    auto link = [&](std::size_t a, std::size_t b) {
        adj[a * n + b] = adj[b * n + a] = 1;
        ++degree[a];
        ++degree[b];
    };
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b) link(a, b);
    for (std::size_t node = m; node < n; ++node) {
        std::vector<std::uint8_t> chosen(node, 0);
        std::size_t picked = 0;
        while (picked < m) {
            std::size_t total = 0;
            for (std::size_t j = 0; j < node; ++j)
                if (!chosen[j]) total += degree[j];
            std::size_t target = 0;
            if (total == 0) {
                // all remaining candidates have degree zero: uniform pick
                std::size_t r = rng.below(node - picked);
                for (std::size_t j = 0; j < node; ++j) {
                    if (chosen[j]) continue;
                    if (r == 0) {
                        target = j;
                        break;
                    }
                    --r;
                }
            } else {
                std::uint64_t r = rng.below(total);
                for (std::size_t j = 0; j < node; ++j) {
                    if (chosen[j]) continue;
                    if (r < degree[j]) {
                        target = j;
                        break;
                    }
                    r -= degree[j];
                }
            }
            chosen[target] = 1;
            link(node, target);
            ++picked;
        }
    }
    return adj;
}

inline std::vector<std::uint8_t> barabasi_albert(std::size_t n, std::size_t m, std::uint64_t seed) {
    Rng rng = Rng::substream(seed, 0xba);
    return barabasi_albert(n, m, rng);
}

}  // namespace stgnp::sim
