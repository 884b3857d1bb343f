#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "stgnp/core/errors.hpp"

namespace stgnp::sim {

using Rhs = std::function<std::vector<double>(const std::vector<double>&)>;

/// One classic 4-stage Runge-Kutta step.
inline std::vector<double> rk4_step(const Rhs& rhs, const std::vector<double>& x, double dt) {
    const std::size_t n = x.size();
    const std::vector<double> k1 = rhs(x);
    std::vector<double> tmp(n);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
    const std::vector<double> k2 = rhs(tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
    const std::vector<double> k3 = rhs(tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + dt * k3[i];
    const std::vector<double> k4 = rhs(tmp);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

/// Fixed-step RK4 trajectory including the initial state:
/// [n_steps+1 x dim].
inline std::vector<std::vector<double>> rk4_integrate(const Rhs& rhs, std::vector<double> x0,
                                                      double dt, std::size_t n_steps) {
    if (!(dt > 0.0)) throw contract_error("rk4_integrate: dt must be positive");
    std::vector<std::vector<double>> traj;
    traj.reserve(n_steps + 1);
    traj.push_back(x0);
    for (std::size_t step = 0; step < n_steps; ++step) {
        x0 = rk4_step(rhs, x0, dt);
        for (double v : x0) {
            if (!std::isfinite(v))
                throw divergence_error("rk4_integrate: non-finite state at step " +
                                       std::to_string(step + 1));
        }
        traj.push_back(x0);
    }
    return traj;
}

}  // namespace stgnp::sim
