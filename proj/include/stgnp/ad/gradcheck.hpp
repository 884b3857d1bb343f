#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "stgnp/core/array.hpp"
#include "stgnp/core/errors.hpp"

namespace stgnp::ad {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double tolerance = 0.0;
    bool pass = false;
};

/// Compares an analytic gradient against central finite differences of a
/// scalar function. `f` maps a flat point to the loss value; `analytic` is the
/// gradient produced elsewhere (the tape). Relative error is normalized by
/// max(|fd|, |analytic|, 1e-8).
inline GradCheckReport finite_diff_check(const std::function<double(const std::vector<double>&)>& f,
                                         std::vector<double> point,
                                         const std::vector<double>& analytic, double step,
                                         double tolerance) {
    if (step <= 0.0) throw contract_error("finite_diff_check: step must be positive");
    if (point.size() != analytic.size())
        throw contract_error("finite_diff_check: gradient size does not match point size");
    GradCheckReport rep;
    rep.tolerance = tolerance;
    for (std::size_t i = 0; i < point.size(); ++i) {
        const double saved = point[i];
        point[i] = saved + step;
        const double up = f(point);
        point[i] = saved - step;
        const double down = f(point);
        point[i] = saved;
        const double fd = (up - down) / (2.0 * step);
        const double denom = std::max({std::fabs(fd), std::fabs(analytic[i]), 1e-8});
        const double rel = std::fabs(fd - analytic[i]) / denom;
        if (rel > rep.max_rel_error) {
            rep.max_rel_error = rel;
            rep.worst_index = i;
        }
    }
    rep.pass = rep.max_rel_error <= tolerance;
    return rep;
}

}  // namespace stgnp::ad
