#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <vector>

#include "stgnp/core/errors.hpp"

namespace stgnp::bench {

// ---------------------------------------------------------------------------
// Last observation carried forward
// ---------------------------------------------------------------------------

inline std::vector<double> locf_forecast(const std::vector<double>& series, std::size_t horizon) {
    if (series.empty()) throw contract_error("locf_forecast: empty series");
    return std::vector<double>(horizon, series.back());
}

// ---------------------------------------------------------------------------
// AR(1) by least squares
// ---------------------------------------------------------------------------

struct Ar1Fit {
    double phi = 0.0;
    double intercept = 0.0;
};

inline Ar1Fit ar1_fit(const std::vector<double>& series) {
    if (series.size() < 3) throw contract_error("ar1_fit: need at least 3 observations");
    const std::size_t n = series.size() - 1;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += series[i];
        my += series[i + 1];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (series[i] - mx) * (series[i] - mx);
        sxy += (series[i] - mx) * (series[i + 1] - my);
    }
    Ar1Fit fit;
    if (sxx < 1e-12) {
        fit.phi = 0.0;
        fit.intercept = my;
    } else {
        fit.phi = sxy / sxx;
        fit.intercept = my - fit.phi * mx;
    }
    return fit;
}

inline std::vector<double> ar1_forecast(const Ar1Fit& fit, double last_value,
                                        std::size_t horizon) {
    std::vector<double> out(horizon);
    double x = last_value;
    for (std::size_t h = 0; h < horizon; ++h) {
        x = fit.intercept + fit.phi * x;
        out[h] = x;
    }
    return out;
}

inline std::vector<double> ar1_fit_forecast(const std::vector<double>& series,
                                            std::size_t horizon, Ar1Fit* fit_out = nullptr) {
    const Ar1Fit fit = ar1_fit(series);
    if (fit_out) *fit_out = fit;
    return ar1_forecast(fit, series.back(), horizon);
}

// ---------------------------------------------------------------------------
// ARIMA by conditional sum of squares with AIC order selection
// ---------------------------------------------------------------------------

struct ArimaOrder {
    int p = 3, d = 1, q = 2;  // used both as an order and as grid bounds
};

struct ArimaFit {
    ArimaOrder order{0, 0, 0};
    std::vector<double> ar;  // phi_1..p
    std::vector<double> ma;  // theta_1..q
    double intercept = 0.0;  // fitted only when d == 0
    double variance = 0.0;   // SSE / m
    double aic = 0.0;        // 2k + m*log(SSE/m)
    double bic = 0.0;        // k*log(m) + m*log(SSE/m)
    bool fallback = false;
};

/// Order-selection criterion. AIC is reported for every fit either way; BIC
/// is the default selector because plain AIC over the full grid over-selects
/// superset orders (consistency vs efficiency).
enum class ArimaCriterion { bic, aic };

namespace detail {

inline std::vector<double> difference(const std::vector<double>& x, int d) {
    std::vector<double> y = x;
    for (int i = 0; i < d; ++i) {
        std::vector<double> next(y.size() - 1);
        for (std::size_t t = 0; t + 1 < y.size(); ++t) next[t] = y[t + 1] - y[t];
        y = std::move(next);
    }
    return y;
}

/// Conditional sum of squared innovations; presample innovations are zero.
/// `start` conditions on a fixed number of initial values so that candidates
/// of different orders score the same observations (comparable AICs).
inline double css(const std::vector<double>& y, int p, int q, double c,
                  const std::vector<double>& phi, const std::vector<double>& theta,
                  std::vector<double>* innovations = nullptr, int start = -1) {
    const std::size_t n = y.size();
    const std::size_t s0 = static_cast<std::size_t>(start < p ? p : start);
    std::vector<double> e(n, 0.0);
    double sse = 0.0;
    for (std::size_t t = s0; t < n; ++t) {
        double pred = c;
        for (int i = 0; i < p; ++i) pred += phi[static_cast<std::size_t>(i)] * y[t - 1 - i];
        for (int j = 0; j < q; ++j)
            if (t >= static_cast<std::size_t>(j + 1)) pred += theta[static_cast<std::size_t>(j)] * e[t - 1 - j];
        e[t] = y[t] - pred;
        sse += e[t] * e[t];
    }
    if (innovations) *innovations = e;
    return sse;
}

/// Least-squares AR(p) (+ optional intercept) via normal equations over
/// observations t >= start.
inline bool ols_ar(const std::vector<double>& y, int p, bool with_intercept, double& c,
                   std::vector<double>& phi, int start = -1) {
    const int k = p + (with_intercept ? 1 : 0);
    c = 0.0;
    phi.assign(static_cast<std::size_t>(p), 0.0);
    if (k == 0) return true;
    const std::size_t n = y.size();
    const std::size_t s0 = static_cast<std::size_t>(start < p ? p : start);
    if (n <= s0) return false;
    // design row: [1?, y_{t-1}, ..., y_{t-p}] for t in [start, n)
    std::vector<double> ata(static_cast<std::size_t>(k * k), 0.0);
    std::vector<double> atb(static_cast<std::size_t>(k), 0.0);
    std::vector<double> row(static_cast<std::size_t>(k));
    for (std::size_t t = s0; t < n; ++t) {
        int idx = 0;
        if (with_intercept) row[static_cast<std::size_t>(idx++)] = 1.0;
        for (int i = 0; i < p; ++i) row[static_cast<std::size_t>(idx++)] = y[t - 1 - i];
        for (int a = 0; a < k; ++a) {
            for (int b = 0; b < k; ++b)
                ata[static_cast<std::size_t>(a * k + b)] +=
                    row[static_cast<std::size_t>(a)] * row[static_cast<std::size_t>(b)];
            atb[static_cast<std::size_t>(a)] += row[static_cast<std::size_t>(a)] * y[t];
        }
    }
    // Gaussian elimination with partial pivoting.
    std::vector<double> m = ata, b = atb;
    for (int col = 0; col < k; ++col) {
        int piv = col;
        for (int r = col + 1; r < k; ++r)
            if (std::fabs(m[static_cast<std::size_t>(r * k + col)]) >
                std::fabs(m[static_cast<std::size_t>(piv * k + col)]))
                piv = r;
        if (std::fabs(m[static_cast<std::size_t>(piv * k + col)]) < 1e-12) return false;
        if (piv != col) {
            for (int cc = 0; cc < k; ++cc)
                std::swap(m[static_cast<std::size_t>(col * k + cc)],
                          m[static_cast<std::size_t>(piv * k + cc)]);
            std::swap(b[static_cast<std::size_t>(col)], b[static_cast<std::size_t>(piv)]);
        }
        for (int r = col + 1; r < k; ++r) {
            const double f = m[static_cast<std::size_t>(r * k + col)] /
                             m[static_cast<std::size_t>(col * k + col)];
            for (int cc = col; cc < k; ++cc)
                m[static_cast<std::size_t>(r * k + cc)] -=
                    f * m[static_cast<std::size_t>(col * k + cc)];
            b[static_cast<std::size_t>(r)] -= f * b[static_cast<std::size_t>(col)];
        }
    }
    std::vector<double> sol(static_cast<std::size_t>(k));
    for (int r = k - 1; r >= 0; --r) {
        double acc = b[static_cast<std::size_t>(r)];
        for (int cc = r + 1; cc < k; ++cc)
            acc -= m[static_cast<std::size_t>(r * k + cc)] * sol[static_cast<std::size_t>(cc)];
        sol[static_cast<std::size_t>(r)] = acc / m[static_cast<std::size_t>(r * k + r)];
    }
    int idx = 0;
    if (with_intercept) c = sol[static_cast<std::size_t>(idx++)];
    for (int i = 0; i < p; ++i) phi[static_cast<std::size_t>(i)] = sol[static_cast<std::size_t>(idx++)];
    return true;
}

/// Largest root magnitude of w^deg + a1 w^{deg-1} + ... + a_deg via
/// Durand-Kerner; used for stationarity/invertibility screening.
inline double max_root_magnitude(const std::vector<double>& coeffs) {
    const std::size_t deg = coeffs.size();
    if (deg == 0) return 0.0;
    std::vector<std::complex<double>> roots(deg);
    for (std::size_t i = 0; i < deg; ++i)
        roots[i] = std::polar(0.7, 1.1 + 2.0 * 3.141592653589793 * static_cast<double>(i) /
                                       static_cast<double>(deg));
    auto poly = [&](std::complex<double> w) {
        std::complex<double> v = 1.0;
        for (std::size_t i = 0; i < deg; ++i) v = v * w + coeffs[i];
        return v;
    };
    for (int iter = 0; iter < 100; ++iter) {
        for (std::size_t i = 0; i < deg; ++i) {
            std::complex<double> denom = 1.0;
            for (std::size_t j = 0; j < deg; ++j)
                if (j != i) denom *= roots[i] - roots[j];
            roots[i] -= poly(roots[i]) / denom;
        }
    }
    double mx = 0.0;
    for (const auto& r : roots) mx = std::max(mx, std::abs(r));
    return mx;
}

/// Nelder-Mead minimization; good enough for the <=6-dimensional CSS
/// objectives here.
inline std::vector<double> nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x0, int max_iter = 600) {
    const std::size_t n = x0.size();
    if (n == 0) return x0;
    std::vector<std::vector<double>> sim(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i) sim[i + 1][i] += 0.1;
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i <= n; ++i) fv[i] = f(sim[i]);

    for (int iter = 0; iter < max_iter; ++iter) {
        // order ascending by value
        std::vector<std::size_t> idx(n + 1);
        for (std::size_t i = 0; i <= n; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return fv[a] < fv[b] || (fv[a] == fv[b] && a < b);
        });
        std::vector<std::vector<double>> s2(n + 1);
        std::vector<double> f2(n + 1);
        for (std::size_t i = 0; i <= n; ++i) {
            s2[i] = sim[idx[i]];
            f2[i] = fv[idx[i]];
        }
        sim = std::move(s2);
        fv = std::move(f2);
        if (std::fabs(fv[n] - fv[0]) <= 1e-12 * (std::fabs(fv[0]) + 1e-12)) break;

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < n; ++c) centroid[c] += sim[i][c] / static_cast<double>(n);
        auto blend = [&](double coeff) {
            std::vector<double> x(n);
            for (std::size_t c = 0; c < n; ++c)
                x[c] = centroid[c] + coeff * (sim[n][c] - centroid[c]);
            return x;
        };
        std::vector<double> xr = blend(-1.0);
        const double fr = f(xr);
        if (fr < fv[0]) {
            std::vector<double> xe = blend(-2.0);
            const double fe = f(xe);
            if (fe < fr) {
                sim[n] = xe;
                fv[n] = fe;
            } else {
                sim[n] = xr;
                fv[n] = fr;
            }
        } else if (fr < fv[n - 1]) {
            sim[n] = xr;
            fv[n] = fr;
        } else {
            std::vector<double> xc = blend(fr < fv[n] ? -0.5 : 0.5);
            const double fc = f(xc);
            if (fc < std::min(fr, fv[n])) {
                sim[n] = xc;
                fv[n] = fc;
            } else {
                for (std::size_t i = 1; i <= n; ++i) {
                    for (std::size_t c = 0; c < n; ++c)
                        sim[i][c] = sim[0][c] + 0.5 * (sim[i][c] - sim[0][c]);
                    fv[i] = f(sim[i]);
                }
            }
        }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i <= n; ++i)
        if (fv[i] < fv[best]) best = i;
    return sim[best];
}

}  // namespace detail

/// Fit one (p,d,q) candidate by CSS. Returns false when the fit is unusable
/// (singular regression, explosive AR part, non-invertible MA part).
/// `css_start` conditions the innovation window (default: p); the grid search
/// passes the p bound so every candidate scores the same observations.
inline bool arima_fit_order(const std::vector<double>& series, int p, int d, int q, ArimaFit& out,
                            int css_start = -1) {
    const std::vector<double> y = detail::difference(series, d);
    if (y.size() <= static_cast<std::size_t>(2 * (p + q) + 2)) return false;
    const bool with_c = d == 0;
    const int start = css_start < p ? p : css_start;

    double c = 0.0;
    std::vector<double> phi;
    if (!detail::ols_ar(y, p, with_c, c, phi, start)) return false;
    std::vector<double> theta(static_cast<std::size_t>(q), 0.0);

    if (q > 0) {
        // polish (c, phi, theta) jointly on the CSS objective
        std::vector<double> x0;
        if (with_c) x0.push_back(c);
        x0.insert(x0.end(), phi.begin(), phi.end());
        x0.insert(x0.end(), theta.begin(), theta.end());
        auto unpack = [&](const std::vector<double>& x, double& cc, std::vector<double>& ph,
                          std::vector<double>& th) {
            std::size_t i = 0;
            cc = with_c ? x[i++] : 0.0;
            ph.assign(x.begin() + static_cast<long>(i), x.begin() + static_cast<long>(i + p));
            i += static_cast<std::size_t>(p);
            th.assign(x.begin() + static_cast<long>(i), x.begin() + static_cast<long>(i + q));
        };
        auto objective = [&](const std::vector<double>& x) {
            double cc;
            std::vector<double> ph, th;
            unpack(x, cc, ph, th);
            const double sse = detail::css(y, p, q, cc, ph, th, nullptr, start);
            return std::isfinite(sse) ? sse : 1e300;
        };
        const std::vector<double> best = detail::nelder_mead(objective, x0);
        unpack(best, c, phi, theta);
    }

    const double sse = detail::css(y, p, q, c, phi, theta, nullptr, start);
    if (!std::isfinite(sse)) return false;
    if (p > 0) {
        std::vector<double> comp(phi.size());
        for (std::size_t i = 0; i < phi.size(); ++i) comp[i] = -phi[i];
        if (detail::max_root_magnitude(comp) >= 0.999) return false;
    }
    if (q > 0 && detail::max_root_magnitude(theta) >= 0.999) return false;

    const double m = static_cast<double>(y.size()) - static_cast<double>(start);
    const int k = p + q + (with_c ? 1 : 0);
    out.order = {p, d, q};
    out.ar = phi;
    out.ma = theta;
    out.intercept = c;
    out.variance = std::max(sse, 1e-300) / m;
    const double fit_term = m * std::log(std::max(sse, 1e-300) / m);
    out.aic = 2.0 * static_cast<double>(k) + fit_term;
    out.bic = static_cast<double>(k) * std::log(m) + fit_term;
    out.fallback = false;
    return true;
}

/// Grid search over all admissible orders; the winner minimizes the selection
/// criterion. If no candidate converges the fit degrades to (0,0,0) plus the
/// series mean.
inline ArimaFit arima_fit(const std::vector<double>& series, const ArimaOrder& bounds = {3, 1, 2},
                          ArimaCriterion criterion = ArimaCriterion::bic) {
    if (series.size() <= static_cast<std::size_t>(2 * (bounds.p + bounds.q)))
        throw contract_error("arima_fit: series too short for the order bounds");
    auto score = [criterion](const ArimaFit& f) {
        return criterion == ArimaCriterion::bic ? f.bic : f.aic;
    };
    ArimaFit best;
    bool have = false;
    for (int d = 0; d <= bounds.d; ++d) {
        for (int p = 0; p <= bounds.p; ++p) {
            for (int q = 0; q <= bounds.q; ++q) {
                ArimaFit cand;
                if (!arima_fit_order(series, p, d, q, cand, bounds.p)) continue;
                if (!have || score(cand) < score(best)) {
                    best = cand;
                    have = true;
                }
            }
        }
    }
    if (!have) {
        double mean = 0;
        for (double v : series) mean += v;
        mean /= static_cast<double>(series.size());
        best.order = {0, 0, 0};
        best.ar.clear();
        best.ma.clear();
        best.intercept = mean;
        double sse = 0;
        for (double v : series) sse += (v - mean) * (v - mean);
        best.variance = sse / static_cast<double>(series.size());
        best.aic = std::numeric_limits<double>::infinity();
        best.bic = std::numeric_limits<double>::infinity();
        best.fallback = true;
    }
    return best;
}

/// Iterated expectation forecast: future innovations are zero, differencing
/// is inverted against the last observed level.
inline std::vector<double> arima_forecast(const ArimaFit& fit, const std::vector<double>& series,
                                          std::size_t horizon) {
    const int p = fit.order.p, d = fit.order.d, q = fit.order.q;
    std::vector<double> y = detail::difference(series, d);
    std::vector<double> innov;
    detail::css(y, p, q, fit.intercept, fit.ar, fit.ma, &innov);

    std::vector<double> extended = y;
    std::vector<double> e = innov;
    std::vector<double> fc(horizon);
    for (std::size_t h = 0; h < horizon; ++h) {
        const std::size_t t = extended.size();
        double pred = fit.intercept;
        for (int i = 0; i < p; ++i)
            if (t >= static_cast<std::size_t>(i + 1))
                pred += fit.ar[static_cast<std::size_t>(i)] * extended[t - 1 - i];
        for (int j = 0; j < q; ++j)
            if (t >= static_cast<std::size_t>(j + 1))
                pred += fit.ma[static_cast<std::size_t>(j)] * e[t - 1 - j];
        extended.push_back(pred);
        e.push_back(0.0);
        fc[h] = pred;
    }
    if (d == 1) {
        double level = series.back();
        for (std::size_t h = 0; h < horizon; ++h) {
            level += fc[h];
            fc[h] = level;
        }
    }
    return fc;
}

}  // namespace stgnp::bench
