#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "stgnp/core/errors.hpp"

namespace stgnp::train {

inline constexpr double kPercentEps = 1e-8;

/// Linear-interpolation quantile of an unsorted sample.
inline double quantile(std::vector<double> v, double p) {
    if (v.empty()) throw contract_error("quantile: empty sample");
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= v.size()) return v.back();
    const double frac = h - static_cast<double>(lo);
    return v[lo] + (v[lo + 1] - v[lo]) * frac;
}

inline double interquartile_range(const std::vector<double>& v) {
    return quantile(v, 0.75) - quantile(v, 0.25);
}

struct MetricsRow {
    std::string method;
    std::string task;  // reconstruction | extrapolation
    std::string feature;
    double mse = 0, mse_iqr = 0;
    double mae = 0, mae_iqr = 0;
    double mspe_percent = 0, mape_percent = 0;
};

struct MetricsReport {
    std::vector<MetricsRow> rows;

    const MetricsRow& row(const std::string& method, const std::string& task,
                          const std::string& feature) const {
        for (const auto& r : rows)
            if (r.method == method && r.task == task && r.feature == feature) return r;
        throw contract_error("MetricsReport: no row " + method + "/" + task + "/" + feature);
    }
};

/// One feature's error accumulation. MSE/MAE are means of per-sample mean
/// errors with the IQR taken over those per-sample values; the percentage
/// errors are elementwise means with epsilon-guarded denominators. All final
/// sums run over sorted values, so reports are bit-exactly invariant to
/// sample and element ordering.
class MetricAccumulator {
public:
    explicit MetricAccumulator(std::size_t n_samples)
        : se_(n_samples, 0.0), ae_(n_samples, 0.0), count_(n_samples, 0) {}

    void add(std::size_t sample_slot, double truth, double predicted) {
        const double err = predicted - truth;
        se_[sample_slot] += err * err;
        ae_[sample_slot] += std::fabs(err);
        ++count_[sample_slot];
        mspe_terms_.push_back(err * err / (truth * truth + kPercentEps));
        mape_terms_.push_back(std::fabs(err) / (std::fabs(truth) + kPercentEps));
    }

    MetricsRow finalize(const std::string& method, const std::string& task,
                        const std::string& feature) const {
        if (mape_terms_.empty()) throw contract_error("MetricAccumulator: no observations");
        std::vector<double> sample_mse, sample_mae;
        for (std::size_t s = 0; s < se_.size(); ++s) {
            if (count_[s] == 0) continue;
            sample_mse.push_back(se_[s] / static_cast<double>(count_[s]));
            sample_mae.push_back(ae_[s] / static_cast<double>(count_[s]));
        }
        MetricsRow row;
        row.method = method;
        row.task = task;
        row.feature = feature;
        row.mse = sorted_mean(sample_mse);
        row.mae = sorted_mean(sample_mae);
        row.mse_iqr = interquartile_range(sample_mse);
        row.mae_iqr = interquartile_range(sample_mae);
        row.mspe_percent = 100.0 * sorted_mean(mspe_terms_);
        row.mape_percent = 100.0 * sorted_mean(mape_terms_);
        return row;
    }

private:
    static double sorted_mean(std::vector<double> v) {
        std::sort(v.begin(), v.end());
        double s = 0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    }

    std::vector<double> se_, ae_;
    std::vector<std::size_t> count_;
    std::vector<double> mspe_terms_, mape_terms_;
};

}  // namespace stgnp::train
