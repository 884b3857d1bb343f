#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "stgnp/core/errors.hpp"
#include "stgnp/train/metrics.hpp"
#include "stgnp/train/trainer.hpp"

namespace stgnp::io {

/// Shortest round-trip decimal representation; keeps CSV output byte-stable.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw format_error("cannot open " + path.string() + " for writing");
    return os;
}

inline void write_history_csv(const std::filesystem::path& path,
                              const std::vector<train::EpochRecord>& history) {
    auto os = open_out(path);
    os << "epoch,loss_total,loss_nll,loss_kl,loss_l2,loss_l1,val_mae,lr\n";
    for (const auto& r : history) {
        os << r.epoch << ',' << format_double(r.total) << ',' << format_double(r.nll) << ','
           << format_double(r.kl) << ',' << format_double(r.l2) << ',' << format_double(r.l1)
           << ',' << format_double(r.val_mae) << ',' << format_double(r.lr) << '\n';
    }
}

inline void write_metrics_csv(const std::filesystem::path& path,
                              const train::MetricsReport& report) {
    auto os = open_out(path);
    os << "method,task,feature,mse,mse_iqr,mae,mae_iqr,mspe_percent,mape_percent\n";
    for (const auto& r : report.rows) {
        os << r.method << ',' << r.task << ',' << r.feature << ',' << format_double(r.mse) << ','
           << format_double(r.mse_iqr) << ',' << format_double(r.mae) << ','
           << format_double(r.mae_iqr) << ',' << format_double(r.mspe_percent) << ','
           << format_double(r.mape_percent) << '\n';
    }
}

inline train::MetricsReport read_metrics_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw format_error("cannot open " + path.string());
    train::MetricsReport report;
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        train::MetricsRow row;
        std::vector<std::string> cells;
        std::string cur;
        for (char c : line) {
            if (c == ',') {
                cells.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        cells.push_back(cur);
        if (cells.size() != 9) throw format_error("metrics csv: bad row: " + line);
        row.method = cells[0];
        row.task = cells[1];
        row.feature = cells[2];
        row.mse = std::stod(cells[3]);
        row.mse_iqr = std::stod(cells[4]);
        row.mae = std::stod(cells[5]);
        row.mae_iqr = std::stod(cells[6]);
        row.mspe_percent = std::stod(cells[7]);
        row.mape_percent = std::stod(cells[8]);
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace stgnp::io
