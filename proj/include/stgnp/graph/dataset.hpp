#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "stgnp/core/array.hpp"
#include "stgnp/core/errors.hpp"
#include "stgnp/graph/adjacency.hpp"
#include "stgnp/io/binary.hpp"

namespace stgnp::graph {

/// Per-sample node-feature time series over a multiplex graph, with edge
/// attributes, optional globals and labels, and a separately stored
/// extrapolation horizon as ground truth.
struct MultiplexDataset {
    std::string system;
    std::vector<double> times;        // training-window grid, strictly increasing
    std::vector<double> extra_times;  // horizon beyond the window (may be empty)

    Array node_features;        // [S, F, V, K]
    Array extra_node_features;  // [S, Fx, V, K]
    Array spatial_edge_attrs;   // [S, F, Es, k_es_obs]
    Array temporal_edge_attrs;  // [S, F-1, Et, k_et_obs]
    Array globals;              // [S, G], G may be 0

    std::vector<std::int64_t> labels;  // empty = absent
    AdjacencySpec adjacency;
    std::vector<std::string> feature_names;
    std::vector<std::string> feature_units;

    std::size_t n_samples() const { return node_features.dim(0); }
    std::size_t n_frames() const { return node_features.dim(1); }
    std::size_t n_nodes() const { return node_features.dim(2); }
    std::size_t n_node_features() const { return node_features.dim(3); }
    std::size_t n_extra_frames() const {
        return extra_node_features.ndim() == 4 ? extra_node_features.dim(0) == 0 ? 0
                                                                                 : extra_node_features.dim(1)
                                               : 0;
    }
    std::size_t n_globals() const { return globals.ndim() == 2 ? globals.dim(1) : 0; }

    double node_value(std::size_t s, std::size_t f, std::size_t v, std::size_t k) const {
        const std::size_t V = n_nodes(), K = n_node_features(), F = n_frames();
        return node_features[((s * F + f) * V + v) * K + k];
    }

    double extra_value(std::size_t s, std::size_t f, std::size_t v, std::size_t k) const {
        const std::size_t V = n_nodes(), K = n_node_features(), Fx = extra_node_features.dim(1);
        return extra_node_features[((s * Fx + f) * V + v) * K + k];
    }

    void validate() const {
        if (node_features.ndim() != 4) throw format_error("dataset: node_features must be rank 4");
        if (times.size() != n_frames())
            throw format_error("dataset: times length " + std::to_string(times.size()) +
                               " != frame count " + std::to_string(n_frames()));
        for (std::size_t i = 1; i < times.size(); ++i)
            if (!(times[i] > times[i - 1]))
                throw format_error("dataset: times must be strictly increasing");
        if (adjacency.n_nodes != n_nodes()) throw format_error("dataset: adjacency size != V");
        if (spatial_edge_attrs.ndim() != 4 ||
            spatial_edge_attrs.dim(2) != adjacency.n_spatial_edges())
            throw format_error("dataset: spatial_edge_attrs misaligned with adjacency enumeration");
        if (temporal_edge_attrs.ndim() != 4 ||
            temporal_edge_attrs.dim(2) != adjacency.n_temporal_edges())
            throw format_error("dataset: temporal_edge_attrs misaligned with adjacency enumeration");
        if (temporal_edge_attrs.dim(1) + 1 != n_frames())
            throw format_error("dataset: temporal edge attrs need exactly frames-1 steps");
        if (!labels.empty() && labels.size() != n_samples())
            throw format_error("dataset: label count != sample count");
        if (extra_node_features.dim(0) != 0 && extra_node_features.dim(1) != extra_times.size())
            throw format_error("dataset: extra_times length != extrapolation frame count");
        if (feature_names.size() != n_node_features())
            throw format_error("dataset: feature_names length != K");
    }
};

namespace detail {

inline std::string join_doubles(const std::vector<double>& v) {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
    return os.str();
}

inline std::vector<double> parse_doubles(const std::string& s) {
    std::istringstream is(s);
    std::vector<double> v;
    double x;
    while (is >> x) v.push_back(x);
    return v;
}

inline std::string join_names(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
    return out;
}

inline std::vector<std::string> split_names(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty() || !out.empty()) out.push_back(cur);
    return out;
}

inline std::string adjacency_text(const std::vector<std::uint8_t>& m, std::size_t V) {
    std::string out;
    for (std::size_t u = 0; u < V; ++u) {
        if (u) out += " ; ";
        for (std::size_t v = 0; v < V; ++v) {
            if (v) out += " ";
            out += m[u * V + v] ? '1' : '0';
        }
    }
    return out;
}

inline std::vector<std::uint8_t> parse_adjacency(const std::string& text, std::size_t V,
                                                 const std::string& field) {
    std::vector<std::uint8_t> m;
    std::size_t row_len = 0, rows = 0;
    std::size_t cur_row = 0;
    std::istringstream is(text);
    std::string tok;
    while (is >> tok) {
        if (tok == ";") {
            if (rows == 0) row_len = cur_row;
            if (cur_row != row_len)
                throw format_error("dataset manifest: ragged rows in " + field);
            ++rows;
            cur_row = 0;
        } else {
            m.push_back(tok == "1" ? 1 : 0);
            ++cur_row;
        }
    }
    if (cur_row > 0) {
        if (rows == 0) row_len = cur_row;
        if (cur_row != row_len) throw format_error("dataset manifest: ragged rows in " + field);
        ++rows;
    }
    if (rows != V || row_len != V)
        throw format_error("dataset manifest: " + field + " is " + std::to_string(rows) + "x" +
                           std::to_string(row_len) + " but n_nodes = " + std::to_string(V));
    return m;
}

inline std::vector<std::size_t> parse_shape(const std::string& s) {
    std::istringstream is(s);
    std::vector<std::size_t> v;
    std::size_t x;
    while (is >> x) v.push_back(x);
    return v;
}

inline std::string shape_text(const Array& a) {
    std::string out;
    for (std::size_t i = 0; i < a.ndim(); ++i)
        out += (i ? " " : "") + std::to_string(a.shape()[i]);
    return out;
}

}  // namespace detail

/// Directory layout: manifest.txt plus one binary array file per field.
inline void save_dataset(const MultiplexDataset& ds, const std::filesystem::path& dir) {
    ds.validate();
    std::filesystem::create_directories(dir);
    std::ofstream man(dir / "manifest.txt");
    if (!man) throw format_error("cannot write " + (dir / "manifest.txt").string());
    const std::size_t V = ds.adjacency.n_nodes;
    man << "format = stgnp-dataset-1\n";
    man << "system = " << ds.system << "\n";
    man << "n_samples = " << ds.n_samples() << "\n";
    man << "n_nodes = " << V << "\n";
    man << "feature_names = " << detail::join_names(ds.feature_names) << "\n";
    man << "feature_units = " << detail::join_names(ds.feature_units) << "\n";
    man << "times = " << detail::join_doubles(ds.times) << "\n";
    man << "extra_times = " << detail::join_doubles(ds.extra_times) << "\n";
    man << "spatial_adjacency = " << detail::adjacency_text(ds.adjacency.spatial, V) << "\n";
    man << "temporal_adjacency = " << detail::adjacency_text(ds.adjacency.temporal, V) << "\n";
    man << "node_features_shape = " << detail::shape_text(ds.node_features) << "\n";
    man << "extra_node_features_shape = " << detail::shape_text(ds.extra_node_features) << "\n";
    man << "spatial_edge_attrs_shape = " << detail::shape_text(ds.spatial_edge_attrs) << "\n";
    man << "temporal_edge_attrs_shape = " << detail::shape_text(ds.temporal_edge_attrs) << "\n";
    man << "globals_shape = " << detail::shape_text(ds.globals) << "\n";
    man << "has_labels = " << (ds.labels.empty() ? 0 : 1) << "\n";
    if (!man) throw format_error("manifest write failed");

    io::save_array(dir / "node_features.bin", ds.node_features);
    io::save_array(dir / "extra_node_features.bin", ds.extra_node_features);
    io::save_array(dir / "spatial_edge_attrs.bin", ds.spatial_edge_attrs);
    io::save_array(dir / "temporal_edge_attrs.bin", ds.temporal_edge_attrs);
    io::save_array(dir / "globals.bin", ds.globals);
    if (!ds.labels.empty()) io::save_i64(dir / "labels.bin", ds.labels);
}

inline MultiplexDataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream man(dir / "manifest.txt");
    if (!man) throw format_error("cannot open " + (dir / "manifest.txt").string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(man, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw format_error("dataset manifest: bad line: " + line);
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        while (!key.empty() && key.back() == ' ') key.pop_back();
        while (!value.empty() && value.front() == ' ') value.erase(value.begin());
        kv[key] = value;
    }
    auto need = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw format_error("dataset manifest: missing field '" + key + "'");
        return it->second;
    };
    if (need("format") != "stgnp-dataset-1")
        throw format_error("dataset manifest: unsupported format '" + kv["format"] + "'");

    MultiplexDataset ds;
    ds.system = need("system");
    const std::size_t V = std::stoul(need("n_nodes"));
    ds.feature_names = detail::split_names(need("feature_names"));
    ds.feature_units = detail::split_names(need("feature_units"));
    ds.times = detail::parse_doubles(need("times"));
    ds.extra_times = detail::parse_doubles(need("extra_times"));
    ds.adjacency.n_nodes = V;
    ds.adjacency.spatial = detail::parse_adjacency(need("spatial_adjacency"), V, "spatial_adjacency");
    ds.adjacency.temporal =
        detail::parse_adjacency(need("temporal_adjacency"), V, "temporal_adjacency");

    auto load_field = [&](const std::string& field) {
        Array a = io::load_array(dir / (field + ".bin"));
        const auto want = detail::parse_shape(need(field + "_shape"));
        if (a.shape() != want)
            throw format_error("dataset: file shape of " + field + " " + a.shape_string() +
                               " does not match manifest " + Array::shape_string(want));
        return a;
    };
    ds.node_features = load_field("node_features");
    ds.extra_node_features = load_field("extra_node_features");
    ds.spatial_edge_attrs = load_field("spatial_edge_attrs");
    ds.temporal_edge_attrs = load_field("temporal_edge_attrs");
    ds.globals = load_field("globals");
    if (need("has_labels") == "1") ds.labels = io::load_i64(dir / "labels.bin");
    ds.validate();
    return ds;
}

}  // namespace stgnp::graph
