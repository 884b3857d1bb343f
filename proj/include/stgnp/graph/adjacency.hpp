#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stgnp/core/errors.hpp"

namespace stgnp::graph {

struct Edge {
    int src;
    int dst;
};

/// Boolean spatial and temporal adjacency over V nodes. Spatial edges connect
/// nodes within one frame; temporal edges connect a node in one frame to a
/// node in the next. Edge enumeration is row-major over the boolean matrix
/// (source index major), and is the alignment contract for every edge
/// attribute array.
struct AdjacencySpec {
    std::size_t n_nodes = 0;
    std::vector<std::uint8_t> spatial;   // V*V, row-major, spatial[u*V+v] = edge u->v
    std::vector<std::uint8_t> temporal;  // V*V, temporal[u*V+v] = edge u@t -> v@t+1

    std::vector<Edge> spatial_edges() const { return enumerate(spatial); }
    std::vector<Edge> temporal_edges() const { return enumerate(temporal); }

    std::size_t n_spatial_edges() const { return count(spatial); }
    std::size_t n_temporal_edges() const { return count(temporal); }

    /// In-degree of each node under the given matrix.
    std::vector<int> in_degrees(const std::vector<std::uint8_t>& m) const {
        std::vector<int> deg(n_nodes, 0);
        for (std::size_t u = 0; u < n_nodes; ++u)
            for (std::size_t v = 0; v < n_nodes; ++v)
                if (m[u * n_nodes + v]) ++deg[v];
        return deg;
    }

private:
    std::vector<Edge> enumerate(const std::vector<std::uint8_t>& m) const {
        std::vector<Edge> edges;
        for (std::size_t u = 0; u < n_nodes; ++u)
            for (std::size_t v = 0; v < n_nodes; ++v)
                if (m[u * n_nodes + v]) edges.push_back({static_cast<int>(u), static_cast<int>(v)});
        return edges;
    }

    std::size_t count(const std::vector<std::uint8_t>& m) const {
        std::size_t n = 0;
        for (auto b : m) n += b ? 1 : 0;
        return n;
    }
};

enum class SpatialKind { full, custom };
enum class TemporalKind { diagonal, custom };

/// `full` builds the all-pairs spatial matrix without self-loops; `diagonal`
/// connects each node to itself across consecutive frames.
inline AdjacencySpec build_adjacency(SpatialKind kind, TemporalKind temporal_kind, std::size_t V,
                                     const std::vector<std::uint8_t>* spatial_matrix = nullptr,
                                     const std::vector<std::uint8_t>* temporal_matrix = nullptr) {
    if (V == 0) throw contract_error("build_adjacency: V must be positive");
    AdjacencySpec spec;
    spec.n_nodes = V;
    if (kind == SpatialKind::full) {
        spec.spatial.assign(V * V, 1);
        for (std::size_t v = 0; v < V; ++v) spec.spatial[v * V + v] = 0;
    } else {
        if (!spatial_matrix || spatial_matrix->size() != V * V)
            throw contract_error("build_adjacency: custom spatial matrix must be VxV");
        spec.spatial = *spatial_matrix;
        for (std::size_t v = 0; v < V; ++v)
            if (spec.spatial[v * V + v])
                throw contract_error("build_adjacency: spatial self-loop at node " +
                                     std::to_string(v));
    }
    if (temporal_kind == TemporalKind::diagonal) {
        spec.temporal.assign(V * V, 0);
        for (std::size_t v = 0; v < V; ++v) spec.temporal[v * V + v] = 1;
    } else {
        if (!temporal_matrix || temporal_matrix->size() != V * V)
            throw contract_error("build_adjacency: custom temporal matrix must be VxV");
        spec.temporal = *temporal_matrix;
    }
    return spec;
}

}  // namespace stgnp::graph
