#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "stgnp/ad/mlp.hpp"
#include "stgnp/ad/ops.hpp"
#include "stgnp/graph/adjacency.hpp"
#include "stgnp/model/config.hpp"

namespace stgnp::model {

/// Batched index plan for one adjacency and batch size. Node rows are laid
/// out sample-major ([b*V + v]), edge rows likewise ([b*E + e], enumeration
/// order from AdjacencySpec).
struct GraphPlan {
    std::size_t batch = 0, n_nodes = 0, n_sp = 0, n_tp = 0;
    ad::IndexPtr sp_src, sp_dst;  // into node rows
    ad::IndexPtr tp_src, tp_dst;
    std::shared_ptr<const std::vector<double>> sp_inv_deg;  // 1/in_degree(dst)
    std::shared_ptr<const std::vector<double>> tp_inv_deg;

    static GraphPlan build(const graph::AdjacencySpec& adj, std::size_t batch) {
        GraphPlan plan;
        plan.batch = batch;
        plan.n_nodes = adj.n_nodes;
        const auto sp_edges = adj.spatial_edges();
        const auto tp_edges = adj.temporal_edges();
        plan.n_sp = sp_edges.size();
        plan.n_tp = tp_edges.size();
        const auto sp_deg = adj.in_degrees(adj.spatial);
        const auto tp_deg = adj.in_degrees(adj.temporal);

        auto expand = [&](const std::vector<graph::Edge>& edges, const std::vector<int>& deg,
                          ad::IndexPtr& src, ad::IndexPtr& dst,
                          std::shared_ptr<const std::vector<double>>& inv) {
            std::vector<int> s, d;
            std::vector<double> w;
            s.reserve(batch * edges.size());
            d.reserve(batch * edges.size());
            w.reserve(batch * edges.size());
            for (std::size_t b = 0; b < batch; ++b) {
                for (const auto& e : edges) {
                    s.push_back(static_cast<int>(b * adj.n_nodes) + e.src);
                    d.push_back(static_cast<int>(b * adj.n_nodes) + e.dst);
                    w.push_back(1.0 / static_cast<double>(deg[static_cast<std::size_t>(e.dst)]));
                }
            }
            src = ad::make_indices(std::move(s));
            dst = ad::make_indices(std::move(d));
            inv = std::make_shared<const std::vector<double>>(std::move(w));
        };
        expand(sp_edges, sp_deg, plan.sp_src, plan.sp_dst, plan.sp_inv_deg);
        expand(tp_edges, tp_deg, plan.tp_src, plan.tp_dst, plan.tp_inv_deg);
        return plan;
    }

    std::size_t node_rows() const { return batch * n_nodes; }
    std::size_t sp_rows() const { return batch * n_sp; }
    std::size_t tp_rows() const { return batch * n_tp; }
};

/// Evolving per-batch state: node latents and controls, edge weights, and the
/// previous committed-frame latent buffer the temporal stream reads from.
struct ModelState {
    ad::Var l;       // [B*V x latent]
    ad::Var d;       // [B*V x control]
    ad::Var z_s;     // [B*Es x k_es]
    ad::Var z_t;     // [B*Et x k_et]
    ad::Var prev_l;  // [B*V x latent]
};

/// Channel-summed edge weights: [rows x k] -> [rows x 1].
inline ad::Var sum_edge_channels(ad::Tape& t, ad::Var z) {
    const std::size_t k = t.val(z).cols();
    return ad::matmul(t, z, t.constant(Array::full({k, 1}, 1.0)));
}

/// Neighborhood mean of z-weighted source latents, normalized by in-degree.
inline ad::Var spatial_message(ad::Tape& t, ad::Var l, ad::Var z_s, const GraphPlan& plan) {
    ad::Var w = sum_edge_channels(t, z_s);
    return ad::edge_message(t, l, w, plan.sp_src, plan.sp_dst, plan.sp_inv_deg, plan.node_rows());
}

/// Same aggregation over temporal edges, reading the previous-frame buffer.
inline ad::Var temporal_message(ad::Tape& t, ad::Var prev_l, ad::Var z_t, const GraphPlan& plan) {
    ad::Var w = sum_edge_channels(t, z_t);
    return ad::edge_message(t, prev_l, w, plan.tp_src, plan.tp_dst, plan.tp_inv_deg,
                            plan.node_rows());
}

struct DynamicsNets {
    const ad::Mlp& f_theta;
    const ad::Mlp& f_delta;
    const ad::Mlp& f_s;
    const ad::Mlp& f_t;
};

inline void check_finite_nodes(ad::Tape& t, ad::Var v, std::size_t n_nodes, const char* what) {
    const Array& a = t.val(v);
    for (std::size_t i = 0; i < a.numel(); ++i) {
        if (!std::isfinite(a[i])) {
            const std::size_t node = (i / a.cols()) % n_nodes;
            throw divergence_error(std::string(what) + ": non-finite value at node " +
                                   std::to_string(node));
        }
    }
}

/// Structure-aware latent derivative: spatial derivative l - m_s, temporal
/// derivative m_t - l, combined with state and control by a shared-weight
/// network across nodes. The temporal message is precomputed per frame since
/// the buffer and edge weights are held constant within an interval.
inline ad::Var vector_field(ad::Tape& t, const ad::TapeBinding& bind, const DynamicsNets& nets,
                            const GraphPlan& plan, ad::Var l, ad::Var d, ad::Var z_s,
                            ad::Var m_t) {
    ad::Var m_s = spatial_message(t, l, z_s, plan);
    ad::Var ldot_s = ad::sub(t, l, m_s);
    ad::Var ldot_t = ad::sub(t, m_t, l);
    ad::Var h = ad::concat(t, {l, ldot_s, ldot_t, d});
    ad::Var out = nets.f_theta.forward(t, bind, h);
    check_finite_nodes(t, out, plan.n_nodes, "vector_field");
    return out;
}

/// One frame interval: RK4 on the latent with everything else frozen, then
/// the autoregressive commits (buffer, control, edge weights). The commit
/// nets are residual, so zero-initialized final layers leave state unchanged.
inline ModelState advance_frame(ad::Tape& t, const ad::TapeBinding& bind, const DynamicsNets& nets,
                                const GraphPlan& plan, const ModelState& state, double t_from,
                                double t_to, std::size_t substeps) {
    if (!(t_to > t_from)) throw contract_error("advance_frame: need t_to > t_from");
    ad::Var m_t = temporal_message(t, state.prev_l, state.z_t, plan);

    ad::Var l = state.l;
    const double h = (t_to - t_from) / static_cast<double>(substeps);
    for (std::size_t s = 0; s < substeps; ++s) {
        ad::Var k1 = vector_field(t, bind, nets, plan, l, state.d, state.z_s, m_t);
        ad::Var k2 = vector_field(t, bind, nets, plan, ad::axpy(t, l, h / 2.0, k1), state.d,
                                  state.z_s, m_t);
        ad::Var k3 = vector_field(t, bind, nets, plan, ad::axpy(t, l, h / 2.0, k2), state.d,
                                  state.z_s, m_t);
        ad::Var k4 =
            vector_field(t, bind, nets, plan, ad::axpy(t, l, h, k3), state.d, state.z_s, m_t);
        l = ad::axpy(t, l, h / 6.0, k1);
        l = ad::axpy(t, l, h / 3.0, k2);
        l = ad::axpy(t, l, h / 3.0, k3);
        l = ad::axpy(t, l, h / 6.0, k4);
    }
    check_finite_nodes(t, l, plan.n_nodes, "advance_frame");

    ModelState next;
    next.l = l;
    next.prev_l = l;
    next.d = ad::add(t, state.d, nets.f_delta.forward(t, bind, ad::concat(t, state.d, l)));

    ad::Var d_pool_sp = ad::scale(
        t, ad::add(t, ad::gather_rows(t, next.d, plan.sp_src), ad::gather_rows(t, next.d, plan.sp_dst)),
        0.5);
    next.z_s = ad::add(t, state.z_s, nets.f_s.forward(t, bind, ad::concat(t, state.z_s, d_pool_sp)));
    ad::Var d_pool_tp = ad::gather_rows(t, next.d, plan.tp_dst);
    next.z_t = ad::add(t, state.z_t, nets.f_t.forward(t, bind, ad::concat(t, state.z_t, d_pool_tp)));
    return next;
}

}  // namespace stgnp::model
