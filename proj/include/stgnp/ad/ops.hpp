#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <vector>

#include "stgnp/ad/tape.hpp"

namespace stgnp::ad {

using IndexPtr = std::shared_ptr<const std::vector<int>>;

inline IndexPtr make_indices(std::vector<int> idx) {
    return std::make_shared<const std::vector<int>>(std::move(idx));
}

namespace detail {

using EMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using CEMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

inline CEMap cmap(const Array& a) {
    return CEMap(a.data(), static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
}

inline EMap map(Array& a) {
    return EMap(a.data(), static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
}

inline void require_same_shape(const char* op, const Array& a, const Array& b) {
    if (!a.same_shape(b)) {
        throw dim_error(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                        b.shape_string());
    }
}

/// Canonical per-group accumulation order: members of each group are sorted
/// lexicographically by the row values being summed. The resulting sums depend
/// only on the multiset of rows per group, which makes mean aggregation
/// bit-exactly invariant to input ordering (context shuffles, node
/// permutations).
struct GroupPlan {
    std::vector<int> counts;   // per group
    std::vector<int> offsets;  // per group, into `order`
    std::vector<int> order;    // row indices, group-contiguous
};

inline GroupPlan group_rows(const std::vector<int>& groups, int n_groups, const double* rows,
                            std::size_t cols) {
    GroupPlan plan;
    plan.counts.assign(n_groups, 0);
    for (int g : groups) {
        if (g < 0 || g >= n_groups) throw contract_error("scatter: group id out of range");
        ++plan.counts[g];
    }
    plan.offsets.assign(n_groups + 1, 0);
    for (int g = 0; g < n_groups; ++g) plan.offsets[g + 1] = plan.offsets[g] + plan.counts[g];
    plan.order.assign(groups.size(), 0);
    std::vector<int> cursor(plan.offsets.begin(), plan.offsets.end() - 1);
    for (std::size_t r = 0; r < groups.size(); ++r) plan.order[cursor[groups[r]]++] = static_cast<int>(r);
    auto lex_less = [rows, cols](int a, int b) {
        const double* ra = rows + static_cast<std::size_t>(a) * cols;
        const double* rb = rows + static_cast<std::size_t>(b) * cols;
        for (std::size_t c = 0; c < cols; ++c) {
            if (ra[c] < rb[c]) return true;
            if (ra[c] > rb[c]) return false;
        }
        return false;
    };
    for (int g = 0; g < n_groups; ++g) {
        std::sort(plan.order.begin() + plan.offsets[g], plan.order.begin() + plan.offsets[g + 1],
                  lex_less);
    }
    return plan;
}

inline double stable_softplus(double x) {
    const double y = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    return std::max(y, std::numeric_limits<double>::denorm_min());
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise primitives
// ---------------------------------------------------------------------------

inline Var tanh(Tape& t, Var a) {
    const Array& x = t.val(a);
    Array y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) y[i] = std::tanh(x[i]);
    const int out_id = static_cast<int>(t.size());
    return t.record(std::move(y), [&t, a, out_id]() {
        const Array& g = t.grad_ref(out_id);
        const Array& yv = t.val(Var{out_id});
        Array& ga = t.grad_acc(a.id);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * (1.0 - yv[i] * yv[i]);
    });
}

inline Var relu(Tape& t, Var a) {
    const Array& x = t.val(a);
    Array y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
    const int out_id = static_cast<int>(t.size());
    return t.record(std::move(y), [&t, a, out_id]() {
        const Array& g = t.grad_ref(out_id);
        const Array& xv = t.val(a);
        Array& ga = t.grad_acc(a.id);
        for (std::size_t i = 0; i < g.numel(); ++i)
            if (xv[i] > 0.0) ga[i] += g[i];
    });
}

inline Var softplus(Tape& t, Var a) {
    const Array& x = t.val(a);
    Array y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) y[i] = detail::stable_softplus(x[i]);
    const int out_id = static_cast<int>(t.size());
    return t.record(std::move(y), [&t, a, out_id]() {
        const Array& g = t.grad_ref(out_id);
        const Array& xv = t.val(a);
        Array& ga = t.grad_acc(a.id);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * detail::sigmoid(xv[i]);
    });
}

inline Var exp(Tape& t, Var a) {
    const Array& x = t.val(a);
    Array y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) y[i] = std::exp(x[i]);
    const int out_id = static_cast<int>(t.size());
    return t.record(std::move(y), [&t, a, out_id]() {
        const Array& g = t.grad_ref(out_id);
        const Array& yv = t.val(Var{out_id});
        Array& ga = t.grad_acc(a.id);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * yv[i];
    });
}

inline Var log(Tape& t, Var a) {
    const Array& x = t.val(a);
    Array y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) y[i] = std::log(x[i]);
    const int out_id = static_cast<int>(t.size());
    return t.record(std::move(y), [&t, a, out_id]() {
        const Array& g = t.grad_ref(out_id);
        const Array& xv = t.val(a);
        Array& ga = t.grad_acc(a.id);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] / xv[i];
    });
}

inline Var square(Tape& t, Var a) {
    const Array& x = t.val(a);
    Array y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) y[i] = x[i] * x[i];
    const int out_id = static_cast<int>(t.size());
    return t.record(std::move(y), [&t, a, out_id]() {
        const Array& g = t.grad_ref(out_id);
        const Array& xv = t.val(a);
        Array& ga = t.grad_acc(a.id);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += 2.0 * g[i] * xv[i];
    });
}

// ---------------------------------------------------------------------------
// Binary / linear primitives
// ---------------------------------------------------------------------------

inline Var add(Tape& t, Var a, Var b) {
    detail::require_same_shape("add", t.val(a), t.val(b));
    const Array& xa = t.val(a);
    const Array& xb = t.val(b);
    Array y(xa.shape());
    for (std::size_t i = 0; i < y.numel(); ++i) y[i] = xa[i] + xb[i];
    const int out_id = static_cast<int>(t.size());
    return t.record(std::move(y), [&t, a, b, out_id]() {
        const Array& g = t.grad_ref(out_id);
        Array& ga = t.grad_acc(a.id);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
        Array& gb = t.grad_acc(b.id);
        for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i];
    });
}

inline Var sub(Tape& t, Var a, Var b) {
    detail::require_same_shape("sub", t.val(a), t.val(b));
    const Array& xa = t.val(a);
    const Array& xb = t.val(b);
    Array y(xa.shape());
    for (std::size_t i = 0; i < y.numel(); ++i) y[i] = xa[i] - xb[i];
    const int out_id = static_cast<int>(t.size());
    return t.record(std::move(y), [&t, a, b, out_id]() {
        const Array& g = t.grad_ref(out_id);
        Array& ga = t.grad_acc(a.id);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
        Array& gb = t.grad_acc(b.id);
        for (std::size_t i = 0; i < g.numel(); ++i) gb[i] -= g[i];
    });
}

inline Var mul(Tape& t, Var a, Var b) {
    detail::require_same_shape("mul", t.val(a), t.val(b));
    const Array& xa = t.val(a);
    const Array& xb = t.val(b);
    Array y(xa.shape());
    for (std::size_t i = 0; i < y.numel(); ++i) y[i] = xa[i] * xb[i];
    const int out_id = static_cast<int>(t.size());
    return t.record(std::move(y), [&t, a, b, out_id]() {
        const Array& g = t.grad_ref(out_id);
        const Array& xa2 = t.val(a);
        const Array& xb2 = t.val(b);
        Array& ga = t.grad_acc(a.id);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * xb2[i];
        Array& gb = t.grad_acc(b.id);
        for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * xa2[i];
    });
}

inline Var div(Tape& t, Var a, Var b) {
    detail::require_same_shape("div", t.val(a), t.val(b));
    const Array& xa = t.val(a);
    const Array& xb = t.val(b);
    Array y(xa.shape());
    for (std::size_t i = 0; i < y.numel(); ++i) y[i] = xa[i] / xb[i];
    const int out_id = static_cast<int>(t.size());
    return t.record(std::move(y), [&t, a, b, out_id]() {
        const Array& g = t.grad_ref(out_id);
        const Array& yv = t.val(Var{out_id});
        const Array& xb2 = t.val(b);
        Array& ga = t.grad_acc(a.id);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] / xb2[i];
        Array& gb = t.grad_acc(b.id);
        for (std::size_t i = 0; i < g.numel(); ++i) gb[i] -= g[i] * yv[i] / xb2[i];
    });
}

inline Var scale(Tape& t, Var a, double c) {
    const Array& x = t.val(a);
    Array y(x.shape());
    for (std::size_t i = 0; i < y.numel(); ++i) y[i] = c * x[i];
    const int out_id = static_cast<int>(t.size());
    return t.record(std::move(y), [&t, a, c, out_id]() {
        const Array& g = t.grad_ref(out_id);
        Array& ga = t.grad_acc(a.id);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += c * g[i];
    });
}

/// Fused y + c*x; keeps integrator updates from materializing two arrays.
inline Var axpy(Tape& t, Var y, double c, Var x) {
    detail::require_same_shape("axpy", t.val(y), t.val(x));
    const Array& xy = t.val(y);
    const Array& xx = t.val(x);
    Array out(xy.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = xy[i] + c * xx[i];
    const int out_id = static_cast<int>(t.size());
    return t.record(std::move(out), [&t, y, x, c, out_id]() {
        const Array& g = t.grad_ref(out_id);
        Array& gy = t.grad_acc(y.id);
        for (std::size_t i = 0; i < g.numel(); ++i) gy[i] += g[i];
        Array& gx = t.grad_acc(x.id);
        for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += c * g[i];
    });
}

inline Var matmul(Tape& t, Var a, Var b) {
    const Array& xa = t.val(a);
    const Array& xb = t.val(b);
    if (xa.ndim() != 2 || xb.ndim() != 2 || xa.cols() != xb.rows()) {
        throw dim_error("matmul: incompatible shapes " + xa.shape_string() + " x " +
                        xb.shape_string());
    }
    Array y({xa.rows(), xb.cols()});
    detail::map(y).noalias() = detail::cmap(xa) * detail::cmap(xb);
    const int out_id = static_cast<int>(t.size());
    return t.record(std::move(y), [&t, a, b, out_id]() {
        const Array& g = t.grad_ref(out_id);
        const Array& xa2 = t.val(a);
        const Array& xb2 = t.val(b);
        detail::map(t.grad_acc(a.id)).noalias() += detail::cmap(g) * detail::cmap(xb2).transpose();
        detail::map(t.grad_acc(b.id)).noalias() += detail::cmap(xa2).transpose() * detail::cmap(g);
    });
}

/// Activation tag for the fused layer op below.
enum class FusedAct { identity, relu, tanh };

/// Fused x*W + b with an optional activation whose derivative is a function
/// of the output alone. One tape node and one stored array per layer instead
/// of four; the backward pass reconstructs the pre-activation gradient in a
/// scratch buffer.
inline Var linear(Tape& t, Var x, Var w, Var b, FusedAct act) {
    const Array& xv = t.val(x);
    const Array& wv = t.val(w);
    const Array& bv = t.val(b);
    if (xv.ndim() != 2 || wv.ndim() != 2 || xv.cols() != wv.rows())
        throw dim_error("linear: incompatible shapes " + xv.shape_string() + " x " +
                        wv.shape_string());
    if (bv.rows() != 1 || bv.cols() != wv.cols())
        throw dim_error("linear: bias shape " + bv.shape_string() + " vs width " +
                        std::to_string(wv.cols()));
    const std::size_t rows = xv.rows(), cols = wv.cols();
    Array y({rows, cols});
    detail::map(y).noalias() = detail::cmap(xv) * detail::cmap(wv);
    for (std::size_t r = 0; r < rows; ++r) {
        double* yr = y.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) {
            double v = yr[c] + bv[c];
            if (act == FusedAct::relu)
                v = v > 0.0 ? v : 0.0;
            else if (act == FusedAct::tanh)
                v = std::tanh(v);
            yr[c] = v;
        }
    }
    const int out_id = static_cast<int>(t.size());
    return t.record(std::move(y), [&t, x, w, b, act, rows, cols, out_id]() {
        const Array& g = t.grad_ref(out_id);
        const Array& yv = t.val(Var{out_id});
        const Array& xv2 = t.val(x);
        const Array& wv2 = t.val(w);
        Array dpre({rows, cols});
        for (std::size_t i = 0; i < dpre.numel(); ++i) {
            double v = g[i];
            if (act == FusedAct::relu)
                v = yv[i] > 0.0 ? v : 0.0;
            else if (act == FusedAct::tanh)
                v *= 1.0 - yv[i] * yv[i];
            dpre[i] = v;
        }
        detail::map(t.grad_acc(x.id)).noalias() +=
            detail::cmap(dpre) * detail::cmap(wv2).transpose();
        detail::map(t.grad_acc(w.id)).noalias() +=
            detail::cmap(xv2).transpose() * detail::cmap(dpre);
        Array& gb = t.grad_acc(b.id);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) gb[c] += dpre[r * cols + c];
    });
}

// ---------------------------------------------------------------------------
// Shape / indexing primitives
// ---------------------------------------------------------------------------

/// Expand [1 x C] -> [rows x C], [R x 1] -> [R x cols] or [1 x 1] -> [rows x cols].
inline Var broadcast(Tape& t, Var a, std::size_t rows, std::size_t cols) {
    const Array& x = t.val(a);
    const bool row_rep = x.rows() == 1 && (x.cols() == cols || x.cols() == 1);
    const bool col_rep = x.cols() == 1 && (x.rows() == rows || x.rows() == 1);
    if (!(row_rep || col_rep)) {
        throw dim_error("broadcast: cannot expand " + x.shape_string() + " to [" +
                        std::to_string(rows) + "x" + std::to_string(cols) + "]");
    }
    Array y({rows, cols});
    const std::size_t xr = x.rows(), xc = x.cols();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            y.at2(r, c) = x.at2(xr == 1 ? 0 : r, xc == 1 ? 0 : c);
    const int out_id = static_cast<int>(t.size());
    return t.record(std::move(y), [&t, a, rows, cols, xr, xc, out_id]() {
        const Array& g = t.grad_ref(out_id);
        Array& ga = t.grad_acc(a.id);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c)
                ga.at2(xr == 1 ? 0 : r, xc == 1 ? 0 : c) += g.at2(r, c);
    });
}

/// Concatenate along the trailing (column) axis.
inline Var concat(Tape& t, const std::vector<Var>& parts) {
    if (parts.empty()) throw contract_error("concat: no inputs");
    const std::size_t rows = t.val(parts[0]).rows();
    std::size_t cols = 0;
    for (Var p : parts) {
        if (t.val(p).rows() != rows) {
            throw dim_error("concat: row mismatch " + t.val(p).shape_string() + " vs " +
                            std::to_string(rows) + " rows");
        }
        cols += t.val(p).cols();
    }
    Array y({rows, cols});
    std::size_t off = 0;
    for (Var p : parts) {
        const Array& x = t.val(p);
        const std::size_t c = x.cols();
        for (std::size_t r = 0; r < rows; ++r)
            std::copy(x.data() + r * c, x.data() + (r + 1) * c, y.data() + r * cols + off);
        off += c;
    }
    const int out_id = static_cast<int>(t.size());
    std::vector<Var> captured = parts;
    return t.record(std::move(y), [&t, captured, rows, cols, out_id]() {
        const Array& g = t.grad_ref(out_id);
        std::size_t off2 = 0;
        for (Var p : captured) {
            Array& gp = t.grad_acc(p.id);
            const std::size_t c = gp.cols();
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t k = 0; k < c; ++k) gp.at2(r, k) += g[r * cols + off2 + k];
            off2 += c;
        }
    });
}

inline Var concat(Tape& t, Var a, Var b) { return concat(t, std::vector<Var>{a, b}); }

/// out[i, :] = x[idx[i], :]
inline Var gather_rows(Tape& t, Var a, IndexPtr idx) {
    const Array& x = t.val(a);
    const std::size_t cols = x.cols();
    Array y({idx->size(), cols});
    for (std::size_t i = 0; i < idx->size(); ++i) {
        const int r = (*idx)[i];
        if (r < 0 || static_cast<std::size_t>(r) >= x.rows())
            throw contract_error("gather_rows: index out of range");
        std::copy(x.data() + r * cols, x.data() + (r + 1) * cols, y.data() + i * cols);
    }
    const int out_id = static_cast<int>(t.size());
    return t.record(std::move(y), [&t, a, idx, cols, out_id]() {
        const Array& g = t.grad_ref(out_id);
        Array& ga = t.grad_acc(a.id);
        for (std::size_t i = 0; i < idx->size(); ++i) {
            const std::size_t r = static_cast<std::size_t>((*idx)[i]);
            for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += g[i * cols + c];
        }
    });
}

/// Mean of input rows per group; empty groups produce zero rows. Accumulation
/// follows the canonical value-sorted order (see GroupPlan).
inline Var scatter_mean(Tape& t, Var a, IndexPtr groups, std::size_t n_groups) {
    const Array& x = t.val(a);
    if (groups->size() != x.rows())
        throw dim_error("scatter_mean: group list size " + std::to_string(groups->size()) +
                        " vs rows " + std::to_string(x.rows()));
    const std::size_t cols = x.cols();
    const auto plan = detail::group_rows(*groups, static_cast<int>(n_groups), x.data(), cols);
    Array y({n_groups, cols});
    for (std::size_t g = 0; g < n_groups; ++g) {
        const int cnt = plan.counts[g];
        if (cnt == 0) continue;
        double* out_row = y.data() + g * cols;
        for (int k = plan.offsets[g]; k < plan.offsets[g + 1]; ++k) {
            const double* row = x.data() + static_cast<std::size_t>(plan.order[k]) * cols;
            for (std::size_t c = 0; c < cols; ++c) out_row[c] += row[c];
        }
        const double inv = 1.0 / static_cast<double>(cnt);
        for (std::size_t c = 0; c < cols; ++c) out_row[c] *= inv;
    }
    const int out_id = static_cast<int>(t.size());
    std::vector<int> counts = plan.counts;
    return t.record(std::move(y), [&t, a, groups, counts, cols, out_id]() {
        const Array& g = t.grad_ref(out_id);
        Array& ga = t.grad_acc(a.id);
        for (std::size_t i = 0; i < groups->size(); ++i) {
            const int grp = (*groups)[i];
            const double inv = 1.0 / static_cast<double>(counts[grp]);
            for (std::size_t c = 0; c < cols; ++c)
                ga[i * cols + c] += inv * g[static_cast<std::size_t>(grp) * cols + c];
        }
    });
}

inline Var sum(Tape& t, Var a) {
    const Array& x = t.val(a);
    double s = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) s += x[i];
    const int out_id = static_cast<int>(t.size());
    return t.record(Array::scalar(s), [&t, a, out_id]() {
        const double g = t.grad_ref(out_id)[0];
        Array& ga = t.grad_acc(a.id);
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g;
    });
}

inline Var mean(Tape& t, Var a) {
    const Array& x = t.val(a);
    if (x.numel() == 0) throw contract_error("mean: empty array");
    double s = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) s += x[i];
    const double inv = 1.0 / static_cast<double>(x.numel());
    const int out_id = static_cast<int>(t.size());
    return t.record(Array::scalar(s * inv), [&t, a, inv, out_id]() {
        const double g = t.grad_ref(out_id)[0] * inv;
        Array& ga = t.grad_acc(a.id);
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g;
    });
}

// ---------------------------------------------------------------------------
// Fused graph-message primitive
// ---------------------------------------------------------------------------

/// Per-edge weighted neighborhood mean without materializing per-edge rows on
/// the tape:
///   out[d] = mean over edges e with dst[e]==d of (w[e] * inv_norm[e]) * nodes[src[e], :]
/// Used for both spatial and temporal message passing; inv_norm carries the
/// in-degree normalization. Canonical value-sorted accumulation per group.
inline Var edge_message(Tape& t, Var nodes, Var edge_w, IndexPtr src, IndexPtr dst,
                        std::shared_ptr<const std::vector<double>> inv_norm, std::size_t n_dst) {
    const Array& l = t.val(nodes);
    const Array& w = t.val(edge_w);
    const std::size_t ne = src->size();
    if (dst->size() != ne || inv_norm->size() != ne)
        throw dim_error("edge_message: edge index lists disagree");
    if (w.rows() != ne || w.cols() != 1)
        throw dim_error("edge_message: weights must be [n_edges x 1], got " + w.shape_string());
    const std::size_t cols = l.cols();

    // Scratch of scaled addend rows; lives only through this call.
    std::vector<double> addends(ne * cols);
    for (std::size_t e = 0; e < ne; ++e) {
        const int s = (*src)[e];
        if (s < 0 || static_cast<std::size_t>(s) >= l.rows())
            throw contract_error("edge_message: source index out of range");
        const double coeff = w[e] * (*inv_norm)[e];
        const double* row = l.data() + static_cast<std::size_t>(s) * cols;
        for (std::size_t c = 0; c < cols; ++c) addends[e * cols + c] = coeff * row[c];
    }
    const auto plan = detail::group_rows(*dst, static_cast<int>(n_dst), addends.data(), cols);
    Array y({n_dst, cols});
    for (std::size_t g = 0; g < n_dst; ++g) {
        const int cnt = plan.counts[g];
        if (cnt == 0) continue;
        double* out_row = y.data() + g * cols;
        for (int k = plan.offsets[g]; k < plan.offsets[g + 1]; ++k) {
            const double* row = addends.data() + static_cast<std::size_t>(plan.order[k]) * cols;
            for (std::size_t c = 0; c < cols; ++c) out_row[c] += row[c];
        }
        const double inv = 1.0 / static_cast<double>(cnt);
        for (std::size_t c = 0; c < cols; ++c) out_row[c] *= inv;
    }
    const int out_id = static_cast<int>(t.size());
    std::vector<int> counts = plan.counts;
    return t.record(std::move(y),
                    [&t, nodes, edge_w, src, dst, inv_norm, counts, cols, out_id]() {
                        const Array& g = t.grad_ref(out_id);
                        const Array& l2 = t.val(nodes);
                        const Array& w2 = t.val(edge_w);
                        Array& gl = t.grad_acc(nodes.id);
                        Array& gw = t.grad_acc(edge_w.id);
                        for (std::size_t e = 0; e < src->size(); ++e) {
                            const std::size_t s = static_cast<std::size_t>((*src)[e]);
                            const std::size_t d = static_cast<std::size_t>((*dst)[e]);
                            const double inv_cnt = 1.0 / static_cast<double>(counts[d]);
                            const double base = (*inv_norm)[e] * inv_cnt;
                            const double coeff = w2[e] * base;
                            const double* grow = g.data() + d * cols;
                            const double* lrow = l2.data() + s * cols;
                            double* glrow = gl.data() + s * cols;
                            double dot = 0.0;
                            for (std::size_t c = 0; c < cols; ++c) {
                                glrow[c] += coeff * grow[c];
                                dot += lrow[c] * grow[c];
                            }
                            gw[e] += base * dot;
                        }
                    });
}

}  // namespace stgnp::ad
