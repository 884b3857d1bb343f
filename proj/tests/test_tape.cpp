#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "stgnp/ad/gradcheck.hpp"
#include "stgnp/ad/mlp.hpp"
#include "stgnp/ad/ops.hpp"
#include "stgnp/ad/tape.hpp"
#include "stgnp/core/rng.hpp"

using namespace stgnp;
using namespace stgnp::ad;

namespace {

Array random_array(std::size_t r, std::size_t c, Rng& rng, double lo = -2.0, double hi = 2.0) {
    Array a({r, c});
    for (std::size_t i = 0; i < a.numel(); ++i) a[i] = rng.uniform(lo, hi);
    return a;
}

// Gradient check harness: rebuilds the graph from a flat point so central
// differences and the tape see the same function.
GradCheckReport check_op(const std::function<Var(Tape&, const std::vector<Var>&)>& build,
                         const std::vector<Array>& at, double tol = 1e-4, double step = 1e-6) {
    auto eval = [&](const std::vector<double>& flat) {
        Tape t;
        std::vector<Var> leaves;
        std::size_t off = 0;
        for (const Array& proto : at) {
            Array a(proto.shape());
            for (std::size_t i = 0; i < a.numel(); ++i) a[i] = flat[off++];
            leaves.push_back(t.leaf(std::move(a), true));
        }
        return t.val(build(t, leaves))[0];
    };

    std::vector<double> point;
    for (const Array& a : at) point.insert(point.end(), a.values().begin(), a.values().end());

    Tape t;
    std::vector<Var> leaves;
    for (const Array& a : at) leaves.push_back(t.leaf(a, true));
    Var loss = build(t, leaves);
    t.backward(loss);
    std::vector<double> analytic;
    for (Var v : leaves) {
        const Array g = t.gradient(v);
        analytic.insert(analytic.end(), g.values().begin(), g.values().end());
    }
    return finite_diff_check(eval, point, analytic, step, tol);
}

}  // namespace

TEST_CASE("matmul forward matches hand arithmetic") {
    Tape t;
    Var a = t.leaf(Array({2, 2}, {1, 2, 3, 4}));
    Var b = t.leaf(Array({2, 1}, {1, 1}));
    Var c = matmul(t, a, b);
    CHECK(t.val(c).values() == std::vector<double>{3, 7});
}

TEST_CASE("softplus(0) is ln 2 and output is always positive") {
    Tape t;
    Var x = t.leaf(Array({1, 3}, {0.0, -800.0, 50.0}));
    Var y = softplus(t, x);
    CHECK(t.val(y)[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(t.val(y)[1] > 0.0);
    CHECK(t.val(y)[2] > 0.0);

    Rng rng(99);
    for (int i = 0; i < 200; ++i) {
        Tape t2;
        Var v = softplus(t2, t2.leaf(Array::scalar(rng.uniform(-1e6, 1e6))));
        CHECK(t2.val(v)[0] > 0.0);
    }
}

TEST_CASE("scatter_mean averages rows per group") {
    Tape t;
    Var rows = t.leaf(Array({2, 1}, {2, 4}));
    Var m = scatter_mean(t, rows, make_indices({0, 0}), 1);
    CHECK(t.val(m).values() == std::vector<double>{3});

    // empty group stays zero
    Var m2 = scatter_mean(t, rows, make_indices({1, 1}), 3);
    CHECK(t.val(m2).values() == std::vector<double>{0, 3, 0});
}

TEST_CASE("backward of x^2 gives 2x") {
    Tape t;
    Var x = t.leaf(Array::scalar(3.0), true);
    Var loss = square(t, x);
    t.backward(loss);
    CHECK(t.gradient(x)[0] == doctest::Approx(6.0));
}

TEST_CASE("backward of sum(matmul(W, v)) matches finite differences") {
    Rng rng(7);
    Array w = random_array(3, 2, rng);
    Array v({2, 1}, {1, 1});
    auto rep = check_op(
        [](Tape& t, const std::vector<Var>& in) { return sum(t, matmul(t, in[0], in[1])); },
        {w, v});
    CHECK(rep.pass);
}

TEST_CASE("unreachable leaf gets exactly zero gradient") {
    Tape t;
    Var x = t.leaf(Array::scalar(3.0), true);
    Var orphan = t.leaf(Array({2, 2}, {1, 2, 3, 4}), true);
    Var loss = square(t, x);
    t.backward(loss);
    const Array g = t.gradient(orphan);
    for (std::size_t i = 0; i < g.numel(); ++i) CHECK(g[i] == 0.0);
}

TEST_CASE("non-scalar loss is rejected") {
    Tape t;
    Var x = t.leaf(Array({1, 2}, {1, 2}), true);
    CHECK_THROWS_AS(t.backward(x), contract_error);
}

TEST_CASE("dimension errors name the op and shapes") {
    Tape t;
    Var a = t.leaf(Array({2, 3}));
    Var b = t.leaf(Array({2, 3}));
    CHECK_THROWS_WITH_AS(matmul(t, a, b), doctest::Contains("matmul"), dim_error);
    Var c = t.leaf(Array({4, 1}));
    CHECK_THROWS_WITH_AS(add(t, a, c), doctest::Contains("add"), dim_error);
}

TEST_CASE("every primitive passes finite-difference checks at random points") {
    Rng rng(2024);
    const double tol = 1e-4;
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t r = 1 + trial % 4;
        const std::size_t c = 1 + (trial / 4) % 3;
        Array x = random_array(r, c, rng);
        Array y = random_array(r, c, rng);

        auto unary = [&](Var (*op)(Tape&, Var), double lo, double hi) {
            Array in = random_array(r, c, rng, lo, hi);
            auto rep = check_op(
                [op](Tape& t, const std::vector<Var>& v) { return sum(t, op(t, v[0])); }, {in},
                tol);
            CHECK_MESSAGE(rep.pass, "unary primitive, max rel err ", rep.max_rel_error);
            ++checked;
        };
        unary(&ad::tanh, -2.0, 2.0);
        unary(&ad::relu, 0.3, 2.0);  // stay off the kink
        unary(&ad::softplus, -3.0, 3.0);
        unary(&ad::exp, -2.0, 2.0);
        unary(&ad::log, 0.5, 3.0);
        unary(&ad::square, -2.0, 2.0);

        auto binary = [&](Var (*op)(Tape&, Var, Var)) {
            auto rep = check_op(
                [op](Tape& t, const std::vector<Var>& v) { return sum(t, op(t, v[0], v[1])); },
                {x, y}, tol);
            CHECK_MESSAGE(rep.pass, "binary primitive, max rel err ", rep.max_rel_error);
            ++checked;
        };
        binary(&ad::add);
        binary(&ad::sub);
        binary(&ad::mul);

        // matmul
        {
            Array a = random_array(r, 3, rng);
            Array b = random_array(3, c, rng);
            auto rep = check_op(
                [](Tape& t, const std::vector<Var>& v) { return sum(t, matmul(t, v[0], v[1])); },
                {a, b}, tol);
            CHECK(rep.pass);
            ++checked;
        }
        // scale / axpy
        {
            auto rep = check_op(
                [](Tape& t, const std::vector<Var>& v) { return sum(t, scale(t, v[0], -1.7)); },
                {x}, tol);
            CHECK(rep.pass);
            auto rep2 = check_op(
                [](Tape& t, const std::vector<Var>& v) {
                    return sum(t, axpy(t, v[0], 0.37, v[1]));
                },
                {x, y}, tol);
            CHECK(rep2.pass);
            checked += 2;
        }
        // concat, broadcast, gather, scatter, mean
        {
            auto rep = check_op(
                [](Tape& t, const std::vector<Var>& v) {
                    return sum(t, square(t, concat(t, v[0], v[1])));
                },
                {x, y}, tol);
            CHECK(rep.pass);
            Array one_row = random_array(1, c, rng);
            auto rep2 = check_op(
                [r](Tape& t, const std::vector<Var>& v) {
                    return sum(t, square(t, broadcast(t, v[0], r, t.val(v[0]).cols())));
                },
                {one_row}, tol);
            CHECK(rep2.pass);
            auto idx = make_indices({0, 0, static_cast<int>(r) - 1});
            auto rep3 = check_op(
                [idx](Tape& t, const std::vector<Var>& v) {
                    return sum(t, square(t, gather_rows(t, v[0], idx)));
                },
                {x}, tol);
            CHECK(rep3.pass);
            auto groups = make_indices(std::vector<int>(r, 0));
            auto rep4 = check_op(
                [groups](Tape& t, const std::vector<Var>& v) {
                    return sum(t, square(t, scatter_mean(t, v[0], groups, 2)));
                },
                {x}, tol);
            CHECK(rep4.pass);
            auto rep5 = check_op(
                [](Tape& t, const std::vector<Var>& v) { return mean(t, square(t, v[0])); }, {x},
                tol);
            CHECK(rep5.pass);
            checked += 5;
        }
        // fused linear layers, all activation variants; keep pre-activations
        // away from the relu kink so central differences stay valid
        {
            // modest magnitudes keep tanh unsaturated and gradients well above
            // the central-difference noise floor
            Array xin = random_array(r, 3, rng, -0.8, 0.8);
            Array w = random_array(3, c, rng, -0.8, 0.8);
            Array bias = random_array(1, c, rng, -0.5, 0.5);
            for (int tries = 0; tries < 50; ++tries) {
                double closest = 1e9;
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) {
                        double pre = bias[j];
                        for (std::size_t m = 0; m < 3; ++m) pre += xin.at2(i, m) * w.at2(m, j);
                        closest = std::min(closest, std::fabs(pre));
                    }
                if (closest > 1e-3) break;
                bias = random_array(1, c, rng);
            }
            for (FusedAct act : {FusedAct::identity, FusedAct::relu, FusedAct::tanh}) {
                auto rep = check_op(
                    [act](Tape& t, const std::vector<Var>& v) {
                        return sum(t, square(t, linear(t, v[0], v[1], v[2], act)));
                    },
                    {xin, w, bias}, tol);
                CHECK_MESSAGE(rep.pass, "fused linear, max rel err ", rep.max_rel_error);
                ++checked;
            }
        }
        // fused edge message on a small random graph
        {
            const std::size_t n_nodes = 4;
            Array nodes = random_array(n_nodes, 2, rng);
            Array weights = random_array(3, 1, rng);
            auto src = make_indices({0, 2, 3});
            auto dst = make_indices({1, 1, 0});
            auto inv = std::make_shared<const std::vector<double>>(std::vector<double>{0.5, 0.5, 1.0});
            auto rep = check_op(
                [&](Tape& t, const std::vector<Var>& v) {
                    return sum(t, square(t, edge_message(t, v[0], v[1], src, dst, inv, n_nodes)));
                },
                {nodes, weights}, tol);
            CHECK(rep.pass);
            ++checked;
        }
    }
    CHECK(checked >= 100);
}

TEST_CASE("a corrupted gradient rule fails the finite-difference oracle") {
    Tape t;
    Array x({2, 2}, {0.3, -1.2, 0.7, 2.0});
    Var v = t.leaf(x, true);
    Var loss = sum(t, square(t, v));
    t.backward(loss);
    Array g = t.gradient(v);
    g[1] += 0.5;  // deliberate corruption
    auto eval = [&](const std::vector<double>& flat) {
        Tape t2;
        Var v2 = t2.leaf(Array({2, 2}, flat), true);
        return t2.val(sum(t2, square(t2, v2)))[0];
    };
    auto rep = finite_diff_check(eval, x.values(), g.values(), 1e-6, 1e-4);
    CHECK_FALSE(rep.pass);
    CHECK(rep.worst_index == 1);
}

TEST_CASE("constant function passes the checker with zero gradients") {
    auto eval = [](const std::vector<double>&) { return 42.0; };
    auto rep = finite_diff_check(eval, {1.0, 2.0}, {0.0, 0.0}, 1e-6, 1e-4);
    CHECK(rep.pass);
    CHECK(rep.max_rel_error == 0.0);
}

TEST_CASE("forward evaluation is deterministic") {
    auto run = []() {
        Rng rng(5);
        Tape t;
        Var a = t.leaf(random_array(5, 4, rng));
        Var b = t.leaf(random_array(4, 3, rng));
        Var out = softplus(t, matmul(t, ad::tanh(t, a), b));
        return t.val(out).values();
    };
    CHECK(run() == run());
}
