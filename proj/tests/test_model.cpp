#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stgnp/ad/gradcheck.hpp"
#include "stgnp/model/model.hpp"
#include "stgnp/graph/split.hpp"
#include "stgnp/train/loss.hpp"

using namespace stgnp;
using namespace stgnp::model;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.latent_dim = 2;
    cfg.hidden_dim = 5;
    cfg.spatial_planes = 2;
    cfg.temporal_planes = 2;
    cfg.node_encoder_width = 8;
    cfg.edge_encoder_width = 4;
    cfg.vf_width = 8;
    cfg.update_width = 4;
    cfg.edge_update_width = 0;
    cfg.decoder_width = 8;
    cfg.decoder_depth = 1;
    cfg.n_rk4_substeps = 1;
    cfg.mlp_activation = "tanh";  // keeps finite differences clean
    return cfg;
}

graph::MultiplexDataset random_dataset(std::size_t S, std::size_t V, std::size_t F, std::size_t K,
                                       std::uint64_t seed, bool random_edges = false) {
    graph::MultiplexDataset ds;
    ds.system = "toy";
    ds.adjacency = graph::build_adjacency(graph::SpatialKind::full, graph::TemporalKind::diagonal, V);
    ds.times.resize(F);
    for (std::size_t f = 0; f < F; ++f) ds.times[f] = static_cast<double>(f) * 0.5;
    ds.feature_names.resize(K);
    ds.feature_units.assign(K, "1");
    for (std::size_t k = 0; k < K; ++k) ds.feature_names[k] = "f" + std::to_string(k);
    const std::size_t Es = ds.adjacency.n_spatial_edges(), Et = ds.adjacency.n_temporal_edges();
    ds.node_features = Array({S, F, V, K});
    ds.extra_node_features = Array({S, 0, V, K});
    ds.spatial_edge_attrs = random_edges ? Array({S, F, Es, 1}) : Array::full({S, F, Es, 1}, 1.0);
    ds.temporal_edge_attrs =
        random_edges ? Array({S, F - 1, Et, 1}) : Array::full({S, F - 1, Et, 1}, 1.0);
    ds.globals = Array({S, 0});
    Rng rng(seed);
    for (auto& v : ds.node_features.values()) v = rng.uniform(-1.5, 1.5);
    if (random_edges) {
        for (auto& v : ds.spatial_edge_attrs.values()) v = rng.uniform(0.2, 2.0);
        for (auto& v : ds.temporal_edge_attrs.values()) v = rng.uniform(0.2, 2.0);
    }
    ds.validate();
    return ds;
}

graph::NormalizationStats identity_stats(std::size_t K) {
    graph::NormalizationStats st;
    st.node_mean.assign(K, 0.0);
    st.node_std.assign(K, 1.0);
    st.fitted = true;
    return st;
}

void randomize_store(ad::ParamStore& store, std::uint64_t seed, double scale = 0.4) {
    Rng rng(seed);
    for (auto& a : store.arrays())
        for (std::size_t i = 0; i < a.numel(); ++i) a[i] = rng.uniform(-scale, scale);
}

}  // namespace

TEST_CASE("spatial message matches the two-node hand value") {
    // V=2 full adjacency, one plane, z=1, l=([1,0],[0,1]) -> m = ([0,1],[1,0])
    auto adj = graph::build_adjacency(graph::SpatialKind::full, graph::TemporalKind::diagonal, 2);
    auto plan = GraphPlan::build(adj, 1);
    ad::Tape t;
    ad::Var l = t.leaf(Array({2, 2}, {1, 0, 0, 1}));
    ad::Var z = t.leaf(Array({2, 1}, {1, 1}));
    ad::Var m = spatial_message(t, l, z, plan);
    CHECK(t.val(m).values() == std::vector<double>{0, 1, 1, 0});

    ad::Var z0 = t.leaf(Array({2, 1}, {0, 0}));
    ad::Var m0 = spatial_message(t, l, z0, plan);
    for (std::size_t i = 0; i < 4; ++i) CHECK(t.val(m0)[i] == 0.0);

    ad::Var z2 = t.leaf(Array({2, 1}, {2, 2}));
    ad::Var m2 = spatial_message(t, l, z2, plan);
    for (std::size_t i = 0; i < 4; ++i) CHECK(t.val(m2)[i] == doctest::Approx(2.0 * t.val(m)[i]));
}

TEST_CASE("message channels are summed and in-degree normalization applies twice") {
    // V=3 full graph: in-degree 2, mean over 2 neighbors -> each term /4.
    auto adj = graph::build_adjacency(graph::SpatialKind::full, graph::TemporalKind::diagonal, 3);
    auto plan = GraphPlan::build(adj, 1);
    ad::Tape t;
    ad::Var l = t.leaf(Array({3, 1}, {1, 2, 4}));
    ad::Var z = t.leaf(Array::full({6, 2}, 0.5));  // two planes, each 0.5 -> channel sum 1
    ad::Var m = spatial_message(t, l, z, plan);
    CHECK(t.val(m)[0] == doctest::Approx((2.0 + 4.0) / 4.0));
    CHECK(t.val(m)[1] == doctest::Approx((1.0 + 4.0) / 4.0));
    CHECK(t.val(m)[2] == doctest::Approx((1.0 + 2.0) / 4.0));
}

TEST_CASE("isolated node receives the empty-mean zero message") {
    std::vector<std::uint8_t> spatial = {0, 1, 0, 0};  // only edge 0 -> 1
    auto adj = graph::build_adjacency(graph::SpatialKind::custom, graph::TemporalKind::diagonal, 2,
                                      &spatial);
    auto plan = GraphPlan::build(adj, 1);
    ad::Tape t;
    ad::Var l = t.leaf(Array({2, 2}, {3, 4, 5, 6}));
    ad::Var z = t.leaf(Array({1, 1}, {1}));
    ad::Var m = spatial_message(t, l, z, plan);
    CHECK(t.val(m).at2(0, 0) == 0.0);  // no in-edges
    CHECK(t.val(m).at2(0, 1) == 0.0);
    CHECK(t.val(m).at2(1, 0) == 3.0);
    CHECK(t.val(m).at2(1, 1) == 4.0);
}

TEST_CASE("temporal message at t0 reproduces the initial latent buffer") {
    auto adj = graph::build_adjacency(graph::SpatialKind::full, graph::TemporalKind::diagonal, 2);
    auto plan = GraphPlan::build(adj, 1);
    ad::Tape t;
    ad::Var l0 = t.leaf(Array({2, 2}, {0.3, -0.7, 1.2, 0.5}));
    ad::Var zt = t.leaf(Array({2, 1}, {1, 1}));
    ad::Var m = temporal_message(t, l0, zt, plan);
    CHECK(t.val(m).values() == t.val(l0).values());
}

TEST_CASE("zero-initialized update nets keep the rollout constant") {
    auto cfg = tiny_config();
    cfg.decode_just_latent = true;
    auto ds = random_dataset(2, 3, 4, 2, 10);
    auto st = identity_stats(2);
    auto params = ModelParams::make(cfg, 2, 1, 1, 5);

    auto ctx = graph::make_context_mask(ds.n_frames());
    auto batch = make_batch(ds, st, {0, 1}, ctx, false, false, ds.times.back());
    auto plan = GraphPlan::build(ds.adjacency, 2);
    ad::Tape t;
    ad::TapeBinding bind(t, params.store);
    auto noise = NoiseSource::zeros();
    auto roll = forward(t, bind, params, plan, batch, batch.context_feed, noise, false);

    for (std::size_t f = 1; f < roll.l_frames.size(); ++f) {
        CHECK(t.val(roll.l_frames[f]).values() == t.val(roll.l_frames[0]).values());
        CHECK(t.val(roll.zs_frames[f]).values() == t.val(roll.zs_frames[0]).values());
        CHECK(t.val(roll.zt_frames[f]).values() == t.val(roll.zt_frames[0]).values());
        // constant latent + latent-only decoder = time-independent output
        CHECK(t.val(roll.outputs[f].mean).values() == t.val(roll.outputs[0].mean).values());
        CHECK(t.val(roll.outputs[f].scale).values() == t.val(roll.outputs[0].scale).values());
    }
}

TEST_CASE("encoders are exactly invariant to context frame order") {
    auto cfg = tiny_config();
    auto ds = random_dataset(3, 3, 6, 2, 21, /*random_edges=*/true);
    auto st = identity_stats(2);
    auto params = ModelParams::make(cfg, 2, 1, 1, 9);
    randomize_store(params.store, 77);

    const std::vector<int> ctx = {0, 2, 4};
    const std::vector<int> shuffled = {0, 4, 2};
    auto run = [&](const std::vector<int>& frames) {
        auto batch = make_batch(ds, st, {0, 1, 2}, frames, false, false, ds.times.back());
        ad::Tape t;
        ad::TapeBinding bind(t, params.store);
        ad::Var rho = encode_external(t, bind, params, batch);
        auto post = encode_posteriors(t, bind, params, batch, batch.context_feed, rho);
        return std::make_tuple(t.val(post.qD.mean), t.val(post.qD.scale), t.val(post.qZs.mean),
                               t.val(post.qZt.mean));
    };
    auto a = run(ctx);
    auto b = run(shuffled);
    CHECK(std::get<0>(a) == std::get<0>(b));
    CHECK(std::get<1>(a) == std::get<1>(b));
    CHECK(std::get<2>(a) == std::get<2>(b));
    CHECK(std::get<3>(a) == std::get<3>(b));
}

TEST_CASE("duplicating every context frame leaves the posterior unchanged") {
    auto cfg = tiny_config();
    auto ds = random_dataset(2, 3, 6, 2, 33);
    auto st = identity_stats(2);
    auto params = ModelParams::make(cfg, 2, 1, 1, 4);
    randomize_store(params.store, 5);

    auto run = [&](const std::vector<int>& frames) {
        auto batch = make_batch(ds, st, {0, 1}, frames, false, false, ds.times.back());
        ad::Tape t;
        ad::TapeBinding bind(t, params.store);
        ad::Var rho = encode_external(t, bind, params, batch);
        auto post = encode_posteriors(t, bind, params, batch, batch.context_feed, rho);
        return std::make_pair(t.val(post.qD.mean), t.val(post.qD.scale));
    };
    auto once = run({0, 2, 4});
    auto twice = run({0, 0, 2, 2, 4, 4});
    REQUIRE(once.first.numel() == twice.first.numel());
    for (std::size_t i = 0; i < once.first.numel(); ++i) {
        CHECK(once.first[i] == doctest::Approx(twice.first[i]).epsilon(1e-12));
        CHECK(once.second[i] == doctest::Approx(twice.second[i]).epsilon(1e-12));
    }
}

TEST_CASE("posterior shapes follow the configuration") {
    auto cfg = tiny_config();
    auto ds = random_dataset(2, 3, 4, 2, 3);
    auto st = identity_stats(2);
    auto params = ModelParams::make(cfg, 2, 1, 1, 4);
    auto batch = make_batch(ds, st, {0, 1}, {0, 2}, false, false, ds.times.back());
    ad::Tape t;
    ad::TapeBinding bind(t, params.store);
    auto post = encode_posteriors(t, bind, params, batch, batch.context_feed, ad::Var{});
    CHECK(t.val(post.qD.mean).shape() == std::vector<std::size_t>{6, 3});   // B*V x control
    CHECK(t.val(post.qL.mean).shape() == std::vector<std::size_t>{6, 2});   // B*V x latent
    CHECK(t.val(post.qZs.mean).shape() == std::vector<std::size_t>{12, 2});  // B*Es x k_es
    CHECK(t.val(post.qZt.mean).shape() == std::vector<std::size_t>{6, 2});   // B*Et x k_et
    for (std::size_t i = 0; i < t.val(post.qL.scale).numel(); ++i)
        CHECK(t.val(post.qL.scale)[i] > 0.0);
}

TEST_CASE("identical samples produce identical state posteriors") {
    auto cfg = tiny_config();
    auto ds = random_dataset(2, 3, 4, 2, 8);
    // make sample 1 a copy of sample 0
    const std::size_t n = ds.node_features.numel() / 2;
    for (std::size_t i = 0; i < n; ++i) ds.node_features[n + i] = ds.node_features[i];
    auto st = identity_stats(2);
    auto params = ModelParams::make(cfg, 2, 1, 1, 4);
    randomize_store(params.store, 6);
    auto batch = make_batch(ds, st, {0, 1}, {0, 1}, false, false, ds.times.back());
    ad::Tape t;
    ad::TapeBinding bind(t, params.store);
    auto post = encode_posteriors(t, bind, params, batch, batch.context_feed, ad::Var{});
    const Array& mu = t.val(post.qL.mean);
    const std::size_t V = 3;
    for (std::size_t v = 0; v < V; ++v)
        for (std::size_t c = 0; c < 2; ++c) CHECK(mu.at2(v, c) == mu.at2(V + v, c));
}

TEST_CASE("reparameterized sampling follows mean + scale * noise") {
    ad::Tape t;
    GaussianLatent g{t.leaf(Array({1, 1}, {2.0})), t.leaf(Array({1, 1}, {0.5}))};
    CHECK(t.val(sample_latent(t, g, Array({1, 1}, {0.0})))[0] == 2.0);
    CHECK(t.val(sample_latent(t, g, Array({1, 1}, {1.0})))[0] == 2.5);

    // Monte Carlo mean within 3 sigma / sqrt(n)
    Rng rng(17);
    double acc = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) acc += 2.0 + 0.5 * rng.normal();
    CHECK(std::fabs(acc / n - 2.0) <= 3.0 * 0.5 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("latent-only decoding ignores the control variable") {
    auto cfg = tiny_config();
    cfg.decode_just_latent = true;
    auto params = ModelParams::make(cfg, 2, 1, 1, 4);
    randomize_store(params.store, 3);
    ad::Tape t;
    ad::TapeBinding bind(t, params.store);
    ad::Var l = t.leaf(Array({2, 2}, {0.1, -0.2, 0.4, 0.9}));
    ad::Var d_a = t.leaf(Array::full({2, 3}, 0.0));
    ad::Var d_b = t.leaf(Array::full({2, 3}, 5.0));
    auto ga = decode_frame(t, bind, params, l, d_a, 1.0, 2.0, ad::Var{}, nullptr);
    auto gb = decode_frame(t, bind, params, l, d_b, 1.0, 2.0, ad::Var{}, nullptr);
    CHECK(t.val(ga.mean) == t.val(gb.mean));
    CHECK(t.val(ga.scale) == t.val(gb.scale));
}

TEST_CASE("advance_frame is Markov: replay from a saved state matches") {
    auto cfg = tiny_config();
    auto ds = random_dataset(1, 4, 3, 2, 55, true);
    auto st = identity_stats(2);
    auto params = ModelParams::make(cfg, 2, 1, 1, 12);
    randomize_store(params.store, 13, 0.3);
    auto plan = GraphPlan::build(ds.adjacency, 1);
    auto batch = make_batch(ds, st, {0}, {0, 1}, false, false, ds.times.back());
    auto nets = params.dynamics();

    // continuous run over two intervals
    ad::Tape t;
    ad::TapeBinding bind(t, params.store);
    ad::Var rho = encode_external(t, bind, params, batch);
    auto post = encode_posteriors(t, bind, params, batch, batch.context_feed, rho);
    ModelState s0{post.qL.mean, post.qD.mean, post.qZs.mean, post.qZt.mean, post.qL.mean};
    auto s1 = advance_frame(t, bind, nets, plan, s0, ds.times[0], ds.times[1], 1);
    auto s2 = advance_frame(t, bind, nets, plan, s1, ds.times[1], ds.times[2], 1);

    // replay: restart from the saved mid-state on a fresh tape
    ad::Tape t2;
    ad::TapeBinding bind2(t2, params.store);
    ModelState mid{t2.leaf(t.val(s1.l)), t2.leaf(t.val(s1.d)), t2.leaf(t.val(s1.z_s)),
                   t2.leaf(t.val(s1.z_t)), t2.leaf(t.val(s1.prev_l))};
    auto replay = advance_frame(t2, bind2, nets, plan, mid, ds.times[1], ds.times[2], 1);

    CHECK(t2.val(replay.l).values() == t.val(s2.l).values());
    CHECK(t2.val(replay.d).values() == t.val(s2.d).values());
    CHECK(t2.val(replay.z_s).values() == t.val(s2.z_s).values());
    CHECK(t2.val(replay.z_t).values() == t.val(s2.z_t).values());
}

TEST_CASE("substep refinement converges at fourth order") {
    auto cfg = tiny_config();
    auto ds = random_dataset(1, 3, 3, 2, 71, true);
    auto st = identity_stats(2);
    auto params = ModelParams::make(cfg, 2, 1, 1, 30);
    randomize_store(params.store, 31, 0.5);
    auto plan = GraphPlan::build(ds.adjacency, 1);
    auto batch = make_batch(ds, st, {0}, {0, 1}, false, false, ds.times.back());
    auto nets = params.dynamics();

    auto latent_after = [&](std::size_t substeps) {
        ad::Tape t;
        ad::TapeBinding bind(t, params.store);
        ad::Var rho = encode_external(t, bind, params, batch);
        auto post = encode_posteriors(t, bind, params, batch, batch.context_feed, rho);
        ModelState s{post.qL.mean, post.qD.mean, post.qZs.mean, post.qZt.mean, post.qL.mean};
        auto next = advance_frame(t, bind, nets, plan, s, 0.0, 1.0, substeps);
        return t.val(next.l);
    };
    auto ref = latent_after(64);
    auto err = [&](std::size_t n) {
        auto l = latent_after(n);
        double m = 0;
        for (std::size_t i = 0; i < l.numel(); ++i) m = std::max(m, std::fabs(l[i] - ref[i]));
        return m;
    };
    const double e1 = err(1), e2 = err(2), e4 = err(4);
    CHECK(e1 / e2 > 8.0);  // fourth order would give ~16x
    CHECK(e2 / e4 > 8.0);
}

TEST_CASE("node permutation equivariance is exact") {
    const std::size_t V = 5, F = 4, K = 2, S = 1;
    auto cfg = tiny_config();
    auto ds = random_dataset(S, V, F, K, 91, /*random_edges=*/true);
    auto st = identity_stats(K);
    auto params = ModelParams::make(cfg, K, 1, 1, 14);
    randomize_store(params.store, 15, 0.3);

    const std::vector<std::size_t> perm = {3, 0, 4, 1, 2};  // new index of each old node

    graph::MultiplexDataset pd = ds;
    for (std::size_t f = 0; f < F; ++f)
        for (std::size_t v = 0; v < V; ++v)
            for (std::size_t k = 0; k < K; ++k)
                pd.node_features[((0 * F + f) * V + perm[v]) * K + k] =
                    ds.node_features[((0 * F + f) * V + v) * K + k];

    // re-align edge attributes with the permuted enumeration
    auto remap_edges = [&](const std::vector<graph::Edge>& edges, const Array& attrs, Array& out,
                           std::size_t frames) {
        for (std::size_t i = 0; i < edges.size(); ++i) {
            const int pu = static_cast<int>(perm[static_cast<std::size_t>(edges[i].src)]);
            const int pv = static_cast<int>(perm[static_cast<std::size_t>(edges[i].dst)]);
            // position of (pu, pv) in the (identical) full enumeration
            std::size_t j = 0;
            for (; j < edges.size(); ++j)
                if (edges[j].src == pu && edges[j].dst == pv) break;
            REQUIRE(j < edges.size());
            for (std::size_t f = 0; f < frames; ++f)
                out[(f * edges.size() + j)] = attrs[(f * edges.size() + i)];
        }
    };
    remap_edges(ds.adjacency.spatial_edges(), ds.spatial_edge_attrs, pd.spatial_edge_attrs, F);
    remap_edges(ds.adjacency.temporal_edges(), ds.temporal_edge_attrs, pd.temporal_edge_attrs,
                F - 1);

    auto run = [&](const graph::MultiplexDataset& d) {
        auto batch = make_batch(d, st, {0}, {0, 2}, false, false, d.times.back());
        auto plan = GraphPlan::build(d.adjacency, 1);
        ad::Tape t;
        ad::TapeBinding bind(t, params.store);
        auto noise = NoiseSource::zeros();
        auto roll = forward(t, bind, params, plan, batch, batch.context_feed, noise, false);
        std::vector<Array> outs;
        for (const auto& g : roll.outputs) outs.push_back(t.val(g.mean));
        outs.push_back(t.val(roll.l_frames.back()));
        return outs;
    };
    auto base = run(ds);
    auto permuted = run(pd);
    REQUIRE(base.size() == permuted.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        const std::size_t cols = base[i].cols();
        for (std::size_t v = 0; v < V; ++v)
            for (std::size_t c = 0; c < cols; ++c)
                CHECK(base[i].at2(v, c) == permuted[i].at2(perm[v], c));
    }
}

TEST_CASE("KL vanishes exactly when context equals target") {
    auto cfg = tiny_config();
    auto ds = random_dataset(2, 3, 4, 2, 44, true);
    auto st = identity_stats(2);
    auto params = ModelParams::make(cfg, 2, 1, 1, 2);
    randomize_store(params.store, 19);
    std::vector<int> all_frames = {0, 1, 2, 3};
    auto batch = make_batch(ds, st, {0, 1}, all_frames, true, false, ds.times.back());
    ad::Tape t;
    ad::TapeBinding bind(t, params.store);
    ad::Var rho = encode_external(t, bind, params, batch);
    auto q_ctx = encode_posteriors(t, bind, params, batch, batch.context_feed, rho);
    auto q_tgt = encode_posteriors(t, bind, params, batch, batch.target_feed, rho);
    CHECK(t.val(train::gaussian_kl(t, q_tgt.qL, q_ctx.qL))[0] == 0.0);
    CHECK(t.val(train::gaussian_kl(t, q_tgt.qD, q_ctx.qD))[0] == 0.0);
    CHECK(t.val(train::gaussian_kl(t, q_tgt.qZs, q_ctx.qZs))[0] == 0.0);
    CHECK(t.val(train::gaussian_kl(t, q_tgt.qZt, q_ctx.qZt))[0] == 0.0);
}

TEST_CASE("forward is deterministic for fixed noise") {
    auto cfg = tiny_config();
    auto ds = random_dataset(2, 3, 4, 2, 60, true);
    auto st = identity_stats(2);
    auto params = ModelParams::make(cfg, 2, 1, 1, 61);
    randomize_store(params.store, 62);
    auto run = [&]() {
        auto batch = make_batch(ds, st, {0, 1}, {0, 2}, false, false, ds.times.back());
        auto plan = GraphPlan::build(ds.adjacency, 2);
        ad::Tape t;
        ad::TapeBinding bind(t, params.store);
        auto noise = NoiseSource::seeded(7, 3);
        auto roll = forward(t, bind, params, plan, batch, batch.context_feed, noise, false);
        return t.val(roll.outputs.back().mean);
    };
    CHECK(run() == run());
}

TEST_CASE("end-to-end loss gradient matches finite differences on a toy instance") {
    auto cfg = tiny_config();
    const std::size_t V = 2, F = 3, K = 1;
    auto ds = random_dataset(2, V, F, K, 100, true);
    auto st = identity_stats(K);
    const std::vector<int> ctx = {0, 2};
    const std::vector<int> samples = {0, 1};
    train::LossWeights w{0.9, 0.3, 0.2};

    auto build_params = [&]() { return ModelParams::make(cfg, K, 1, 1, 200); };
    auto proto = build_params();
    randomize_store(proto.store, 201, 0.5);

    auto loss_value = [&](const std::vector<double>& flat) {
        auto p = build_params();
        std::size_t off = 0;
        for (auto& a : p.store.arrays())
            for (std::size_t i = 0; i < a.numel(); ++i) a[i] = flat[off++];
        auto batch = make_batch(ds, st, samples, ctx, true, false, ds.times.back());
        auto plan = GraphPlan::build(ds.adjacency, samples.size());
        ad::Tape t;
        ad::TapeBinding bind(t, p.store);
        auto noise = NoiseSource::zeros();
        auto roll = forward(t, bind, p, plan, batch, batch.target_feed, noise, false);
        ad::Var rho = encode_external(t, bind, p, batch);
        auto q_ctx = encode_posteriors(t, bind, p, batch, batch.context_feed, rho);
        auto loss = train::total_loss(t, roll, batch.target_rows, q_ctx, w, samples.size());
        return loss.total_value;
    };

    std::vector<double> point;
    for (const auto& a : proto.store.arrays())
        point.insert(point.end(), a.values().begin(), a.values().end());

    auto batch = make_batch(ds, st, samples, ctx, true, false, ds.times.back());
    auto plan = GraphPlan::build(ds.adjacency, samples.size());
    ad::Tape t;
    ad::TapeBinding bind(t, proto.store);
    auto noise = NoiseSource::zeros();
    auto roll = forward(t, bind, proto, plan, batch, batch.target_feed, noise, false);
    ad::Var rho = encode_external(t, bind, proto, batch);
    auto q_ctx = encode_posteriors(t, bind, proto, batch, batch.context_feed, rho);
    auto loss = train::total_loss(t, roll, batch.target_rows, q_ctx, w, samples.size());
    t.backward(loss.total);
    std::vector<double> analytic;
    for (const auto& g : bind.gradients())
        analytic.insert(analytic.end(), g.values().begin(), g.values().end());

    auto rep = ad::finite_diff_check(loss_value, point, analytic, 1e-6, 1e-3);
    CHECK_MESSAGE(rep.pass, "max rel err ", rep.max_rel_error, " at ", rep.worst_index);
}
