#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "stgnp/graph/adjacency.hpp"
#include "stgnp/graph/dataset.hpp"
#include "stgnp/graph/normalize.hpp"
#include "stgnp/graph/split.hpp"
#include "stgnp/sim/generate.hpp"

using namespace stgnp;
using namespace stgnp::graph;

TEST_CASE("full spatial adjacency has no self-loops, diagonal temporal is identity") {
    auto spec = build_adjacency(SpatialKind::full, TemporalKind::diagonal, 2);
    CHECK(spec.spatial == std::vector<std::uint8_t>{0, 1, 1, 0});
    CHECK(spec.temporal == std::vector<std::uint8_t>{1, 0, 0, 1});

    auto single = build_adjacency(SpatialKind::full, TemporalKind::diagonal, 1);
    CHECK(single.spatial == std::vector<std::uint8_t>{0});
    CHECK(single.temporal == std::vector<std::uint8_t>{1});
    CHECK(single.n_spatial_edges() == 0);
}

TEST_CASE("custom spatial matrix with a self-loop is rejected") {
    std::vector<std::uint8_t> bad = {1, 0, 0, 0};
    CHECK_THROWS_AS(build_adjacency(SpatialKind::custom, TemporalKind::diagonal, 2, &bad),
                    contract_error);
}

TEST_CASE("a generated preferential-attachment matrix is accepted verbatim") {
    auto m = sim::barabasi_albert(10, 5, std::uint64_t{3});
    auto spec = build_adjacency(SpatialKind::custom, TemporalKind::diagonal, 10, &m);
    CHECK(spec.spatial == m);
}

TEST_CASE("edge enumeration is row-major over the boolean matrix and stable") {
    auto spec = build_adjacency(SpatialKind::full, TemporalKind::diagonal, 3);
    auto edges = spec.spatial_edges();
    REQUIRE(edges.size() == 6);
    CHECK(edges[0].src == 0);
    CHECK(edges[0].dst == 1);
    CHECK(edges[1].src == 0);
    CHECK(edges[1].dst == 2);
    CHECK(edges[5].src == 2);
    CHECK(edges[5].dst == 1);
    auto again = spec.spatial_edges();
    for (std::size_t i = 0; i < edges.size(); ++i) {
        CHECK(edges[i].src == again[i].src);
        CHECK(edges[i].dst == again[i].dst);
    }
}

TEST_CASE("context mask is equally spaced, starts at frame 0") {
    CHECK(make_context_mask(9, 1.0 / 3.0) == std::vector<int>{0, 4, 8});
    CHECK(make_context_mask(2, 1.0) == std::vector<int>{0, 1});
    auto m100 = make_context_mask(100, 1.0 / 3.0);
    CHECK(m100.size() == 34);
    CHECK(m100.front() == 0);
    CHECK(m100.back() == 99);
    CHECK_THROWS_AS(make_context_mask(10, 0.0), contract_error);
    CHECK_THROWS_AS(make_context_mask(10, 1.5), contract_error);
    CHECK_THROWS_AS(make_context_mask(1, 0.5), contract_error);
}

TEST_CASE("sample split follows 20% test then 20% validation of the rest") {
    auto s = split_dataset(500, 11);
    CHECK(s.train.size() == 320);
    CHECK(s.val.size() == 80);
    CHECK(s.test.size() == 100);

    auto tiny = split_dataset(5, 1);
    CHECK(tiny.train.size() == 3);
    CHECK(tiny.val.size() == 1);
    CHECK(tiny.test.size() == 1);

    auto again = split_dataset(500, 11);
    CHECK(s.train == again.train);
    CHECK(s.val == again.val);
    CHECK(s.test == again.test);

    // disjoint and covering
    std::vector<int> all;
    all.insert(all.end(), s.train.begin(), s.train.end());
    all.insert(all.end(), s.val.begin(), s.val.end());
    all.insert(all.end(), s.test.begin(), s.test.end());
    std::sort(all.begin(), all.end());
    for (int i = 0; i < 500; ++i) CHECK(all[static_cast<std::size_t>(i)] == i);

    CHECK_THROWS_AS(split_dataset(4, 1), contract_error);
}

TEST_CASE("z-score fit uses population std and floors constants") {
    graph::MultiplexDataset ds;
    ds.system = "toy";
    ds.adjacency = build_adjacency(SpatialKind::full, TemporalKind::diagonal, 1);
    ds.times = {0.0, 1.0};
    ds.feature_names = {"a", "b"};
    ds.feature_units = {"1", "1"};
    // 2 samples x 2 frames x 1 node x 2 features; feature 0 = {0,2}, feature 1 constant 5
    ds.node_features = Array({2, 2, 1, 2}, {0, 5, 0, 5, 2, 5, 2, 5});
    ds.extra_node_features = Array({2, 0, 1, 2});
    ds.spatial_edge_attrs = Array({2, 2, 0, 1});
    ds.temporal_edge_attrs = Array({2, 1, 1, 1}, {1, 1});
    ds.globals = Array({2, 0});

    auto st = zscore_fit(ds, {0, 1});
    CHECK(st.node_mean[0] == doctest::Approx(1.0));
    CHECK(st.node_std[0] == doctest::Approx(1.0));
    CHECK(zscore_apply(st, 0, 2.0) == doctest::Approx(1.0));

    CHECK(st.node_std[1] == doctest::Approx(1e-8));
    CHECK(zscore_apply(st, 1, 5.0) == doctest::Approx(0.0));

    // round-trip within 1e-12
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
        const double x = rng.uniform(-10, 10);
        CHECK(zscore_invert(st, 0, zscore_apply(st, 0, x)) == doctest::Approx(x).epsilon(1e-12));
    }

    // statistics must depend only on the listed training samples
    auto st_train = zscore_fit(ds, {0});
    auto st_all = zscore_fit(ds, {0, 1});
    CHECK(st_train.node_mean[0] != st_all.node_mean[0]);

    NormalizationStats unfitted;
    CHECK_THROWS_AS(zscore_invert(unfitted, 0, 1.0), state_error);
}

TEST_CASE("dataset directory round-trips bit-exactly") {
    auto ds = sim::generate_dataset(sim::SystemKind::pendulum, 6, 77);
    const auto dir = std::filesystem::temp_directory_path() / "stgnp_ds_roundtrip";
    std::filesystem::remove_all(dir);
    save_dataset(ds, dir);
    auto back = load_dataset(dir);
    CHECK(back.node_features == ds.node_features);
    CHECK(back.extra_node_features == ds.extra_node_features);
    CHECK(back.spatial_edge_attrs == ds.spatial_edge_attrs);
    CHECK(back.temporal_edge_attrs == ds.temporal_edge_attrs);
    CHECK(back.times == ds.times);
    CHECK(back.extra_times == ds.extra_times);
    CHECK(back.adjacency.spatial == ds.adjacency.spatial);
    CHECK(back.labels.empty());
    CHECK(back.feature_names == ds.feature_names);
}

TEST_CASE("manifest node count inconsistent with adjacency is a format error") {
    auto ds = sim::generate_dataset(sim::SystemKind::pendulum, 5, 1);
    const auto dir = std::filesystem::temp_directory_path() / "stgnp_ds_badmanifest";
    std::filesystem::remove_all(dir);
    save_dataset(ds, dir);
    // rewrite n_nodes to 3 while the stored matrices stay 2x2
    std::ifstream in(dir / "manifest.txt");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    const auto pos = text.find("n_nodes = 2");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 11, "n_nodes = 3");
    std::ofstream out(dir / "manifest.txt");
    out << text;
    out.close();
    CHECK_THROWS_AS(load_dataset(dir), format_error);
}

TEST_CASE("labels are optional in the directory format") {
    auto ds = sim::generate_dataset(sim::SystemKind::pendulum, 5, 1);
    CHECK(ds.labels.empty());
    const auto dir = std::filesystem::temp_directory_path() / "stgnp_ds_nolabels";
    std::filesystem::remove_all(dir);
    save_dataset(ds, dir);
    CHECK_FALSE(std::filesystem::exists(dir / "labels.bin"));
    auto back = load_dataset(dir);
    CHECK(back.labels.empty());

    sim::GenerateOptions opt;
    opt.label = 3;
    auto labeled = sim::generate_dataset(sim::SystemKind::pendulum, 5, 1, opt);
    save_dataset(labeled, dir);
    auto back2 = load_dataset(dir);
    REQUIRE(back2.labels.size() == 5);
    CHECK(back2.labels[0] == 3);
}
