#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "stgnp/ad/adam.hpp"
#include "stgnp/ad/checkpoint.hpp"
#include "stgnp/ad/gradcheck.hpp"
#include "stgnp/ad/mlp.hpp"
#include "stgnp/train/schedule.hpp"

using namespace stgnp;
using namespace stgnp::ad;

TEST_CASE("zero-weight mlp with identity output maps everything to zero") {
    ParamStore store;
    Rng rng(1);
    Mlp net = Mlp::make(store, "z", {3, 4, 2}, Activation::relu, Activation::identity, rng);
    for (auto& a : store.arrays())
        for (std::size_t i = 0; i < a.numel(); ++i) a[i] = 0.0;
    Tape t;
    TapeBinding bind(t, store);
    Var x = t.leaf(Array({2, 3}, {1, 2, 3, -1, -2, -3}));
    Var y = net.forward(t, bind, x);
    for (std::size_t i = 0; i < t.val(y).numel(); ++i) CHECK(t.val(y)[i] == 0.0);
}

TEST_CASE("single-layer identity-weight net reproduces its input") {
    ParamStore store;
    Rng rng(1);
    Mlp net = Mlp::make(store, "id", {2, 2}, Activation::relu, Activation::identity, rng);
    Array& w = store.array(0);
    w[0] = 1; w[1] = 0; w[2] = 0; w[3] = 1;
    Array& b = store.array(1);
    b[0] = 0; b[1] = 0;
    Tape t;
    TapeBinding bind(t, store);
    Var y = net.forward(t, bind, t.leaf(Array({1, 2}, {1, 2})));
    CHECK(t.val(y).values() == std::vector<double>{1, 2});
}

TEST_CASE("mlp input width mismatch raises a dimension error") {
    ParamStore store;
    Rng rng(1);
    Mlp net = Mlp::make(store, "m", {3, 2}, Activation::relu, Activation::identity, rng);
    Tape t;
    TapeBinding bind(t, store);
    CHECK_THROWS_AS(net.forward(t, bind, t.leaf(Array({1, 4}))), dim_error);
}

TEST_CASE("mlp gradients w.r.t. weights match central differences") {
    ParamStore store;
    Rng rng(42);
    Mlp net = Mlp::make(store, "g", {3, 5, 2}, Activation::tanh, Activation::softplus, rng);
    Array input({4, 3});
    for (std::size_t i = 0; i < input.numel(); ++i) input[i] = rng.uniform(-1.5, 1.5);

    auto flatten = [&]() {
        std::vector<double> flat;
        for (const Array& a : store.arrays())
            flat.insert(flat.end(), a.values().begin(), a.values().end());
        return flat;
    };
    auto run_loss = [&](const std::vector<double>& flat) {
        ParamStore s2;
        Rng r2(42);
        Mlp n2 = Mlp::make(s2, "g", {3, 5, 2}, Activation::tanh, Activation::softplus, r2);
        std::size_t off = 0;
        for (auto& a : s2.arrays())
            for (std::size_t i = 0; i < a.numel(); ++i) a[i] = flat[off++];
        Tape t;
        TapeBinding bind(t, s2);
        return t.val(sum(t, square(t, n2.forward(t, bind, t.leaf(input)))))[0];
    };

    Tape t;
    TapeBinding bind(t, store);
    Var loss = sum(t, square(t, net.forward(t, bind, t.leaf(input))));
    t.backward(loss);
    std::vector<double> analytic;
    for (const Array& g : bind.gradients())
        analytic.insert(analytic.end(), g.values().begin(), g.values().end());

    auto rep = finite_diff_check(run_loss, flatten(), analytic, 1e-6, 1e-4);
    CHECK_MESSAGE(rep.pass, "max rel err ", rep.max_rel_error);
}

TEST_CASE("adam first step moves a unit-gradient scalar by about -lr") {
    ParamStore store;
    store.add("w", Array::scalar(0.0));
    Adam opt(AdamConfig{.learning_rate = 0.01, .weight_decay = 0.0});
    opt.step(store, {Array::scalar(1.0)});
    CHECK(store.array(0)[0] == doctest::Approx(-0.01).epsilon(1e-6));
}

TEST_CASE("adam with zero gradients and zero decay is the identity") {
    ParamStore store;
    store.add("w", Array({2, 2}, {1, -2, 3, 4.5}));
    const Array before = store.array(0);
    Adam opt(AdamConfig{});
    for (int i = 0; i < 5; ++i) opt.step(store, {Array({2, 2})});
    CHECK(store.array(0) == before);
}

TEST_CASE("decoupled weight decay shrinks parameters multiplicatively") {
    ParamStore store;
    store.add("w", Array::scalar(1.0));
    Adam opt(AdamConfig{.learning_rate = 0.01, .weight_decay = 0.1});
    opt.step(store, {Array::scalar(0.0)});
    CHECK(store.array(0)[0] == doctest::Approx(0.999).epsilon(1e-12));
}

TEST_CASE("adam aborts on NaN gradients naming the leaf") {
    ParamStore store;
    store.add("net.bias", Array::scalar(1.0));
    Adam opt(AdamConfig{});
    Array bad = Array::scalar(std::nan(""));
    CHECK_THROWS_WITH_AS(opt.step(store, {bad}), doctest::Contains("net.bias"), divergence_error);
}

TEST_CASE("plateau schedule fires after the configured patience") {
    train::PlateauSchedule sched(0.01, 2.0, 10, 1e-5);
    sched.observe(1.0);  // improvement (from +inf)
    for (int i = 0; i < 9; ++i) {
        CHECK_FALSE(sched.observe(2.0));
        CHECK(sched.lr() == 0.01);
    }
    CHECK(sched.observe(2.0));  // 10th bad epoch
    CHECK(sched.lr() == doctest::Approx(0.005));

    // floor
    train::PlateauSchedule floor(2e-5, 2.0, 1, 1e-5);
    floor.observe(1.0);
    floor.observe(2.0);
    CHECK(floor.lr() == doctest::Approx(1e-5));
    floor.observe(2.0);
    CHECK(floor.lr() == doctest::Approx(1e-5));
}

TEST_CASE("halving schedule halves every period") {
    train::HalvingSchedule sched(0.01, 100, 1e-5);
    for (int e = 1; e <= 100; ++e) sched.observe_epoch(e);
    CHECK(sched.lr() == doctest::Approx(0.005));
    for (int e = 101; e <= 200; ++e) sched.observe_epoch(e);
    CHECK(sched.lr() == doctest::Approx(0.0025));
}

TEST_CASE("checkpoint round-trips parameters and metadata bit-exactly") {
    ParamStore store;
    Rng rng(3);
    Mlp::make(store, "enc", {3, 4, 2}, Activation::relu, Activation::identity, rng);
    Checkpoint ck = Checkpoint::from_store(store);
    ck.set_meta("model.latent_dim", "5");
    ck.set_meta("norm.time_scale", "10.0");

    const auto stem = std::filesystem::temp_directory_path() / "stgnp_ck_test";
    ck.save(stem);
    Checkpoint back = Checkpoint::load(stem);
    CHECK(back.meta("model.latent_dim") == "5");
    REQUIRE(back.arrays.size() == store.size());
    for (std::size_t i = 0; i < back.arrays.size(); ++i) {
        CHECK(back.names[i] == store.name(static_cast<int>(i)));
        CHECK(back.arrays[i] == store.array(static_cast<int>(i)));
    }

    ParamStore restored;
    Rng rng2(3);
    Mlp::make(restored, "enc", {3, 4, 2}, Activation::relu, Activation::identity, rng2);
    for (auto& a : restored.arrays())
        for (std::size_t i = 0; i < a.numel(); ++i) a[i] = 0.0;
    back.restore_into(restored);
    for (std::size_t i = 0; i < store.size(); ++i)
        CHECK(restored.array(static_cast<int>(i)) == store.array(static_cast<int>(i)));
}

TEST_CASE("corrupt checkpoint binary is rejected") {
    ParamStore store;
    store.add("w", Array::scalar(1.0));
    Checkpoint ck = Checkpoint::from_store(store);
    const auto stem = std::filesystem::temp_directory_path() / "stgnp_ck_corrupt";
    ck.save(stem);
    std::ofstream bin(stem.string() + ".bin", std::ios::binary);
    bin << "garbage";
    bin.close();
    CHECK_THROWS_AS(Checkpoint::load(stem), format_error);
}
