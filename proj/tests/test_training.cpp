#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "emrg/data.hpp"
#include "emrg/errors.hpp"
#include "emrg/nn.hpp"
#include "emrg/training.hpp"
#include "test_helpers.hpp"

using namespace emrg;

namespace {

// Two well-separated Gaussian blobs; any sane optimizer nails this.
LabeledSet separable_toy(int per_class, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.1);
    LabeledSet s;
    s.X = MatX(2 * per_class, 2);
    for (int i = 0; i < 2 * per_class; ++i) {
        int y = i < per_class ? 0 : 1;
        double center = y == 0 ? -2.0 : 2.0;
        s.X(i, 0) = static_cast<Scalar>(center + noise(rng));
        s.X(i, 1) = static_cast<Scalar>(-center + noise(rng));
        s.y.push_back(y);
    }
    return s;
}

TrainedCandidate with_loss(double loss) {
    TrainedCandidate c;
    c.val_loss = loss;
    return c;
}

} // namespace

TEST_SUITE("training") {

TEST_CASE("zero learning rate returns the init bitwise") {
    ModelSpec spec = testutil::tiny_spec(2, 4, 2);
    ParameterSet init = init_model(spec, 5);
    LabeledSet toy = separable_toy(10, 3);
    HyperConfig h;
    h.learning_rate = 0.0;
    h.epochs = 3;
    TrainedCandidate c = train_candidate(spec, init, toy, toy, h);
    CHECK(testutil::bitwise_equal(c.params, init));
    CHECK(std::isfinite(c.val_loss));
}

TEST_CASE("separable two-class toy converges within 200 epochs") {
    ModelSpec spec = testutil::tiny_spec(2, 8, 2);
    ParameterSet init = init_model(spec, 7);
    LabeledSet toy = separable_toy(30, 11);
    HyperConfig h;
    h.learning_rate = 0.01;
    h.epochs = 200;
    TrainedCandidate c = train_candidate(spec, init, toy, toy, h);
    Prediction pred = forward(c.params, spec.activation, toy.X);
    CHECK(accuracy(pred.predicted_class, toy.y) > 0.99);
    CHECK(c.val_accuracy > 0.99);
}

TEST_CASE("identical config and seed trains bit-identical params") {
    ModelSpec spec = testutil::tiny_spec(2, 4, 2);
    ParameterSet init = init_model(spec, 9);
    LabeledSet toy = separable_toy(20, 4);
    HyperConfig h;
    h.epochs = 5;
    h.seed = 42;
    TrainedCandidate a = train_candidate(spec, init, toy, toy, h, 17);
    TrainedCandidate b = train_candidate(spec, init, toy, toy, h, 17);
    CHECK(testutil::bitwise_equal(a.params, b.params));
    CHECK(a.val_loss == b.val_loss);

    HyperConfig other = h;
    other.seed = 43; // different shuffle order
    TrainedCandidate c = train_candidate(spec, init, toy, toy, other, 17);
    CHECK_FALSE(testutil::bitwise_equal(a.params, c.params));
}

TEST_CASE("diverging run throws and names the config") {
    // tanh keeps saturated units alive (no dead-relu escape hatch), and the
    // contradictory validation pair guarantees one label gets probability 0
    // once the exploded weights drive the margins to infinity.
    ModelSpec spec = testutil::tiny_spec(2, 4, 2, Activation::tanh);
    ParameterSet init = init_model(spec, 1);
    LabeledSet train = separable_toy(20, 2);
    LabeledSet val = separable_toy(4, 6);
    val.X.row(1) = val.X.row(0);
    val.y[1] = 1 - val.y[0];
    HyperConfig h;
    h.learning_rate = 1e6;
    h.epochs = 10;
    CHECK_THROWS_WITH_AS(train_candidate(spec, init, train, val, h),
                         doctest::Contains("learning_rate=1e+06"), divergence_error);
}

TEST_CASE("train_candidate validates inputs") {
    ModelSpec spec = testutil::tiny_spec(2, 4, 2);
    ParameterSet init = init_model(spec, 1);
    LabeledSet toy = separable_toy(10, 2);
    LabeledSet empty;
    empty.X = MatX(0, 2);
    HyperConfig h;
    CHECK_THROWS_AS(train_candidate(spec, init, empty, toy, h), empty_dataset_error);
    CHECK_THROWS_AS(train_candidate(spec, init, toy, empty, h), empty_dataset_error);

    HyperConfig bad = h;
    bad.learning_rate = -0.1;
    CHECK_THROWS_AS(train_candidate(spec, init, toy, toy, bad), invalid_parameter_error);
    bad = h;
    bad.momentum = 1.0;
    CHECK_THROWS_AS(train_candidate(spec, init, toy, toy, bad), invalid_parameter_error);
    bad = h;
    bad.epochs = 0;
    CHECK_THROWS_AS(train_candidate(spec, init, toy, toy, bad), invalid_parameter_error);
    bad = h;
    bad.batch_size = 0;
    CHECK_THROWS_AS(train_candidate(spec, init, toy, toy, bad), invalid_parameter_error);

    ParameterSet wrong = init_model(testutil::tiny_spec(3, 4, 2), 1);
    CHECK_THROWS_AS(train_candidate(spec, wrong, toy, toy, h), incompatible_models_error);
}

TEST_CASE("select_expert is argmin with lowest-index ties") {
    CHECK(select_expert({with_loss(0.4)}) == 0);
    CHECK(select_expert({with_loss(0.5), with_loss(0.2), with_loss(0.9)}) == 1);
    CHECK(select_expert({with_loss(0.3), with_loss(0.3)}) == 0);
    double inf = std::numeric_limits<double>::infinity();
    CHECK(select_expert({with_loss(inf), with_loss(0.7)}) == 1);
    CHECK_THROWS_AS(select_expert({}), empty_pool_error);
    CHECK_THROWS_AS(select_expert({with_loss(inf), with_loss(inf)}), divergence_error);
}

TEST_CASE("build_pool trains K*M candidates and keeps one expert per domain") {
    auto domains = gen_domains(2, 3, 6, 40, 20, 10, ShiftConfig::identity(), 21);
    ModelSpec spec = testutil::tiny_spec(6, 8, 3);
    std::vector<HyperConfig> sweep(2);
    sweep[0].epochs = 3;
    sweep[1].epochs = 3;
    sweep[1].seed = 1;

    std::uint64_t before = backward_call_count();
    ExpertPool pool = build_pool(domains, spec, sweep, 77);
    std::uint64_t delta = backward_call_count() - before;
    // 2 domains x 2 sweep entries x 3 epochs x ceil(40/32)=2 steps
    CHECK(delta == 2 * 2 * 3 * 2);

    REQUIRE(pool.size() == 2);
    CHECK(pool.experts[0].domain == "domain0");
    CHECK(pool.experts[1].domain == "domain1");
    CHECK(matches_spec(pool.init, spec));
    for (const Expert& e : pool.experts) {
        CHECK(matches_spec(e.params, spec));
        CHECK(std::isfinite(e.val_loss));
        CHECK(e.val_accuracy >= 0.0);
        CHECK(e.val_accuracy <= 1.0);
    }
    CHECK(pool.domain_names() == std::vector<std::string>{"domain0", "domain1"});
    CHECK(pool.expert_params().size() == 2);
    CHECK(pool.expert_params()[1] == &pool.experts[1].params);
}

TEST_CASE("build_pool with a zero-lr sweep keeps every expert at the shared init") {
    auto domains = gen_domains(2, 3, 6, 30, 15, 10, ShiftConfig::identity(), 8);
    ModelSpec spec = testutil::tiny_spec(6, 4, 3);
    HyperConfig frozen;
    frozen.learning_rate = 0.0;
    frozen.epochs = 1;
    ExpertPool pool = build_pool(domains, spec, {frozen}, 31);
    for (const Expert& e : pool.experts) {
        CHECK(testutil::bitwise_equal(e.params, pool.init));
    }
}

TEST_CASE("build_pool is deterministic") {
    auto domains = gen_domains(2, 3, 6, 40, 20, 10, ShiftConfig(), 5);
    ModelSpec spec = testutil::tiny_spec(6, 8, 3);
    std::vector<HyperConfig> sweep(1);
    sweep[0].epochs = 4;
    ExpertPool a = build_pool(domains, spec, sweep, 13);
    ExpertPool b = build_pool(domains, spec, sweep, 13);
    CHECK(testutil::bitwise_equal(a.init, b.init));
    for (int k = 0; k < a.size(); ++k) {
        CHECK(testutil::bitwise_equal(a.experts[static_cast<std::size_t>(k)].params,
                                      b.experts[static_cast<std::size_t>(k)].params));
        CHECK(a.experts[static_cast<std::size_t>(k)].val_loss ==
              b.experts[static_cast<std::size_t>(k)].val_loss);
    }
    ExpertPool c = build_pool(domains, spec, sweep, 14);
    CHECK_FALSE(testutil::bitwise_equal(a.init, c.init));
}

TEST_CASE("build_pool validation") {
    auto domains = gen_domains(2, 3, 6, 20, 10, 10, ShiftConfig::identity(), 2);
    ModelSpec spec = testutil::tiny_spec(6, 4, 3);
    std::vector<DomainDataset> one(domains.begin(), domains.begin() + 1);
    CHECK_THROWS_AS(build_pool(one, spec, default_sweep(), 1), invalid_parameter_error);
    CHECK_THROWS_AS(build_pool(domains, spec, {}, 1), config_error);
}

TEST_CASE("experts beat the majority-class baseline on their own domain") {
    ModelSpec spec = testutil::tiny_spec(8, 16, 3);
    HyperConfig h;
    h.epochs = 20;
    int good_seeds = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto domains = gen_domains(2, 3, 8, 150, 60, 10, ShiftConfig(), seed);
        ExpertPool pool = build_pool(domains, spec, {h}, seed);
        bool all_beat = true;
        for (std::size_t k = 0; k < domains.size(); ++k) {
            std::vector<int> counts(3, 0);
            for (int y : domains[k].val.y) ++counts[static_cast<std::size_t>(y)];
            double majority =
                static_cast<double>(*std::max_element(counts.begin(), counts.end())) /
                domains[k].val.size();
            if (pool.experts[k].val_accuracy <= majority) all_beat = false;
        }
        if (all_beat) ++good_seeds;
    }
    CHECK(good_seeds >= 9);
}

} // TEST_SUITE

