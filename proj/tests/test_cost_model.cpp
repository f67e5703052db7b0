#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "asymlift/cost_model.hpp"
#include "asymlift/rng.hpp"
#include "testutil.hpp"

using namespace asymlift;
using testutil::weighted;

TEST_CASE("estimate_cpp: hand values") {
    // Two H records, weights 1: (C_H=50, e=+100), (C_H=150, e=+100) -> 200/200
    std::vector<WeightedRecord> recs{weighted(100, 50, 0), weighted(100, 150, 0)};
    CHECK(estimate_cpp(recs, Scenario::heaviness, 2) == Catch::Approx(1.0).margin(1e-15));

    // Single L record (C_L=30, e=-60) -> 30/60 with the |e| denominator
    std::vector<WeightedRecord> l{weighted(-60, 0, 30)};
    CHECK(estimate_cpp(l, Scenario::lightness, 1) == Catch::Approx(0.5).margin(1e-15));

    // All records H -> lightness estimate has no data
    CHECK_THROWS_AS(estimate_cpp(recs, Scenario::lightness, 1), Error);
    CHECK(count_scenario_obs(recs, Scenario::heaviness) == 2);
    CHECK(count_scenario_obs(recs, Scenario::lightness) == 0);
}

TEST_CASE("estimate_cpp respects min_obs") {
    std::vector<WeightedRecord> recs{weighted(100, 50, 0), weighted(50, 20, 0),
                                     weighted(30, 10, 0)};
    CHECK_THROWS_AS(estimate_cpp(recs, Scenario::heaviness, 4), Error);
    CHECK_NOTHROW(estimate_cpp(recs, Scenario::heaviness, 3));
}

TEST_CASE("estimate_cpp is scale equivariant in costs") {
    Rng rng(31);
    std::vector<WeightedRecord> recs;
    for (int i = 0; i < 20; ++i)
        recs.push_back(weighted(rng.uniform(1.0, 500.0), rng.uniform(0.0, 900.0), 0.0,
                                1 + static_cast<int>(rng.uniform(0.0, 9.0))));
    const double base = estimate_cpp(recs, Scenario::heaviness, 4);
    for (double c : {0.5, 3.0, 1000.0}) {
        auto scaled = recs;
        for (auto& w : scaled) w.cost_h_clean *= c;
        CHECK(estimate_cpp(scaled, Scenario::heaviness, 4) ==
              Catch::Approx(c * base).epsilon(1e-12));
    }
}

TEST_CASE("weight annotation equals physical duplication") {
    Rng rng(37);
    std::vector<WeightedRecord> annotated;
    std::vector<WeightedRecord> duplicated;
    for (int i = 0; i < 15; ++i) {
        const double e = rng.uniform(-400.0, 400.0);
        const double ch = rng.uniform(0.0, 300.0);
        const double cl = rng.uniform(0.0, 300.0);
        const int w = 1 + static_cast<int>(rng.uniform(0.0, 10.0));
        annotated.push_back(weighted(e, ch, cl, w));
        for (int c = 0; c < w; ++c) duplicated.push_back(weighted(e, ch, cl, 1));
    }
    for (auto scenario : {Scenario::heaviness, Scenario::lightness}) {
        CHECK(estimate_cpp(annotated, scenario, 1) ==
              Catch::Approx(estimate_cpp(duplicated, scenario, 1)).epsilon(1e-12));
    }
}

TEST_CASE("estimate_sigma: hand values and weighting behavior") {
    // errors {-100, +100}, equal weights: sample std = sqrt(20000) = 141.42...
    std::vector<WeightedRecord> recs{weighted(-100, 0, 10), weighted(100, 10, 0)};
    CHECK(estimate_sigma(recs) == Catch::Approx(141.4213562373095).epsilon(1e-12));

    // Uniformly doubling the weights leaves sigma unchanged.
    std::vector<WeightedRecord> doubled{weighted(-100, 0, 10, 2), weighted(100, 10, 0, 2)};
    CHECK(estimate_sigma(doubled) == Catch::Approx(141.4213562373095).epsilon(1e-12));

    // Identical errors: zero spread.
    std::vector<WeightedRecord> flat{weighted(50, 1, 0), weighted(50, 2, 0)};
    CHECK_THROWS_AS(estimate_sigma(flat), Error);

    std::vector<WeightedRecord> one{weighted(50, 1, 0)};
    CHECK_THROWS_AS(estimate_sigma(one), Error);
}

TEST_CASE("uniform weights cancel for any level") {
    Rng rng(41);
    std::vector<WeightedRecord> base;
    for (int i = 0; i < 25; ++i) base.push_back(weighted(rng.gaussian(0.0, 120.0), 1.0, 1.0, 1));
    const double sigma1 = estimate_sigma(base);
    for (int level : {2, 5, 9}) {
        auto scaled = base;
        for (auto& w : scaled) w.weight = level;
        CHECK(estimate_sigma(scaled) == Catch::Approx(sigma1).epsilon(1e-12));
    }
}

TEST_CASE("regret cost is the V curve") {
    CostProfile p;
    p.cpp_l_hat = 1.0;
    p.cpp_h_hat = 5.0;
    p.sigma = 1.0;
    CHECK(regret_cost(0.0, p) == 0.0);
    CHECK(regret_cost(-5.0, p) == Catch::Approx(5.0).margin(1e-15));
    CHECK(regret_cost(2.0, p) == Catch::Approx(10.0).margin(1e-15));
}

TEST_CASE("regret cost is nonnegative and piecewise linear") {
    Rng rng(43);
    for (int i = 0; i < 2000; ++i) {
        CostProfile p;
        p.cpp_l_hat = rng.uniform(0.0, 10.0);
        p.cpp_h_hat = rng.uniform(0.0, 10.0);
        p.sigma = 1.0;
        const double e = rng.uniform(-500.0, 500.0);
        const double c = regret_cost(e, p);
        REQUIRE(c >= 0.0);
        REQUIRE(regret_cost(2.0 * e, p) == Catch::Approx(2.0 * c).margin(1e-9));
        if (e != 0.0 && p.cpp_l_hat > 0 && p.cpp_h_hat > 0) REQUIRE(c > 0.0);
    }
}

TEST_CASE("estimate_profile bundles estimates and counts") {
    std::vector<WeightedRecord> recs;
    Rng rng(47);
    for (int i = 0; i < 30; ++i) {
        const double e = rng.gaussian(0.0, 100.0);
        recs.push_back(weighted(e, e > 0 ? 5.0 * e : 0.0, e < 0 ? -1.0 * e : 0.0));
    }
    const CostProfile p = estimate_profile("S1", recs, 4);
    CHECK(p.station_id == "S1");
    CHECK(p.cpp_h_hat == Catch::Approx(5.0).epsilon(1e-9));
    CHECK(p.cpp_l_hat == Catch::Approx(1.0).epsilon(1e-9));
    CHECK(p.sigma > 0.0);
    CHECK(p.n_h_obs + p.n_l_obs == 30);

    const CostProfile back = profile_from_json(profile_to_json(p));
    CHECK(back.station_id == p.station_id);
    CHECK(back.cpp_h_hat == p.cpp_h_hat);
    CHECK(back.sigma == p.sigma);
    CHECK(back.n_l_obs == p.n_l_obs);
}
