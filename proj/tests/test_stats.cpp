#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <vector>

#include "mural/stats.hpp"

using namespace mural;

// Reference p-values frozen from an independent statistical package
// (asymptotic two-sided normal approximation, tie corrected, no continuity
// correction for the rank-sum test; Pearson chi-square without Yates).

TEST_CASE("normal survival function") {
    CHECK(stats::normal_sf(0.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(stats::normal_sf(1.0) == doctest::Approx(0.15865525393145707).epsilon(1e-12));
    CHECK(stats::normal_sf(-1.5) == doctest::Approx(0.93319279873114191).epsilon(1e-12));
    CHECK(stats::normal_sf(2.33) == doctest::Approx(0.0099030755591642452).epsilon(1e-12));
    CHECK(stats::normal_sf(5.0) == doctest::Approx(2.8665157187919328e-07).epsilon(1e-9));
}

TEST_CASE("chi-square survival function") {
    CHECK(stats::chi_square_sf(1.0, 1) == doctest::Approx(0.31731050786291115).epsilon(1e-10));
    CHECK(stats::chi_square_sf(5.0, 3) == doctest::Approx(0.17179714429673351).epsilon(1e-10));
    CHECK(stats::chi_square_sf(20.0, 10) == doctest::Approx(0.029252688076961124).epsilon(1e-10));
    CHECK(stats::chi_square_sf(0.5, 4) == doctest::Approx(0.97350097883925613).epsilon(1e-10));
    CHECK(stats::chi_square_sf(100.0, 50) == doctest::Approx(3.4549313829848709e-05).epsilon(1e-8));
}

TEST_CASE("rank-sum test matches reference p-values") {
    const std::vector<double> a1{1, 2, 3}, b1{4, 5, 6};
    CHECK(stats::rank_sum_test(a1, b1).p_value ==
          doctest::Approx(0.049534613435626706).epsilon(1e-10));

    const std::vector<double> a2{1.5, 2.5, 3.5, 10.0, 0.5}, b2{4.0, 5.0, 6.0, 7.0};
    CHECK(stats::rank_sum_test(a2, b2).p_value ==
          doctest::Approx(0.14164469029513679).epsilon(1e-10));

    const std::vector<double> a3{1, 1, 2, 2, 3}, b3{2, 3, 3, 4, 4};  // ties
    CHECK(stats::rank_sum_test(a3, b3).p_value ==
          doctest::Approx(0.040608973404253651).epsilon(1e-10));

    const std::vector<double> a4{0.1, 0.2, 0.3, 0.4, 0.5, 0.6},
        b4{0.35, 0.45, 0.55, 0.65, 0.75, 0.85};
    CHECK(stats::rank_sum_test(a4, b4).p_value ==
          doctest::Approx(0.054663935891675154).epsilon(1e-10));

    // degenerate inputs
    const std::vector<double> empty, ones{1.0, 1.0};
    CHECK_FALSE(stats::rank_sum_test(empty, b1).valid);
    CHECK_FALSE(stats::rank_sum_test(ones, ones).valid);

    // symmetry: swapping samples flips the sign, keeps the p-value
    const auto fwd = stats::rank_sum_test(a1, b1);
    const auto rev = stats::rank_sum_test(b1, a1);
    CHECK(fwd.p_value == doctest::Approx(rev.p_value).epsilon(1e-12));
    CHECK(fwd.statistic == doctest::Approx(-rev.statistic).epsilon(1e-12));
}

TEST_CASE("chi-square independence matches reference") {
    using Table = std::vector<std::vector<std::int64_t>>;
    {
        const Table t{{10, 20}, {30, 5}};
        const auto r = stats::chi_square_independence(t);
        REQUIRE(r.valid);
        CHECK(r.statistic == doctest::Approx(18.726190476190474).epsilon(1e-10));
        CHECK(r.p_value == doctest::Approx(1.5089565704354248e-05).epsilon(1e-8));
    }
    {
        const Table t{{5, 5, 5}, {5, 10, 20}};
        const auto r = stats::chi_square_independence(t);
        REQUIRE(r.valid);
        CHECK(r.statistic == doctest::Approx(3.1746031746031744).epsilon(1e-10));
        CHECK(r.p_value == doctest::Approx(0.20447663029784297).epsilon(1e-8));
    }
    {
        const Table t{{3, 7}, {9, 1}, {4, 4}};
        const auto r = stats::chi_square_independence(t);
        REQUIRE(r.valid);
        CHECK(r.statistic == doctest::Approx(7.583333333333333).epsilon(1e-10));
        CHECK(r.p_value == doctest::Approx(0.022557973880056065).epsilon(1e-8));
    }
    {
        // an all-zero column is dropped; one live column left -> invalid
        const Table t{{10, 0}, {20, 0}};
        CHECK_FALSE(stats::chi_square_independence(t).valid);
    }
}

TEST_CASE("midranks average ties") {
    const std::vector<double> v{3.0, 1.0, 3.0, 2.0};
    const auto r = stats::midranks(v);
    CHECK(r[0] == doctest::Approx(3.5));
    CHECK(r[1] == doctest::Approx(1.0));
    CHECK(r[2] == doctest::Approx(3.5));
    CHECK(r[3] == doctest::Approx(2.0));
}
