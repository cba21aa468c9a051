#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "mural/missingness.hpp"
#include "mural/rng.hpp"

using namespace mural;

namespace {

Schema continuous_schema(int n) {
    std::vector<ColumnSpec> cols;
    for (int i = 0; i < n; ++i)
        cols.push_back({"c" + std::to_string(i), ColumnKind::continuous(),
                        MissingnessHint::Auto, "NA"});
    return Schema(std::move(cols));
}

}  // namespace

TEST_CASE("detect_mnar flags threshold-driven masking") {
    // c0 masked exactly when c1 exceeds its median
    const std::size_t n = 400;
    Rng rng(42, 0);
    Dataset d(continuous_schema(3), n);
    std::vector<double> c1(n);
    for (std::size_t r = 0; r < n; ++r) {
        c1[r] = rng.normal();
        d.set_real(0, static_cast<RowIndex>(r), rng.normal());
        d.set_real(1, static_cast<RowIndex>(r), c1[r]);
        d.set_real(2, static_cast<RowIndex>(r), rng.normal());
    }
    std::vector<double> sorted(c1);
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[n / 2];
    for (std::size_t r = 0; r < n; ++r)
        if (c1[r] > median) d.set_missing(0, static_cast<RowIndex>(r));

    const auto profile = detect_mnar(d);
    REQUIRE(profile.columns.size() == 1);
    CHECK(profile.is_mnar(0));
    CHECK(profile.columns[0].p_value < 1e-10);

    // row-order invariance of the adjusted p-value
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = (i * 131 + 17) % n;
    std::sort(perm.begin(), perm.end(), [](std::size_t a, std::size_t b) {
        return (a * 2654435761u) % 1000003 < (b * 2654435761u) % 1000003;
    });
    Dataset shuffled(d.schema(), n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < 3; ++c) {
            if (d.is_missing(c, static_cast<RowIndex>(perm[r]))) continue;
            shuffled.set_real(c, static_cast<RowIndex>(r),
                              d.real(c, static_cast<RowIndex>(perm[r])));
        }
    const auto profile2 = detect_mnar(shuffled);
    REQUIRE(profile2.columns.size() == 1);
    CHECK(profile2.columns[0].p_value ==
          doctest::Approx(profile.columns[0].p_value).epsilon(1e-12));
}

TEST_CASE("detect_mnar keeps coin-masked columns random") {
    std::size_t flagged = 0;
    const int trials = 100;
    for (int trial = 0; trial < trials; ++trial) {
        const std::size_t n = 1000;
        Rng rng(1000 + trial, 0);
        Dataset d(continuous_schema(3), n);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < 3; ++c)
                d.set_real(c, static_cast<RowIndex>(r), rng.normal());
        for (std::size_t r = 0; r < n; ++r)
            if (rng.uniform() < 0.2) d.set_missing(0, static_cast<RowIndex>(r));
        const auto profile = detect_mnar(d);
        REQUIRE(profile.columns.size() == 1);
        if (profile.is_mnar(0)) ++flagged;
    }
    // true false-positive rate is ~alpha; 8/100 leaves room for Monte Carlo
    // noise (binomial at p=0.05)
    CHECK(flagged <= 8);
}

TEST_CASE("detect_mnar conservative type-I rate with Bonferroni") {
    std::size_t flagged = 0;
    const int trials = 200;
    for (int trial = 0; trial < trials; ++trial) {
        const std::size_t n = 300;
        Rng rng(9000 + trial, 0);
        Dataset d(continuous_schema(4), n);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < 4; ++c)
                d.set_real(c, static_cast<RowIndex>(r), rng.normal());
        for (std::size_t r = 0; r < n; ++r)
            if (rng.uniform() < 0.3) d.set_missing(0, static_cast<RowIndex>(r));
        if (detect_mnar(d).is_mnar(0)) ++flagged;
    }
    CHECK(static_cast<double>(flagged) / trials <= 0.05 + 0.03);
}

TEST_CASE("detect_mnar edge cases") {
    SUBCASE("no masked cells gives an empty profile") {
        Dataset d(continuous_schema(2), 20);
        for (std::size_t r = 0; r < 20; ++r) {
            d.set_real(0, static_cast<RowIndex>(r), 1.0 * r);
            d.set_real(1, static_cast<RowIndex>(r), 2.0 * r);
        }
        CHECK(detect_mnar(d).columns.empty());
    }
    SUBCASE("too few masked rows falls back to the hint") {
        std::vector<ColumnSpec> cols{
            {"a", ColumnKind::continuous(), MissingnessHint::ForceMnar, "NA"},
            {"b", ColumnKind::continuous(), MissingnessHint::Auto, "NA"},
        };
        Dataset d(Schema(std::move(cols)), 30);
        Rng rng(5, 0);
        for (std::size_t r = 0; r < 30; ++r) {
            d.set_real(0, static_cast<RowIndex>(r), rng.normal());
            d.set_real(1, static_cast<RowIndex>(r), rng.normal());
        }
        d.set_missing(0, 3);
        d.set_missing(0, 7);
        d.set_missing(1, 11);
        const auto profile = detect_mnar(d);
        REQUIRE(profile.columns.size() == 2);
        CHECK(profile.columns[0].insufficient_data);
        CHECK(profile.is_mnar(0));     // hint forces MNAR
        CHECK(profile.is_random(1));   // Auto hint falls back to Random
        CHECK(profile.columns[1].insufficient_data);
    }
    SUBCASE("alpha outside (0,1) is rejected") {
        Dataset d(continuous_schema(2), 10);
        CHECK_THROWS_AS(detect_mnar(d, 0.0), UserError);
    }
}

TEST_CASE("impute_random_missing fills random columns, keeps MNAR masks") {
    const std::size_t n = 1000;
    Rng rng(77, 0);
    Dataset d(continuous_schema(3), n);
    std::vector<double> truth(n);
    for (std::size_t r = 0; r < n; ++r) {
        const double x = rng.uniform(1.0, 2.0);
        truth[r] = 2.0 * x;
        d.set_real(0, static_cast<RowIndex>(r), x);
        d.set_real(1, static_cast<RowIndex>(r), truth[r]);
        // c2 tracks c0 so its threshold masking is visible to the screens
        d.set_real(2, static_cast<RowIndex>(r), x + 0.1 * rng.normal());
    }
    // 20% MCAR holes in the linear target, threshold MNAR in c2
    Dataset masked = induce_mcar(d, 1, 0.2, 123);
    masked = induce_mnar_threshold(masked, 2, 1.7, Direction::Above);

    const auto profile = detect_mnar(masked);
    REQUIRE(profile.is_random(1));
    REQUIRE(profile.is_mnar(2));

    const auto imputed = impute_random_missing(masked, profile);

    // MNAR masks untouched, observed cells untouched
    CHECK(imputed.missing_count(2) == masked.missing_count(2));
    CHECK(imputed.missing_count(1) == 0);
    for (std::size_t r = 0; r < n; ++r) {
        if (!masked.is_missing(1, static_cast<RowIndex>(r)))
            CHECK(imputed.real(1, static_cast<RowIndex>(r)) ==
                  masked.real(1, static_cast<RowIndex>(r)));
    }

    // median relative error of the filled cells
    std::vector<double> rel;
    for (std::size_t r = 0; r < n; ++r)
        if (masked.is_missing(1, static_cast<RowIndex>(r)))
            rel.push_back(std::fabs(imputed.real(1, static_cast<RowIndex>(r)) - truth[r]) /
                          std::fabs(truth[r]));
    REQUIRE(!rel.empty());
    std::sort(rel.begin(), rel.end());
    CHECK(rel[rel.size() / 2] <= 0.15);
}

TEST_CASE("impute_random_missing with no random columns is the identity") {
    Dataset d(continuous_schema(2), 40);
    Rng rng(8, 0);
    for (std::size_t r = 0; r < 40; ++r) {
        d.set_real(0, static_cast<RowIndex>(r), rng.normal());
        d.set_real(1, static_cast<RowIndex>(r), rng.normal());
    }
    const auto profile = detect_mnar(d);  // empty
    const auto out = impute_random_missing(d, profile);
    CHECK(out.equals(d));
}

TEST_CASE("mean_impute") {
    std::vector<ColumnSpec> cols{
        {"x", ColumnKind::continuous(), MissingnessHint::Auto, "NA"},
        {"b", ColumnKind::binary(), MissingnessHint::Auto, "NA"},
    };
    Dataset d(Schema(std::move(cols)), 4);
    d.set_real(0, 0, 1.0);
    d.set_missing(0, 1);
    d.set_real(0, 2, 3.0);
    d.set_real(0, 3, 2.0);
    d.set_code(1, 0, 0);
    d.set_code(1, 1, 0);
    d.set_code(1, 2, 1);
    d.set_missing(1, 3);

    const auto out = mean_impute(d);
    CHECK(out.real(0, 1) == doctest::Approx(2.0));
    CHECK(out.code(1, 3) == 0);  // mode
    for (std::size_t c = 0; c < 2; ++c) CHECK(out.missing_count(c) == 0);

    const auto identity = mean_impute(out);
    CHECK(identity.equals(out));
}

TEST_CASE("induce_mnar_threshold strictness") {
    Dataset d(continuous_schema(1), 3);
    d.set_real(0, 0, 1.0);
    d.set_real(0, 1, 2.0);
    d.set_real(0, 2, 4.0);
    const auto above = induce_mnar_threshold(d, 0, 3.0, Direction::Above);
    CHECK(above.missing_count(0) == 1);
    CHECK(above.is_missing(0, 2));

    const auto none = induce_mnar_threshold(d, 0, 10.0, Direction::Above);
    CHECK(none.missing_count(0) == 0);

    Dataset s(continuous_schema(1), 3);
    s.set_real(0, 0, -2.0);
    s.set_real(0, 1, 0.0);
    s.set_real(0, 2, 2.0);
    const auto below = induce_mnar_threshold(s, 0, 0.0, Direction::Below);
    CHECK(below.missing_count(0) == 1);
    CHECK(below.is_missing(0, 0));
    CHECK_FALSE(below.is_missing(0, 1));  // strict inequality
}

TEST_CASE("induce_mcar count and determinism") {
    Dataset d(continuous_schema(1), 100);
    for (std::size_t r = 0; r < 100; ++r) d.set_real(0, static_cast<RowIndex>(r), 1.0 * r);

    CHECK(induce_mcar(d, 0, 0.0, 1).missing_count(0) == 0);
    const auto half = induce_mcar(d, 0, 0.5, 1);
    CHECK(half.missing_count(0) == 50);
    const auto again = induce_mcar(d, 0, 0.5, 1);
    CHECK(again.equals(half));
    const auto other = induce_mcar(d, 0, 0.5, 2);
    CHECK_FALSE(other.equals(half));
}
