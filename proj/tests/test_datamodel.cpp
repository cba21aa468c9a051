#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "mural/dataset.hpp"
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

TEST_CASE("sturges bin counts") {
    CHECK(sturges_bin_count(3000) == 13);
    CHECK(sturges_bin_count(1) == 1);
    CHECK(sturges_bin_count(1024) == 11);
    CHECK_THROWS_AS(sturges_bin_count(0), UserError);

    // exact against a loop-based ceil(log2) for the full range
    std::int64_t prev = 0;
    for (std::int64_t n = 1; n <= 1000000; ++n) {
        std::int64_t p = 0;
        while ((std::int64_t{1} << p) < n) ++p;
        const auto got = sturges_bin_count(n);
        REQUIRE(got == p + 1);
        REQUIRE(got >= prev);
        prev = got;
    }
}

TEST_CASE("discretize basics") {
    const std::vector<double> v{0.0, 0.5, 1.0};
    const std::vector<std::uint8_t> m{0, 0, 0};
    CHECK(discretize(v, m, 2) == std::vector<std::int32_t>{0, 1, 1});

    const std::vector<double> constant{3.0, 3.0, 3.0};
    CHECK(discretize(constant, m, 7) == std::vector<std::int32_t>{0, 0, 0});

    const std::vector<double> with_missing{0.0, 1.0, 0.0};
    const std::vector<std::uint8_t> mask{0, 0, 1};
    CHECK(discretize(with_missing, mask, 2) ==
          std::vector<std::int32_t>{0, 1, kMissingCode});

    CHECK_THROWS_AS(discretize(v, std::vector<std::uint8_t>{1, 1, 1}, 2), UserError);
}

TEST_CASE("discretize codes are monotone in the value") {
    Rng rng(11, 0);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 5 + rng.uniform_index(60);
        std::vector<double> v(n);
        std::vector<std::uint8_t> m(n, 0);
        for (auto& x : v) x = rng.uniform(-5.0, 5.0);
        const int bins = 1 + static_cast<int>(rng.uniform_index(12));
        const auto codes = discretize(v, m, bins);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (v[i] < v[j]) CHECK(codes[i] <= codes[j]);
    }
}

TEST_CASE("standardize moments and flags") {
    Dataset d(continuous_schema(3), 4);
    // c0: plain column
    const double c0[4] = {1.0, 2.0, 3.0, 4.0};
    // c1: constant
    const double c1[4] = {5.0, 5.0, 5.0, 5.0};
    for (int r = 0; r < 4; ++r) {
        d.set_real(0, r, c0[r]);
        d.set_real(1, r, c1[r]);
    }
    // c2: one masked cell, observed {0, 10, 20}
    d.set_real(2, 0, 0.0);
    d.set_real(2, 1, 10.0);
    d.set_missing(2, 2);
    d.set_real(2, 3, 20.0);

    const auto [out, params] = standardize(d);

    double mean0 = 0.0, var0 = 0.0;
    for (int r = 0; r < 4; ++r) mean0 += out.real(0, r);
    mean0 /= 4;
    for (int r = 0; r < 4; ++r) var0 += (out.real(0, r) - mean0) * (out.real(0, r) - mean0);
    var0 /= 3;
    CHECK(std::fabs(mean0) < 1e-9);
    CHECK(std::fabs(var0 - 1.0) < 1e-9);

    CHECK(params.columns[1].zero_variance);
    CHECK(out.real(1, 0) == 5.0);

    CHECK(params.columns[2].mean == doctest::Approx(10.0));
    CHECK(params.columns[2].stddev == doctest::Approx(10.0));
    CHECK(out.is_missing(2, 2));

    // idempotence on scaled columns
    const auto [again, params2] = standardize(out);
    for (int r = 0; r < 4; ++r) CHECK(again.real(0, r) == doctest::Approx(out.real(0, r)).epsilon(1e-9));
}

TEST_CASE("load_csv masks missing tokens and names bad cells") {
    std::vector<ColumnSpec> cols{
        {"a", ColumnKind::continuous(), MissingnessHint::Auto, "NA"},
        {"b", ColumnKind::binary(), MissingnessHint::Auto, "NA"},
    };
    const Schema schema(std::move(cols));

    SUBCASE("empty cell is masked") {
        std::istringstream in("a,b\n1.5,0\n,1\n");
        const auto d = load_csv(schema, in);
        REQUIRE(d.n_rows() == 2);
        CHECK(d.missing_count(0) == 1);
        CHECK(d.is_missing(0, 1));
        CHECK(d.missing_count(1) == 0);
    }
    SUBCASE("binary out of range names the cell") {
        std::istringstream in("a,b\n1.5,2\n");
        CHECK_THROWS_WITH_AS(load_csv(schema, in),
                             doctest::Contains("column 'b'"), UserError);
    }
    SUBCASE("header permutation is matched by name") {
        std::istringstream in("b,a\n1,2.5\n");
        const auto d = load_csv(schema, in);
        CHECK(d.real(0, 0) == 2.5);
        CHECK(d.code(1, 0) == 1);
    }
    SUBCASE("ragged row is rejected") {
        std::istringstream in("a,b\n1.5\n");
        CHECK_THROWS_AS(load_csv(schema, in), UserError);
    }
    SUBCASE("unknown header column") {
        std::istringstream in("a,zzz\n1.5,0\n");
        CHECK_THROWS_WITH_AS(load_csv(schema, in), doctest::Contains("zzz"), UserError);
    }
}

TEST_CASE("ugib-style schema loads complete rows") {
    // 7 columns: 4 continuous labs, 1 continuous vital, 1 binary, 1 ordinal
    std::vector<ColumnSpec> cols{
        {"hemoglobin", ColumnKind::continuous(), MissingnessHint::Auto, "NA"},
        {"urea", ColumnKind::continuous(), MissingnessHint::Auto, "NA"},
        {"albumin", ColumnKind::continuous(), MissingnessHint::Auto, "NA"},
        {"inr", ColumnKind::continuous(), MissingnessHint::Auto, "NA"},
        {"systolic_bp", ColumnKind::continuous(), MissingnessHint::Auto, "NA"},
        {"sex", ColumnKind::binary(), MissingnessHint::Auto, "NA"},
        {"liver_disease", ColumnKind::ordinal(4), MissingnessHint::Auto, "NA"},
    };
    const Schema schema(std::move(cols));

    std::ostringstream csv;
    csv << "hemoglobin,urea,albumin,inr,systolic_bp,sex,liver_disease\n";
    Rng rng(7, 0);
    const std::size_t n = 2761;
    for (std::size_t i = 0; i < n; ++i)
        csv << 8 + 8 * rng.uniform() << ',' << 2 + 20 * rng.uniform() << ','
            << 20 + 25 * rng.uniform() << ',' << 0.9 + 2 * rng.uniform() << ','
            << 80 + 80 * rng.uniform() << ',' << rng.uniform_index(2) << ','
            << rng.uniform_index(4) << '\n';

    std::istringstream in(csv.str());
    const auto d = load_csv(schema, in);
    CHECK(d.n_rows() == n);
    std::size_t masked = 0;
    for (std::size_t c = 0; c < d.n_cols(); ++c) masked += d.missing_count(c);
    CHECK(masked == 0);
    d.validate();
}

TEST_CASE("csv round trip is bit exact") {
    std::vector<ColumnSpec> cols{
        {"x", ColumnKind::continuous(), MissingnessHint::Auto, "NA"},
        {"k", ColumnKind::categorical(5), MissingnessHint::Auto, "?"},
        {"o", ColumnKind::ordinal(3), MissingnessHint::Auto, "NA"},
    };
    const Schema schema(std::move(cols));
    Rng rng(3, 1);
    Dataset d(schema, 200);
    for (std::size_t r = 0; r < 200; ++r) {
        if (rng.uniform() < 0.1)
            d.set_missing(0, static_cast<RowIndex>(r));
        else
            d.set_real(0, static_cast<RowIndex>(r),
                       std::ldexp(rng.uniform(-1.0, 1.0), static_cast<int>(rng.uniform_index(60)) - 30));
        if (rng.uniform() < 0.1)
            d.set_missing(1, static_cast<RowIndex>(r));
        else
            d.set_code(1, static_cast<RowIndex>(r), static_cast<std::int32_t>(rng.uniform_index(5)));
        d.set_code(2, static_cast<RowIndex>(r), static_cast<std::int32_t>(rng.uniform_index(3)));
    }
    std::ostringstream out;
    write_csv(d, out);
    std::istringstream in(out.str());
    const auto back = load_csv(schema, in);
    CHECK(back.equals(d));
}

TEST_CASE("schema file round trip") {
    const std::string text =
        "# sample schema\n"
        "[column]\n"
        "name = age\n"
        "kind = continuous\n"
        "missing_token = NA\n"
        "missingness = auto\n"
        "[column]\n"
        "name = gcs\n"
        "kind = ordinal:5\n"
        "missingness = mnar\n";
    const auto schema = Schema::parse_text(text);
    REQUIRE(schema.n_cols() == 2);
    CHECK(schema.column(1).kind.type == ColumnType::Ordinal);
    CHECK(schema.column(1).kind.levels == 5);
    CHECK(schema.column(1).hint == MissingnessHint::ForceMnar);
    const auto again = Schema::parse_text(schema.to_text());
    CHECK(again == schema);

    CHECK_THROWS_AS(Schema::parse_text("[column]\nname = x\n"), UserError);  // no kind
    CHECK_THROWS_AS(Schema::parse_text("name = x\n"), UserError);            // outside block
    CHECK_THROWS_AS(
        Schema::parse_text("[column]\nname = x\nkind = continuous\n"
                           "[column]\nname = x\nkind = binary\n"),
        UserError);  // duplicate name
}
