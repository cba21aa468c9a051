#include "mural/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace mural::stats {

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

namespace {

// series expansion of P(s,x), valid for x < s + 1
double gamma_p_series(double s, double x) {
    double term = 1.0 / s;
    double sum = term;
    double a = s;
    for (int i = 0; i < 500; ++i) {
        a += 1.0;
        term *= x / a;
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + s * std::log(x) - std::lgamma(s));
}

// continued fraction for Q(s,x) via modified Lentz, valid for x >= s + 1
double gamma_q_cf(double s, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - s;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - s);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + s * std::log(x) - std::lgamma(s));
}

}  // namespace

double regularized_gamma_p(double s, double x) {
    if (s <= 0.0) throw std::invalid_argument("regularized_gamma_p: s must be > 0");
    if (x <= 0.0) return 0.0;
    if (x < s + 1.0) return gamma_p_series(s, x);
    return 1.0 - gamma_q_cf(s, x);
}

double chi_square_sf(double x, double df) {
    if (df <= 0.0) throw std::invalid_argument("chi_square_sf: df must be > 0");
    if (x <= 0.0) return 1.0;
    if (x < df / 2.0 + 1.0) return 1.0 - gamma_p_series(df / 2.0, x / 2.0);
    return gamma_q_cf(df / 2.0, x / 2.0);
}

std::vector<double> midranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;  // averaged 1-based rank
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

TestResult rank_sum_test(std::span<const double> a, std::span<const double> b) {
    const std::size_t n1 = a.size(), n2 = b.size();
    if (n1 == 0 || n2 == 0) return {};
    std::vector<double> pooled;
    pooled.reserve(n1 + n2);
    pooled.insert(pooled.end(), a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto ranks = midranks(pooled);
    double r1 = 0.0;
    for (std::size_t i = 0; i < n1; ++i) r1 += ranks[i];
    const double fn1 = static_cast<double>(n1), fn2 = static_cast<double>(n2);
    const double n = fn1 + fn2;
    const double u1 = r1 - fn1 * (fn1 + 1.0) / 2.0;
    const double mean_u = fn1 * fn2 / 2.0;

    // tie correction over pooled value multiplicities
    std::vector<double> sorted(pooled);
    std::sort(sorted.begin(), sorted.end());
    double tie_term = 0.0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    const double var_u = fn1 * fn2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if (var_u <= 0.0) return {};  // all values identical

    const double z = (u1 - mean_u) / std::sqrt(var_u);
    return {z, 2.0 * normal_sf(std::fabs(z)), true};
}

TestResult chi_square_independence(const std::vector<std::vector<std::int64_t>>& table) {
    if (table.empty()) return {};
    const std::size_t nc = table.front().size();
    for (const auto& row : table)
        if (row.size() != nc) throw std::invalid_argument("chi_square_independence: ragged table");

    std::vector<double> row_sum(table.size(), 0.0), col_sum(nc, 0.0);
    double total = 0.0;
    for (std::size_t r = 0; r < table.size(); ++r)
        for (std::size_t c = 0; c < nc; ++c) {
            row_sum[r] += static_cast<double>(table[r][c]);
            col_sum[c] += static_cast<double>(table[r][c]);
            total += static_cast<double>(table[r][c]);
        }
    std::size_t live_rows = 0, live_cols = 0;
    for (double s : row_sum) live_rows += s > 0.0;
    for (double s : col_sum) live_cols += s > 0.0;
    if (total <= 0.0 || live_rows < 2 || live_cols < 2) return {};

    double stat = 0.0;
    for (std::size_t r = 0; r < table.size(); ++r) {
        if (row_sum[r] <= 0.0) continue;
        for (std::size_t c = 0; c < nc; ++c) {
            if (col_sum[c] <= 0.0) continue;
            const double expected = row_sum[r] * col_sum[c] / total;
            const double diff = static_cast<double>(table[r][c]) - expected;
            stat += diff * diff / expected;
        }
    }
    const double df = static_cast<double>((live_rows - 1) * (live_cols - 1));
    return {stat, chi_square_sf(stat, df), true};
}

}  // namespace mural::stats
