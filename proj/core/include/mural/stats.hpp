#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace mural::stats {

// P(Z > z) for standard normal Z.
double normal_sf(double z);

// P(X > x) for chi-square with df degrees of freedom.
double chi_square_sf(double x, double df);

// Lower regularized incomplete gamma P(s, x).
double regularized_gamma_p(double s, double x);

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    bool valid = false;
};

// Two-sided Mann-Whitney rank-sum test, normal approximation with tie
// correction, no continuity correction. Invalid when either sample is empty
// or all values tie.
TestResult rank_sum_test(std::span<const double> a, std::span<const double> b);

// Pearson chi-square test of independence on an r x c contingency table.
// All-zero rows/columns are dropped; invalid when fewer than 2 of either
// remain or the table total is 0.
TestResult chi_square_independence(const std::vector<std::vector<std::int64_t>>& table);

// Midrank vector (ties averaged), 1-based ranks.
std::vector<double> midranks(std::span<const double> values);

}  // namespace mural::stats
