#pragma once

#include <span>
#include <vector>

#include "mural/distance.hpp"
#include "mural/forest.hpp"

namespace mural {

// Subtree mass per node: D(t, mu) = mass of mu at node t and below.
struct TreeDistribution {
    std::vector<double> node_mass;
};

struct CohortDistribution {
    std::vector<TreeDistribution> per_tree;
    std::size_t cohort_size = 0;
};

// Uniform mass 1/|rows| at each row's leaf, accumulated bottom-up.
TreeDistribution cohort_distribution(const MuralTree& tree, const Dataset& d,
                                     std::span<const RowIndex> rows);
// Same, with precomputed leaf ids aligned to `rows`.
TreeDistribution cohort_distribution_from_leaves(const MuralTree& tree,
                                                 std::span<const std::int32_t> leaves);
CohortDistribution forest_cohort_distribution(const MuralForest& forest,
                                              std::span<const RowIndex> rows);

// Leaf of every dataset row in every tree.
std::vector<std::vector<std::int32_t>> route_all(const MuralForest& forest, const Dataset& d);

// Exact 1-Wasserstein on the tree metric:
// sum over non-root nodes of edge_weight * |D(t, mu) - D(t, nu)|.
double tree_wasserstein(const MuralTree& tree, const TreeDistribution& mu,
                        const TreeDistribution& nu);

struct TswdResult {
    double mean = 0.0;
    double stddev = 0.0;  // sample stddev across trees (0 for one tree)
    std::vector<double> per_tree;
};

TswdResult forest_tswd(const MuralForest& forest, std::span<const RowIndex> cohort_a,
                       std::span<const RowIndex> cohort_b);
// Same over externally routed rows (row indices address `assignments`).
TswdResult forest_tswd(const MuralForest& forest,
                       const std::vector<std::vector<std::int32_t>>& assignments,
                       std::span<const RowIndex> cohort_a, std::span<const RowIndex> cohort_b);

// Exact 1-Wasserstein between two mass vectors over an arbitrary ground
// metric, solved as a min-cost flow by successive shortest paths. Intended
// as a desk-scale oracle; the support is capped at 64 points.
double brute_force_emd(const SquareMatrix& ground, std::span<const double> mu,
                       std::span<const double> nu);

struct FeatureImportanceReport {
    std::vector<std::pair<std::size_t, double>> shares;  // (variable, share), descending
    bool degenerate = false;                             // all contributions were zero

    std::string to_csv(const Schema& schema) const;
};

// Credits each non-root node's TSWD contribution to its parent's split
// variable; the missing-branch children of an MNAR four-way credit the aux
// variable instead. Shares are normalized to sum 1.
FeatureImportanceReport feature_importance(const MuralForest& forest,
                                           std::span<const RowIndex> cohort_a,
                                           std::span<const RowIndex> cohort_b);
FeatureImportanceReport feature_importance(const MuralForest& forest,
                                           const std::vector<std::vector<std::int32_t>>& assignments,
                                           std::span<const RowIndex> cohort_a,
                                           std::span<const RowIndex> cohort_b);

}  // namespace mural
