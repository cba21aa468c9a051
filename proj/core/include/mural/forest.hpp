#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "mural/dataset.hpp"
#include "mural/rng.hpp"

namespace mural {

// Two children: (value <= threshold), (value > threshold). A row masked in
// `var` is routed to the child that received more training rows (ties left).
struct ContinuousSplit {
    std::int32_t var = 0;
    double threshold = 0.0;
};

// One-vs-rest on a single category: (code == category), (code != category).
struct CategoricalSplit {
    std::int32_t var = 0;
    std::int32_t category = 0;
};

// Four children: (measured & <= t), (measured & > t),
// (missing & aux <= t'), (missing & aux > t').
struct MnarFourWay {
    std::int32_t var = 0;
    double measured_threshold = 0.0;
    std::int32_t aux_var = 0;
    double aux_threshold = 0.0;
};

// Four children: (v == category & aux <= t0), (v == category & aux > t0),
// (v != category & aux <= t1), (v != category & aux > t1). Plain binary
// variables use category 0 so the children are ordered v=0, v=0, v=1, v=1.
struct BinaryFourWay {
    std::int32_t var = 0;
    std::int32_t category = 0;
    std::int32_t aux_var = 0;
    double aux_threshold_eq = 0.0;
    double aux_threshold_neq = 0.0;
};

using SplitSpec = std::variant<ContinuousSplit, CategoricalSplit, MnarFourWay, BinaryFourWay>;

// Primary variable of a split.
std::int32_t split_var(const SplitSpec& s);
// Aux variable for four-way splits, -1 otherwise.
std::int32_t split_aux_var(const SplitSpec& s);

struct TreeNode {
    std::int32_t parent = -1;
    std::int32_t depth = 0;
    double edge_weight = 1.0;  // weight of the edge from the parent
    std::optional<SplitSpec> split;
    std::vector<std::int32_t> children;      // empty for leaves
    std::vector<std::int64_t> child_counts;  // training rows routed to each child
    std::vector<RowIndex> rows;              // leaves: training rows

    bool is_leaf() const { return !split.has_value(); }
};

enum class EntropyMode : std::uint8_t { MarginalSum = 0, JointSubset = 1 };

struct ForestConfig {
    std::int32_t n_trees = 100;
    std::int32_t max_depth = 10;
    std::int32_t n_candidate_vars = 1;
    EntropyMode entropy_mode = EntropyMode::MarginalSum;
    std::int32_t entropy_dims = 3;     // JointSubset: size of the random subset
    std::int32_t n_residual_vars = 0;  // MarginalSum: 0 = all residual variables
    std::int32_t mnar_restrict_levels = 3;
    std::int32_t min_leaf = 5;
    std::int32_t max_threshold_candidates = 8;
    std::int32_t n_bins_override = 0;  // 0 = Sturges count from the node size
    double four_way_edge_weight = 1.0;  // 2.0 preserves two-level path lengths
    bool exclude_path_vars = false;  // drop ancestors' split vars from residual sets
    std::uint64_t seed = 0;

    void validate() const;
};

// Nodes are stored in preorder, so a parent always precedes its children.
class MuralTree {
public:
    std::vector<TreeNode> nodes;

    std::size_t leaf_count() const;
    std::vector<std::int32_t> leaf_ids() const;

    // Weighted depth: sum of edge weights from the root.
    double weighted_depth(std::int32_t node) const;

    std::int32_t route(const Dataset& d, RowIndex row) const;

    // Structural checks: preorder layout, depth bookkeeping, child counts,
    // four-way arity, and (given the training data) that every child's rows
    // re-route to it. Throws std::logic_error on violation.
    void validate(const Dataset& d) const;
};

struct MuralForest {
    std::vector<MuralTree> trees;
    ForestConfig config;
    Schema schema;
    StandardizationParams standardization;
    std::vector<std::uint8_t> column_missing_at_fit;  // per column
    std::size_t n_rows = 0;
    std::vector<std::vector<std::int32_t>> leaf_assignments;  // [tree][row] -> node id
};

// Information gain of a partition measured on residual variables: Shannon
// entropy (bits) over parent-level discretizations, masked cells forming
// their own class. MarginalSum sums per-variable gains; JointSubset computes
// one gain on the joint distribution of the given variables.
double residual_info_gain(const Dataset& d, std::span<const RowIndex> rows,
                          const std::vector<std::vector<RowIndex>>& partition,
                          std::span<const std::size_t> residual_vars, EntropyMode mode,
                          std::int32_t n_bins_override = 0);

struct ThresholdResult {
    double threshold = 0.0;
    double gain = 0.0;
    bool ok = false;  // false: no candidate satisfied the leaf-size floor
};

// Best two-way threshold on `var` over midpoints of consecutive distinct
// observed values, requiring min_leaf observed rows on both sides; ties
// prefer the smaller threshold. When there are more midpoints than
// max_threshold_candidates the candidate set is subsampled: a random
// subset under `rng` (tree construction), even quantiles when rng is null.
// Small nodes are never subsampled, so the search is exhaustive there.
ThresholdResult best_threshold(const Dataset& d, std::span<const RowIndex> rows, std::size_t var,
                               std::span<const std::size_t> residual_vars,
                               const ForestConfig& config, Rng* rng = nullptr);

struct SplitOutcome {
    std::optional<SplitSpec> split;  // empty: make a leaf
    std::vector<std::vector<RowIndex>> child_rows;
    double gain = 0.0;
};

// One node-splitting step: draws candidate variables (excluding variables
// with missing values while depth < mnar_restrict_levels), evaluates each
// candidate's best achievable split, and keeps the best by residual gain.
SplitOutcome split_node(const Dataset& d, std::span<const RowIndex> rows, std::int32_t depth,
                        const ForestConfig& config, Rng& rng,
                        std::span<const std::uint8_t> column_has_missing,
                        std::span<const std::uint8_t> path_vars);

MuralForest fit(const Dataset& d, const ForestConfig& config);

void serialize(const MuralForest& forest, std::ostream& out);
MuralForest deserialize(std::istream& in);
void save_forest(const MuralForest& forest, const std::string& path);
MuralForest load_forest(const std::string& path);

}  // namespace mural
