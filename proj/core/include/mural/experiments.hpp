#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mural/eval.hpp"
#include "mural/forest.hpp"
#include "mural/missingness.hpp"

namespace mural {

// Missingness induced on the synthetic roll: one column masked where its
// own value exceeds a quantile (a lab-not-recorded-when-abnormal rule,
// hence MNAR), plus coin-masked columns.
struct SwissRollRecipe {
    std::size_t n = 3000;
    double noise = 0.0;
    std::size_t mnar_col = 0;
    double mnar_quantile = 0.70;
    std::vector<std::size_t> mcar_cols{1, 2};
    std::vector<double> mcar_fractions{0.25, 0.35};  // parallel to mcar_cols
};

struct MetricStats {
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<double> values;
};

struct MetricTable {
    std::vector<std::string> rows;
    std::vector<std::string> metrics;
    std::vector<std::vector<MetricStats>> cells;  // [row][metric]

    const MetricStats& cell(const std::string& row, const std::string& metric) const;
    std::string to_csv() const;
    std::string to_text() const;
};

struct SwissRollExperiment {
    SwissRollRecipe recipe;
    ForestConfig forest;
    std::vector<std::size_t> ks{5, 10, 100};
    std::size_t n_seeds = 5;
    std::uint64_t base_seed = 0;
    bool manifold_metrics = true;  // add distortion and geodesic correlation
};

// Per-seed outcome of one pipeline (metric name -> value).
using SeedMetrics = std::map<std::string, double>;

// Memoizes (config, seed) pipeline runs so ablation sweeps can share work.
class SwissRollLab {
public:
    explicit SwissRollLab(const SwissRollExperiment& cfg);
    ~SwissRollLab();
    SwissRollLab(const SwissRollLab&) = delete;
    SwissRollLab& operator=(const SwissRollLab&) = delete;

    const SeedMetrics& mural_run(const ForestConfig& config, std::uint64_t seed);
    const SeedMetrics& baseline_run(std::uint64_t seed);

    MetricTable comparison_table();  // rows: MURAL, MeanImputation
    MetricTable ablation_table(const std::string& knob,
                               const std::vector<std::string>& values);

    const SwissRollExperiment& config() const { return cfg_; }

private:
    struct SeedData;
    SeedData& seed_data(std::uint64_t seed);

    SwissRollExperiment cfg_;
    std::map<std::uint64_t, std::unique_ptr<SeedData>> seed_cache_;
    std::map<std::string, SeedMetrics> run_cache_;
};

// Named ablation knobs: trees, depth, split-vars, mnar-levels, entropy-dims.
std::vector<std::string> ablation_knobs();
std::vector<std::string> default_knob_values(const std::string& knob);
ForestConfig apply_knob(ForestConfig config, const std::string& knob,
                        const std::string& value);

MetricTable run_swissroll_table(const SwissRollExperiment& cfg);
MetricTable run_ablation_table(const SwissRollExperiment& cfg, const std::string& knob,
                               const std::vector<std::string>& values);

}  // namespace mural
