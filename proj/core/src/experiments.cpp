#include "mural/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <memory>
#include <sstream>

namespace mural {

const MetricStats& MetricTable::cell(const std::string& row, const std::string& metric) const {
    const auto r = std::find(rows.begin(), rows.end(), row);
    const auto m = std::find(metrics.begin(), metrics.end(), metric);
    if (r == rows.end() || m == metrics.end())
        throw std::invalid_argument("MetricTable: unknown row or metric");
    return cells[static_cast<std::size_t>(r - rows.begin())]
                [static_cast<std::size_t>(m - metrics.begin())];
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

MetricStats summarize(std::vector<double> values) {
    MetricStats s;
    s.values = std::move(values);
    if (s.values.empty()) return s;
    double sum = 0.0;
    for (double v : s.values) sum += v;
    s.mean = sum / static_cast<double>(s.values.size());
    if (s.values.size() > 1) {
        double ss = 0.0;
        for (double v : s.values) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(s.values.size() - 1));
    }
    return s;
}

}  // namespace

std::string MetricTable::to_csv() const {
    std::ostringstream out;
    out << "row,metric,mean,stddev\n";
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t m = 0; m < metrics.size(); ++m)
            out << rows[r] << ',' << metrics[m] << ',' << fmt(cells[r][m].mean) << ','
                << fmt(cells[r][m].stddev) << '\n';
    return out.str();
}

std::string MetricTable::to_text() const {
    std::ostringstream out;
    std::size_t width = 12;
    for (const auto& r : rows) width = std::max(width, r.size() + 2);
    out << std::string(width, ' ');
    for (const auto& m : metrics) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%20s", m.c_str());
        out << buf;
    }
    out << '\n';
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out << rows[r] << std::string(width - rows[r].size(), ' ');
        for (std::size_t m = 0; m < metrics.size(); ++m) {
            char buf[48];
            std::snprintf(buf, sizeof(buf), "%12.3f ± %-5.3f", cells[r][m].mean,
                          cells[r][m].stddev);
            out << buf;
        }
        out << '\n';
    }
    return out.str();
}

// Everything derived from one experiment seed that does not depend on the
// forest configuration.
struct SwissRollLab::SeedData {
    SwissRollSample sample;
    DistanceMatrix d_true;       // Euclidean over complete standardized data
    Dataset with_missingness;    // raw values + induced masks
    Dataset mural_input;         // detected, imputed, standardized
    std::optional<SquareMatrix> geodesic;
};

SwissRollLab::SwissRollLab(const SwissRollExperiment& cfg) : cfg_(cfg) {}
SwissRollLab::~SwissRollLab() = default;

SwissRollLab::SeedData& SwissRollLab::seed_data(std::uint64_t seed) {
    auto it = seed_cache_.find(seed);
    if (it != seed_cache_.end()) return *it->second;

    auto data = std::make_unique<SeedData>();
    data->sample = gen_swiss_roll_5d(cfg_.recipe.n, cfg_.recipe.noise, seed);
    data->d_true = euclidean_distance_matrix(standardize(data->sample.ambient).first);

    // threshold-style MNAR mask on the column's own values
    std::vector<double> sorted;
    sorted.reserve(cfg_.recipe.n);
    for (std::size_t i = 0; i < cfg_.recipe.n; ++i)
        sorted.push_back(data->sample.ambient.real(cfg_.recipe.mnar_col,
                                                   static_cast<RowIndex>(i)));
    std::sort(sorted.begin(), sorted.end());
    const auto pos = static_cast<std::size_t>(cfg_.recipe.mnar_quantile *
                                              static_cast<double>(sorted.size() - 1));
    Dataset masked = induce_mnar_threshold(data->sample.ambient, cfg_.recipe.mnar_col,
                                           sorted[pos], Direction::Above);
    for (std::size_t i = 0; i < cfg_.recipe.mcar_cols.size(); ++i)
        masked = induce_mcar(masked, cfg_.recipe.mcar_cols[i],
                             cfg_.recipe.mcar_fractions.at(i),
                             seed * 1000003ULL + cfg_.recipe.mcar_cols[i]);
    data->with_missingness = masked;

    const auto profile = detect_mnar(masked);
    const auto imputed = impute_random_missing(masked, profile);
    data->mural_input = standardize(imputed).first;

    auto& slot = seed_cache_[seed];
    slot = std::move(data);
    return *slot;
}

const SeedMetrics& SwissRollLab::baseline_run(std::uint64_t seed) {
    const std::string key = "baseline|" + std::to_string(seed);
    auto it = run_cache_.find(key);
    if (it != run_cache_.end()) return it->second;

    auto& data = seed_data(seed);
    const auto filled = standardize(mean_impute(data.with_missingness)).first;
    const auto d_est = euclidean_distance_matrix(filled);

    SeedMetrics metrics;
    for (auto k : cfg_.ks)
        metrics["P@" + std::to_string(k)] = precision_at_k(d_est, data.d_true, k);
    if (cfg_.manifold_metrics) {
        metrics["Distortion"] = distortion(d_est, data.d_true, 10000, seed);
        if (!data.geodesic.has_value())
            data.geodesic = knn_geodesic_matrix(standardize(data.sample.ambient).first, 10);
        metrics["GeodesicCorr"] = geodesic_correlation_from(d_est, *data.geodesic);
    }
    return run_cache_.emplace(key, std::move(metrics)).first->second;
}

namespace {

std::string config_key(const ForestConfig& c, std::uint64_t seed) {
    std::ostringstream out;
    out << c.n_trees << '|' << c.max_depth << '|' << c.n_candidate_vars << '|'
        << static_cast<int>(c.entropy_mode) << '|' << c.entropy_dims << '|'
        << c.n_residual_vars << '|' << c.mnar_restrict_levels << '|' << c.min_leaf << '|'
        << c.max_threshold_candidates << '|' << c.n_bins_override << '|'
        << c.four_way_edge_weight << '|' << c.exclude_path_vars << '|' << seed;
    return out.str();
}

}  // namespace

const SeedMetrics& SwissRollLab::mural_run(const ForestConfig& config, std::uint64_t seed) {
    const std::string key = "mural|" + config_key(config, seed);
    auto it = run_cache_.find(key);
    if (it != run_cache_.end()) return it->second;

    auto& data = seed_data(seed);
    ForestConfig cfg = config;
    cfg.seed = seed;
    const auto forest = fit(data.mural_input, cfg);
    const auto d_est = forest_distance_matrix(forest);

    SeedMetrics metrics;
    for (auto k : cfg_.ks)
        metrics["P@" + std::to_string(k)] = precision_at_k(d_est, data.d_true, k);
    if (cfg_.manifold_metrics) {
        metrics["Distortion"] = distortion(d_est, data.d_true, 10000, seed);
        if (!data.geodesic.has_value())
            data.geodesic = knn_geodesic_matrix(standardize(data.sample.ambient).first, 10);
        metrics["GeodesicCorr"] = geodesic_correlation_from(d_est, *data.geodesic);
    }
    return run_cache_.emplace(key, std::move(metrics)).first->second;
}

namespace {

std::vector<std::string> metric_names(const SwissRollExperiment& cfg) {
    std::vector<std::string> names;
    for (auto k : cfg.ks) names.push_back("P@" + std::to_string(k));
    if (cfg.manifold_metrics) {
        names.push_back("Distortion");
        names.push_back("GeodesicCorr");
    }
    return names;
}

}  // namespace

MetricTable SwissRollLab::comparison_table() {
    MetricTable table;
    table.rows = {"MURAL", "MeanImputation"};
    table.metrics = metric_names(cfg_);
    table.cells.resize(table.rows.size());

    std::vector<SeedMetrics> mural, baseline;
    for (std::size_t s = 0; s < cfg_.n_seeds; ++s) {
        mural.push_back(mural_run(cfg_.forest, cfg_.base_seed + s));
        baseline.push_back(baseline_run(cfg_.base_seed + s));
    }
    for (const auto& metric : table.metrics) {
        std::vector<double> mv, bv;
        for (std::size_t s = 0; s < cfg_.n_seeds; ++s) {
            mv.push_back(mural[s].at(metric));
            bv.push_back(baseline[s].at(metric));
        }
        table.cells[0].push_back(summarize(std::move(mv)));
        table.cells[1].push_back(summarize(std::move(bv)));
    }
    return table;
}

MetricTable SwissRollLab::ablation_table(const std::string& knob,
                                         const std::vector<std::string>& values) {
    MetricTable table;
    table.metrics = metric_names(cfg_);
    table.rows.push_back("MeanImputation");
    for (const auto& v : values) table.rows.push_back(knob + "=" + v);
    table.cells.resize(table.rows.size());

    for (const auto& metric : table.metrics) {
        std::vector<double> bv;
        for (std::size_t s = 0; s < cfg_.n_seeds; ++s)
            bv.push_back(baseline_run(cfg_.base_seed + s).at(metric));
        table.cells[0].push_back(summarize(std::move(bv)));
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto config = apply_knob(cfg_.forest, knob, values[i]);
        for (const auto& metric : table.metrics) {
            std::vector<double> mv;
            for (std::size_t s = 0; s < cfg_.n_seeds; ++s)
                mv.push_back(mural_run(config, cfg_.base_seed + s).at(metric));
            table.cells[i + 1].push_back(summarize(std::move(mv)));
        }
    }
    return table;
}

std::vector<std::string> ablation_knobs() {
    return {"trees", "depth", "split-vars", "mnar-levels", "entropy-dims"};
}

std::vector<std::string> default_knob_values(const std::string& knob) {
    if (knob == "trees") return {"10", "50", "100", "200", "500"};
    if (knob == "depth") return {"2", "4", "6", "8", "10", "12", "14"};
    if (knob == "split-vars") return {"1", "2", "3", "4"};
    if (knob == "mnar-levels") return {"0", "1", "2", "3"};
    if (knob == "entropy-dims") return {"1", "2", "3", "marginal"};
    throw UserError("unknown ablation knob '" + knob + "'");
}

ForestConfig apply_knob(ForestConfig config, const std::string& knob,
                        const std::string& value) {
    auto as_int = [&](const std::string& v) {
        int n = 0;
        const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
        if (ec != std::errc() || p != v.data() + v.size())
            throw UserError("knob value '" + v + "' is not an integer");
        return n;
    };
    if (knob == "trees") config.n_trees = as_int(value);
    else if (knob == "depth") config.max_depth = as_int(value);
    else if (knob == "split-vars") config.n_candidate_vars = as_int(value);
    else if (knob == "mnar-levels") config.mnar_restrict_levels = as_int(value);
    else if (knob == "entropy-dims") {
        if (value == "marginal") {
            config.entropy_mode = EntropyMode::MarginalSum;
        } else {
            config.entropy_mode = EntropyMode::JointSubset;
            config.entropy_dims = as_int(value);
        }
    } else {
        throw UserError("unknown ablation knob '" + knob + "'");
    }
    config.validate();
    return config;
}

MetricTable run_swissroll_table(const SwissRollExperiment& cfg) {
    SwissRollLab lab(cfg);
    return lab.comparison_table();
}

MetricTable run_ablation_table(const SwissRollExperiment& cfg, const std::string& knob,
                               const std::vector<std::string>& values) {
    SwissRollLab lab(cfg);
    return lab.ablation_table(knob, values.empty() ? default_knob_values(knob) : values);
}

}  // namespace mural
