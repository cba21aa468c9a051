// mural: unsupervised forests over mixed-type tabular data with missing
// values, tree distances and affinities, cohort transport distances, and the
// synthetic evaluation harness.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"

#include "mural/cohort_expr.hpp"
#include "mural/distance.hpp"
#include "mural/eval.hpp"
#include "mural/experiments.hpp"
#include "mural/forest.hpp"
#include "mural/missingness.hpp"
#include "mural/transport.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using namespace mural;

struct ForestFlags {
    int trees = 100;
    int depth = 10;
    int split_vars = 1;
    std::string entropy_dims = "marginal";
    int mnar_levels = 3;
    int min_leaf = 5;
    int max_candidates = 8;
    int bins = 0;
    double four_way_weight = 1.0;
    bool exclude_path_vars = false;
    std::uint64_t seed = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--trees", trees, "number of trees");
        cmd->add_option("--depth", depth, "maximum tree depth");
        cmd->add_option("--split-vars", split_vars, "candidate variables per split");
        cmd->add_option("--entropy-dims", entropy_dims,
                        "'marginal' or a joint-entropy subset size");
        cmd->add_option("--mnar-levels", mnar_levels,
                        "levels that exclude variables with missing values");
        cmd->add_option("--min-leaf", min_leaf, "minimum rows per child");
        cmd->add_option("--max-candidates", max_candidates,
                        "threshold candidates per split search");
        cmd->add_option("--bins", bins, "fixed bin count (0 = Sturges from node size)");
        cmd->add_option("--four-way-weight", four_way_weight,
                        "edge weight under four-way splits");
        cmd->add_flag("--exclude-path-vars", exclude_path_vars,
                      "drop ancestors' split variables from residual sets");
        cmd->add_option("--seed", seed, "random seed");
    }

    ForestConfig to_config() const {
        ForestConfig config;
        config.n_trees = trees;
        config.max_depth = depth;
        config.n_candidate_vars = split_vars;
        if (entropy_dims == "marginal") {
            config.entropy_mode = EntropyMode::MarginalSum;
        } else {
            config.entropy_mode = EntropyMode::JointSubset;
            try {
                config.entropy_dims = std::stoi(entropy_dims);
            } catch (...) {
                throw UserError("--entropy-dims expects 'marginal' or an integer, got '" +
                                entropy_dims + "'");
            }
        }
        config.mnar_restrict_levels = mnar_levels;
        config.min_leaf = min_leaf;
        config.max_threshold_candidates = max_candidates;
        config.n_bins_override = bins;
        config.four_way_edge_weight = four_way_weight;
        config.exclude_path_vars = exclude_path_vars;
        config.seed = seed;
        config.validate();
        return config;
    }
};

Bandwidth parse_bandwidth(const std::string& text) {
    if (text.rfind("adaptive", 0) == 0) {
        const auto colon = text.find(':');
        if (colon == std::string::npos) return Bandwidth::adaptive_knn(5);
        return Bandwidth::adaptive_knn(std::stoi(text.substr(colon + 1)));
    }
    if (text.rfind("fixed:", 0) == 0) return Bandwidth::fixed(std::stod(text.substr(6)));
    try {
        return Bandwidth::fixed(std::stod(text));
    } catch (...) {
        throw UserError("--bandwidth expects adaptive[:k], fixed:<eps>, or a number; got '" +
                        text + "'");
    }
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UserError("cannot write '" + path + "'");
    out << content;
}

// resolved-config sidecar: `key=value` lines, reloadable with
// `--config <file>`; flags appear as true/false
void write_sidecar(const CLI::App* cmd, const std::string& path) {
    std::ostringstream out;
    for (const auto* opt : cmd->get_options()) {
        const auto& name = opt->get_lnames();
        if (name.empty()) continue;
        if (name.front() == "config" || name.front() == "help") continue;
        out << name.front() << '=';
        if (opt->get_expected_min() == 0) {  // flag
            out << (opt->count() > 0 ? "true" : "false");
        } else if (opt->count() > 0) {
            out << opt->results().back();
        } else {
            out << opt->get_default_str();
        }
        out << '\n';
    }
    write_text_file(path, out.str());
}

// replaces `--config FILE` with the file's key=value pairs as options right
// after the subcommand token, so explicit command-line flags still win
std::vector<std::string> expand_config_args(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    std::size_t config_at = 0;
    std::string path;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            config_at = i;
            path = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                       args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            config_at = i;
            path = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }
    if (path.empty()) return args;
    if (args.size() < 2) throw mural::UserError("--config requires a subcommand");

    std::ifstream in(path);
    if (!in) throw mural::UserError("cannot open config file '" + path + "'");
    std::vector<std::string> injected;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw mural::UserError("config file '" + path + "': expected key=value, got '" +
                                   line + "'");
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (value == "true")
            injected.push_back("--" + key);
        else if (value == "false" || value.empty())
            continue;
        else
            injected.push_back("--" + key + "=" + value);
    }
    (void)config_at;
    args.insert(args.begin() + 2, injected.begin(), injected.end());
    return args;
}

// Re-runs detection and imputation on the provided table, then maps it into
// the forest's standardized space.
Dataset prepare_like_training(const MuralForest& forest, const Dataset& raw) {
    const auto profile = detect_mnar(raw);
    const auto imputed = impute_random_missing(raw, profile);
    return apply_standardization(imputed, forest.standardization);
}

std::string importance_svg(const FeatureImportanceReport& report, const Schema& schema) {
    const int bar_h = 22, gap = 6, left = 160, width = 420;
    const int height = static_cast<int>(report.shares.size()) * (bar_h + gap) + gap;
    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << left + width + 80
        << "' height='" << height << "'>\n";
    double max_share = 1e-12;
    for (const auto& [var, share] : report.shares) max_share = std::max(max_share, share);
    int y = gap;
    char buf[32];
    for (const auto& [var, share] : report.shares) {
        const int w = static_cast<int>(width * share / max_share);
        svg << "<text x='" << left - 8 << "' y='" << y + bar_h - 6
            << "' text-anchor='end' font-size='13' font-family='sans-serif'>"
            << schema.column(var).name << "</text>\n";
        svg << "<rect x='" << left << "' y='" << y << "' width='" << w << "' height='"
            << bar_h << "' fill='#4878a8'/>\n";
        std::snprintf(buf, sizeof(buf), "%.3f", share);
        svg << "<text x='" << left + w + 6 << "' y='" << y + bar_h - 6
            << "' font-size='12' font-family='sans-serif'>" << buf << "</text>\n";
        y += bar_h + gap;
    }
    svg << "</svg>\n";
    return svg.str();
}

int cmd_fit(const std::string& data_path, const std::string& schema_path,
            const std::string& out_path, const ForestFlags& flags, double alpha,
            int impute_iters, const CLI::App* cmd) {
    const auto schema = Schema::load_file(schema_path);
    const auto raw = load_csv_file(schema, data_path);
    raw.validate();

    const auto profile = detect_mnar(raw, alpha);
    const auto imputed = impute_random_missing(raw, profile, impute_iters);
    auto [prepared, params] = standardize(imputed);

    auto forest = fit(prepared, flags.to_config());
    forest.standardization = params;
    save_forest(forest, out_path);

    write_text_file(out_path + ".profile.txt", profile.text_report(schema));
    write_text_file(out_path + ".profile.json", profile.json_report(schema));
    write_sidecar(cmd, out_path + ".config");

    std::size_t mnar = 0, random = 0;
    for (const auto& c : profile.columns)
        (c.classification == MissingClass::Mnar ? mnar : random)++;
    std::cout << "fitted " << forest.trees.size() << " trees on " << raw.n_rows() << " rows, "
              << raw.n_cols() << " columns (" << mnar << " MNAR, " << random
              << " randomly missing)\n";
    std::cout << "forest written to " << out_path << "\n";
    return 0;
}

int cmd_dist(const std::string& forest_path, const std::string& data_path,
             const std::string& out_path, const std::string& format, bool with_affinity,
             const std::string& bandwidth, const CLI::App* cmd) {
    const auto forest = load_forest(forest_path);
    const auto raw = load_csv_file(forest.schema, data_path);
    const auto prepared = prepare_like_training(forest, raw);

    const auto dm = forest_distance_matrix(forest, prepared);
    const bool binary = format == "bin";
    save_matrix(dm.m, out_path, binary);
    std::cout << "distance matrix (" << dm.size() << "x" << dm.size() << ") written to "
              << out_path << "\n";

    if (with_affinity) {
        const auto k = affinity(dm, parse_bandwidth(bandwidth));
        const auto p = diffusion(k);
        const std::string ext = binary ? ".bin" : ".csv";
        const std::string base =
            out_path + (out_path.size() > 4 &&
                                (out_path.ends_with(".csv") || out_path.ends_with(".bin"))
                            ? ""
                            : "");
        const std::string aff_path = out_path + ".affinity" + ext;
        const std::string dif_path = out_path + ".diffusion" + ext;
        save_matrix(k.m, aff_path, binary);
        save_matrix(p.m, dif_path, binary);
        std::cout << "affinity (epsilon = " << k.bandwidth << ") written to " << aff_path
                  << "\n";
        std::cout << "diffusion operator written to " << dif_path << "\n";
    }
    write_sidecar(cmd, out_path + ".config");
    return 0;
}

int cmd_tswd(const std::string& forest_path, const std::string& data_path,
             const std::string& expr_a, const std::string& expr_b, bool allow_overlap,
             bool per_tree, const std::string& out_path, const std::string& importance_path,
             const std::string& plot_path, const CLI::App* cmd) {
    const auto forest = load_forest(forest_path);
    const auto raw = load_csv_file(forest.schema, data_path);

    const auto cohort_a = select_cohort(raw, expr_a);
    const auto cohort_b = select_cohort(raw, expr_b);
    if (cohort_a.empty()) throw UserError("cohort A is empty: '" + expr_a + "'");
    if (cohort_b.empty()) throw UserError("cohort B is empty: '" + expr_b + "'");
    if (!allow_overlap) {
        std::set<RowIndex> a(cohort_a.begin(), cohort_a.end());
        for (auto r : cohort_b)
            if (a.count(r))
                throw UserError("cohorts overlap (row " + std::to_string(r) +
                                "); pass --allow-overlap to permit this");
    }

    const auto prepared = prepare_like_training(forest, raw);
    const auto assignments = route_all(forest, prepared);
    const auto res = forest_tswd(forest, assignments, cohort_a, cohort_b);
    const auto importance = feature_importance(forest, assignments, cohort_a, cohort_b);

    std::ostringstream report;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", res.mean);
    report << "tswd_mean = " << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.9g", res.stddev);
    report << "tswd_stddev = " << buf << "\n";
    report << "cohort_a_size = " << cohort_a.size() << "\n";
    report << "cohort_b_size = " << cohort_b.size() << "\n";
    if (per_tree) {
        report << "per_tree =";
        for (double v : res.per_tree) {
            std::snprintf(buf, sizeof(buf), " %.9g", v);
            report << buf;
        }
        report << "\n";
    }
    if (importance.degenerate) report << "importance_degenerate = true\n";

    std::cout << report.str();
    if (!out_path.empty()) {
        write_text_file(out_path, report.str());
        write_sidecar(cmd, out_path + ".config");
    }
    if (!importance_path.empty())
        write_text_file(importance_path, importance.to_csv(forest.schema));
    if (!plot_path.empty()) write_text_file(plot_path, importance_svg(importance, forest.schema));
    return 0;
}

int cmd_eval(const std::string& experiment, const std::string& out_dir, std::size_t n,
             std::size_t seeds, std::uint64_t base_seed, const std::string& knob,
             const std::string& values_csv, bool quick, const ForestFlags& flags,
             const CLI::App* cmd) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    SwissRollExperiment cfg;
    cfg.recipe.n = n;
    cfg.n_seeds = seeds;
    cfg.base_seed = base_seed;
    cfg.forest = flags.to_config();
    cfg.manifold_metrics = !quick;

    const auto t0 = std::chrono::steady_clock::now();
    MetricTable table;
    std::string stem;
    if (experiment == "swissroll") {
        table = run_swissroll_table(cfg);
        stem = "swissroll";
    } else if (experiment == "ablation") {
        if (knob.empty()) throw UserError("--knob is required for the ablation experiment");
        std::vector<std::string> values;
        if (!values_csv.empty()) {
            std::istringstream in(values_csv);
            std::string item;
            while (std::getline(in, item, ',')) values.push_back(item);
        }
        table = run_ablation_table(cfg, knob, values);
        stem = "ablation_" + knob;
    } else {
        throw UserError("unknown experiment '" + experiment +
                        "' (expected swissroll or ablation)");
    }
    const auto elapsed = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - t0)
                             .count();

    const std::string csv_path = out_dir + "/" + stem + ".csv";
    const std::string txt_path = out_dir + "/" + stem + ".txt";
    write_text_file(csv_path, table.to_csv());
    write_text_file(txt_path, table.to_text());
    write_sidecar(cmd, out_dir + "/" + stem + ".config");

    std::cout << table.to_text();
    std::cout << "reports written to " << csv_path << " and " << txt_path << "\n";
    std::cout << "wall clock: " << elapsed << " s\n";  // stdout only, not in artifacts
    return 0;
}

int cmd_cluster(const std::string& input_path, std::size_t k, const std::string& bandwidth,
                std::uint64_t seed, const std::string& labels_path, const CLI::App* cmd) {
    DistanceMatrix dm;
    {
        std::ifstream probe(input_path, std::ios::binary);
        if (!probe) throw UserError("cannot open '" + input_path + "'");
        char magic[8] = {};
        probe.read(magic, 8);
        probe.close();
        if (std::string(magic, 8) == "MURALFOR") {
            const auto forest = load_forest(input_path);
            dm = forest_distance_matrix(forest);
        } else {
            dm.m = load_matrix(input_path);
        }
    }

    const auto p = diffusion(affinity(dm, parse_bandwidth(bandwidth)));
    const auto labels = spectral_cluster(p, k, seed);
    const double score = silhouette(dm, labels);

    std::ostringstream out;
    out << "row,label\n";
    for (std::size_t i = 0; i < labels.size(); ++i) out << i << ',' << labels[i] << '\n';
    write_text_file(labels_path, out.str());
    write_sidecar(cmd, labels_path + ".config");

    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", score);
    std::cout << "clusters = " << k << "\n";
    std::cout << "silhouette = " << buf << "\n";
    std::cout << "labels written to " << labels_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
#ifdef _OPENMP
    if (const char* env = std::getenv("MURAL_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) omp_set_num_threads(n);
    }
#endif

    CLI::App app{"MURAL forests: unsupervised tree metrics for mixed-type data with "
                 "missing values"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "fit a forest from a CSV table");
    std::string fit_data, fit_schema, fit_out = "forest.mural";
    double alpha = 0.05;
    int impute_iters = 5;
    ForestFlags fit_flags;
    fit_cmd->add_option("--data", fit_data, "input CSV")->required();
    fit_cmd->add_option("--schema", fit_schema, "schema file")->required();
    fit_cmd->add_option("--out", fit_out, "output forest file");
    fit_cmd->add_option("--alpha", alpha, "significance level for the missingness screen");
    fit_cmd->add_option("--impute-iters", impute_iters, "chained imputation cycles");
    fit_flags.attach(fit_cmd);
    std::string config_path;
    fit_cmd->add_option("--config", config_path, "load options from a sidecar file");

    // dist
    auto* dist_cmd = app.add_subcommand("dist", "export distance/affinity matrices");
    std::string dist_forest, dist_data, dist_out = "distances.csv", dist_format = "csv";
    std::string dist_bandwidth = "adaptive:5";
    bool dist_affinity = false;
    dist_cmd->add_option("--forest", dist_forest, "forest file")->required();
    dist_cmd->add_option("--data", dist_data, "input CSV")->required();
    dist_cmd->add_option("--out", dist_out, "output matrix file");
    dist_cmd->add_option("--format", dist_format, "csv or bin")
        ->check(CLI::IsMember({"csv", "bin"}));
    dist_cmd->add_flag("--affinity", dist_affinity, "also write affinity and diffusion");
    dist_cmd->add_option("--bandwidth", dist_bandwidth, "adaptive[:k] or fixed:<eps>");
    dist_cmd->add_option("--config", config_path, "load options from a sidecar file");

    // tswd
    auto* tswd_cmd = app.add_subcommand("tswd",
                                        "tree-sliced Wasserstein distance between cohorts");
    std::string tswd_forest, tswd_data, tswd_a, tswd_b, tswd_out, tswd_importance, tswd_plot;
    bool allow_overlap = false, per_tree = false;
    tswd_cmd->add_option("--forest", tswd_forest, "forest file")->required();
    tswd_cmd->add_option("--data", tswd_data, "input CSV")->required();
    tswd_cmd->add_option("--cohort-a", tswd_a, "cohort expression or @rowfile")->required();
    tswd_cmd->add_option("--cohort-b", tswd_b, "cohort expression or @rowfile")->required();
    tswd_cmd->add_flag("--allow-overlap", allow_overlap, "permit overlapping cohorts");
    tswd_cmd->add_flag("--per-tree", per_tree, "include per-tree distances in the report");
    tswd_cmd->add_option("--out", tswd_out, "report file");
    tswd_cmd->add_option("--importance", tswd_importance, "feature importance CSV");
    tswd_cmd->add_option("--plot", tswd_plot, "feature importance SVG bar chart");
    tswd_cmd->add_option("--config", config_path, "load options from a sidecar file");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "synthetic evaluation experiments");
    std::string experiment = "swissroll", eval_dir = "eval_out", knob, values_csv;
    std::size_t eval_n = 3000, eval_seeds = 5;
    std::uint64_t eval_base_seed = 0;
    bool quick = false;
    ForestFlags eval_flags;
    eval_cmd->add_option("--experiment", experiment, "swissroll or ablation");
    eval_cmd->add_option("--out-dir", eval_dir, "report directory");
    eval_cmd->add_option("--n", eval_n, "sample size");
    eval_cmd->add_option("--seeds", eval_seeds, "number of trials");
    eval_cmd->add_option("--base-seed", eval_base_seed, "first trial seed");
    eval_cmd->add_option("--knob", knob, "ablation knob (trees, depth, split-vars, "
                                         "mnar-levels, entropy-dims)");
    eval_cmd->add_option("--values", values_csv, "comma-separated knob values");
    eval_cmd->add_flag("--quick", quick, "skip distortion and geodesic correlation");
    eval_flags.attach(eval_cmd);
    eval_cmd->add_option("--config", config_path, "load options from a sidecar file");

    // cluster
    auto* cluster_cmd = app.add_subcommand("cluster",
                                           "spectral clustering of a forest or matrix");
    std::string cluster_input, cluster_labels = "labels.csv";
    std::string cluster_bandwidth = "adaptive:5";
    std::size_t cluster_k = 4;
    std::uint64_t cluster_seed = 0;
    cluster_cmd->add_option("--input", cluster_input, "forest file or distance matrix file")
        ->required();
    cluster_cmd->add_option("--k", cluster_k, "number of clusters");
    cluster_cmd->add_option("--bandwidth", cluster_bandwidth, "adaptive[:k] or fixed:<eps>");
    cluster_cmd->add_option("--seed", cluster_seed, "k-means seed");
    cluster_cmd->add_option("--out", cluster_labels, "labels CSV");
    cluster_cmd->add_option("--config", config_path, "load options from a sidecar file");

    try {
        auto args = expand_config_args(argc, argv);
        std::vector<const char*> argv2;
        argv2.reserve(args.size());
        for (const auto& a : args) argv2.push_back(a.c_str());
        app.parse(static_cast<int>(argv2.size()), argv2.data());
        if (fit_cmd->parsed())
            return cmd_fit(fit_data, fit_schema, fit_out, fit_flags, alpha, impute_iters,
                           fit_cmd);
        if (dist_cmd->parsed())
            return cmd_dist(dist_forest, dist_data, dist_out, dist_format, dist_affinity,
                            dist_bandwidth, dist_cmd);
        if (tswd_cmd->parsed())
            return cmd_tswd(tswd_forest, tswd_data, tswd_a, tswd_b, allow_overlap, per_tree,
                            tswd_out, tswd_importance, tswd_plot, tswd_cmd);
        if (eval_cmd->parsed())
            return cmd_eval(experiment, eval_dir, eval_n, eval_seeds, eval_base_seed, knob,
                            values_csv, quick, eval_flags, eval_cmd);
        if (cluster_cmd->parsed())
            return cmd_cluster(cluster_input, cluster_k, cluster_bandwidth, cluster_seed,
                               cluster_labels, cluster_cmd);
        return 1;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const UserError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}
