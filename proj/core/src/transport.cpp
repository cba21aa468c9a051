#include "mural/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace mural {

TreeDistribution cohort_distribution_from_leaves(const MuralTree& tree,
                                                 std::span<const std::int32_t> leaves) {
    if (leaves.empty()) throw UserError("cohort_distribution: empty cohort");
    TreeDistribution dist;
    dist.node_mass.assign(tree.nodes.size(), 0.0);
    const double w = 1.0 / static_cast<double>(leaves.size());
    for (auto leaf : leaves) dist.node_mass[static_cast<std::size_t>(leaf)] += w;
    // children precede nothing: nodes are preorder, so reverse iteration
    // pushes mass from leaves up to the root in one pass
    for (std::size_t id = tree.nodes.size(); id-- > 1;)
        dist.node_mass[static_cast<std::size_t>(tree.nodes[id].parent)] += dist.node_mass[id];
    return dist;
}

TreeDistribution cohort_distribution(const MuralTree& tree, const Dataset& d,
                                     std::span<const RowIndex> rows) {
    if (rows.empty()) throw UserError("cohort_distribution: empty cohort");
    std::vector<std::int32_t> leaves;
    leaves.reserve(rows.size());
    for (auto r : rows) leaves.push_back(tree.route(d, r));
    return cohort_distribution_from_leaves(tree, leaves);
}

namespace {

CohortDistribution cohorts_from_assignments(
    const MuralForest& forest, const std::vector<std::vector<std::int32_t>>& assignments,
    std::span<const RowIndex> rows) {
    if (rows.empty()) throw UserError("cohort_distribution: empty cohort");
    CohortDistribution out;
    out.cohort_size = rows.size();
    out.per_tree.resize(forest.trees.size());
    for (std::size_t t = 0; t < forest.trees.size(); ++t) {
        std::vector<std::int32_t> leaves;
        leaves.reserve(rows.size());
        for (auto r : rows) leaves.push_back(assignments[t][static_cast<std::size_t>(r)]);
        out.per_tree[t] = cohort_distribution_from_leaves(forest.trees[t], leaves);
    }
    return out;
}

}  // namespace

CohortDistribution forest_cohort_distribution(const MuralForest& forest,
                                              std::span<const RowIndex> rows) {
    return cohorts_from_assignments(forest, forest.leaf_assignments, rows);
}

std::vector<std::vector<std::int32_t>> route_all(const MuralForest& forest, const Dataset& d) {
    std::vector<std::vector<std::int32_t>> assignments(
        forest.trees.size(), std::vector<std::int32_t>(d.n_rows()));
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (std::int64_t t = 0; t < static_cast<std::int64_t>(forest.trees.size()); ++t)
        for (std::size_t r = 0; r < d.n_rows(); ++r)
            assignments[t][r] = forest.trees[t].route(d, static_cast<RowIndex>(r));
    return assignments;
}

double tree_wasserstein(const MuralTree& tree, const TreeDistribution& mu,
                        const TreeDistribution& nu) {
    if (mu.node_mass.size() != tree.nodes.size() || nu.node_mass.size() != tree.nodes.size())
        throw UserError("tree_wasserstein: distribution does not match the tree");
    double total = 0.0;
    for (std::size_t id = 1; id < tree.nodes.size(); ++id)
        total += tree.nodes[id].edge_weight * std::fabs(mu.node_mass[id] - nu.node_mass[id]);
    return total;
}

TswdResult forest_tswd(const MuralForest& forest, std::span<const RowIndex> cohort_a,
                       std::span<const RowIndex> cohort_b) {
    return forest_tswd(forest, forest.leaf_assignments, cohort_a, cohort_b);
}

TswdResult forest_tswd(const MuralForest& forest,
                       const std::vector<std::vector<std::int32_t>>& assignments,
                       std::span<const RowIndex> cohort_a, std::span<const RowIndex> cohort_b) {
    if (cohort_a.empty() || cohort_b.empty()) throw UserError("forest_tswd: empty cohort");
    const auto mu = cohorts_from_assignments(forest, assignments, cohort_a);
    const auto nu = cohorts_from_assignments(forest, assignments, cohort_b);
    TswdResult out;
    out.per_tree.resize(forest.trees.size());
    for (std::size_t t = 0; t < forest.trees.size(); ++t)
        out.per_tree[t] = tree_wasserstein(forest.trees[t], mu.per_tree[t], nu.per_tree[t]);
    double sum = 0.0;
    for (double v : out.per_tree) sum += v;
    out.mean = sum / static_cast<double>(out.per_tree.size());
    if (out.per_tree.size() > 1) {
        double ss = 0.0;
        for (double v : out.per_tree) ss += (v - out.mean) * (v - out.mean);
        out.stddev = std::sqrt(ss / static_cast<double>(out.per_tree.size() - 1));
    }
    return out;
}

double brute_force_emd(const SquareMatrix& ground, std::span<const double> mu,
                       std::span<const double> nu) {
    const std::size_t n = ground.size();
    if (mu.size() != n || nu.size() != n)
        throw UserError("brute_force_emd: mass vectors do not match the ground metric");
    if (n > 64) throw UserError("brute_force_emd: support larger than 64 points");
    double sum_mu = 0.0, sum_nu = 0.0;
    for (double v : mu) sum_mu += v;
    for (double v : nu) sum_nu += v;
    if (std::fabs(sum_mu - 1.0) > 1e-9 || std::fabs(sum_nu - 1.0) > 1e-9)
        throw UserError("brute_force_emd: masses must each sum to 1");

    // full bipartite transportation: every support point of mu is a source,
    // every support point of nu a sink (zero-cost diagonal arcs keep shared
    // mass in place, so no metric assumption is needed)
    std::vector<std::size_t> src, dst;
    std::vector<double> supply, demand;
    for (std::size_t i = 0; i < n; ++i) {
        if (mu[i] > 0.0) {
            src.push_back(i);
            supply.push_back(mu[i]);
        }
        if (nu[i] > 0.0) {
            dst.push_back(i);
            demand.push_back(nu[i]);
        }
    }
    if (src.empty() || dst.empty()) return 0.0;

    // successive shortest augmenting paths (Bellman-Ford on the residual
    // bipartite graph; residual arcs carry negative costs)
    const std::size_t ns = src.size(), nd = dst.size();
    std::vector<std::vector<double>> flow(ns, std::vector<double>(nd, 0.0));
    double total_cost = 0.0;
    double remaining = 0.0;
    for (double s : supply) remaining += s;

    std::vector<double> supply_left = supply, demand_left = demand;
    const double inf = std::numeric_limits<double>::infinity();
    std::size_t augmentations = 0;
    const std::size_t max_augmentations = ns * nd + ns + nd + 16;

    while (remaining > 1e-15) {
        if (++augmentations > max_augmentations)
            throw std::logic_error("brute_force_emd: augmentation cap exceeded");
        // nodes: 0..ns-1 sources, ns..ns+nd-1 sinks
        std::vector<double> dist(ns + nd, inf);
        std::vector<std::int32_t> prev(ns + nd, -1);  // predecessor node
        for (std::size_t i = 0; i < ns; ++i)
            if (supply_left[i] > 1e-15) dist[i] = 0.0;
        bool changed = true;
        std::size_t passes = 0;
        while (changed && passes++ <= ns + nd + 4) {
            changed = false;
            for (std::size_t i = 0; i < ns; ++i) {
                for (std::size_t j = 0; j < nd; ++j) {
                    const double c = ground.at(src[i], dst[j]);
                    if (dist[i] < inf && dist[i] + c < dist[ns + j] - 1e-18) {
                        dist[ns + j] = dist[i] + c;
                        prev[ns + j] = static_cast<std::int32_t>(i);
                        changed = true;
                    }
                    if (flow[i][j] > 1e-15 && dist[ns + j] < inf &&
                        dist[ns + j] - c < dist[i] - 1e-18) {
                        dist[i] = dist[ns + j] - c;
                        prev[i] = static_cast<std::int32_t>(ns + j);
                        changed = true;
                    }
                }
            }
        }
        // cheapest reachable sink with demand left
        std::int32_t best_sink = -1;
        for (std::size_t j = 0; j < nd; ++j)
            if (demand_left[j] > 1e-15 && dist[ns + j] < inf &&
                (best_sink < 0 || dist[ns + j] < dist[ns + best_sink]))
                best_sink = static_cast<std::int32_t>(j);
        if (best_sink < 0) throw UserError("brute_force_emd: no augmenting path (unbalanced?)");

        // walk the path back to find the bottleneck
        double push = demand_left[best_sink];
        std::int32_t node = static_cast<std::int32_t>(ns) + best_sink;
        while (true) {
            const std::int32_t p = prev[node];
            if (node >= static_cast<std::int32_t>(ns)) {
                if (p < 0) break;
                node = p;  // forward arc source->sink, no capacity bound
            } else {
                if (p < 0) {
                    push = std::min(push, supply_left[node]);
                    break;
                }
                push = std::min(push, flow[node][p - static_cast<std::int32_t>(ns)]);
                node = p;
            }
        }
        // apply
        node = static_cast<std::int32_t>(ns) + best_sink;
        while (true) {
            const std::int32_t p = prev[node];
            if (node >= static_cast<std::int32_t>(ns)) {
                if (p < 0) break;
                const auto j = static_cast<std::size_t>(node) - ns;
                flow[p][j] += push;
                total_cost += push * ground.at(src[p], dst[j]);
                node = p;
            } else {
                if (p < 0) {
                    supply_left[node] -= push;
                    break;
                }
                const auto j = static_cast<std::size_t>(p) - ns;
                flow[node][j] -= push;
                total_cost -= push * ground.at(src[node], dst[j]);
                node = p;
            }
        }
        demand_left[best_sink] -= push;
        remaining -= push;
    }
    return total_cost;
}

std::string FeatureImportanceReport::to_csv(const Schema& schema) const {
    std::ostringstream out;
    out << "variable,share\n";
    char buf[32];
    for (const auto& [var, share] : shares) {
        std::snprintf(buf, sizeof(buf), "%.9g", share);
        out << schema.column(var).name << ',' << buf << '\n';
    }
    return out.str();
}

FeatureImportanceReport feature_importance(const MuralForest& forest,
                                           std::span<const RowIndex> cohort_a,
                                           std::span<const RowIndex> cohort_b) {
    return feature_importance(forest, forest.leaf_assignments, cohort_a, cohort_b);
}

FeatureImportanceReport feature_importance(
    const MuralForest& forest, const std::vector<std::vector<std::int32_t>>& assignments,
    std::span<const RowIndex> cohort_a, std::span<const RowIndex> cohort_b) {
    if (cohort_a.empty() || cohort_b.empty()) throw UserError("feature_importance: empty cohort");
    const std::size_t p = forest.schema.n_cols();
    std::vector<double> credit(p, 0.0);

    const auto mu = cohorts_from_assignments(forest, assignments, cohort_a);
    const auto nu = cohorts_from_assignments(forest, assignments, cohort_b);
    for (std::size_t t = 0; t < forest.trees.size(); ++t) {
        const auto& tree = forest.trees[t];
        for (std::size_t id = 1; id < tree.nodes.size(); ++id) {
            const double contribution =
                tree.nodes[id].edge_weight *
                std::fabs(mu.per_tree[t].node_mass[id] - nu.per_tree[t].node_mass[id]);
            if (contribution <= 0.0) continue;
            const auto& parent = tree.nodes[tree.nodes[id].parent];
            const auto& split = *parent.split;
            std::size_t var = static_cast<std::size_t>(split_var(split));
            if (const auto* m = std::get_if<MnarFourWay>(&split)) {
                // children 2 and 3 sit on the missing branch
                const bool missing_branch =
                    parent.children[2] == static_cast<std::int32_t>(id) ||
                    parent.children[3] == static_cast<std::int32_t>(id);
                if (missing_branch) var = static_cast<std::size_t>(m->aux_var);
            }
            credit[var] += contribution;
        }
    }

    FeatureImportanceReport report;
    double total = 0.0;
    for (double c : credit) total += c;
    report.degenerate = total <= 0.0;
    for (std::size_t v = 0; v < p; ++v)
        report.shares.emplace_back(v, report.degenerate ? 0.0 : credit[v] / total);
    std::stable_sort(report.shares.begin(), report.shares.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    return report;
}

}  // namespace mural
