// Chained-equations imputer: shallow regression/classification trees fitted
// per target column on all other columns' working values.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mural/missingness.hpp"

namespace mural {

namespace {

constexpr int kImputeDepth = 3;
constexpr std::size_t kImputeMinLeaf = 5;
constexpr std::size_t kImputeCandidates = 16;

struct ImputeNode {
    int feature = -1;  // -1 => leaf
    double threshold = 0.0;
    double value = 0.0;  // leaf prediction
    int left = -1, right = -1;
};

struct ImputeTree {
    std::vector<ImputeNode> nodes;

    double predict(const std::vector<std::vector<double>>& work, std::size_t row) const {
        int id = 0;
        while (nodes[id].feature >= 0)
            id = work[nodes[id].feature][row] <= nodes[id].threshold ? nodes[id].left
                                                                     : nodes[id].right;
        return nodes[id].value;
    }
};

double leaf_value_continuous(const std::vector<double>& y, const std::vector<std::size_t>& rows) {
    double s = 0.0;
    for (auto r : rows) s += y[r];
    return s / static_cast<double>(rows.size());
}

double leaf_value_mode(const std::vector<double>& y, const std::vector<std::size_t>& rows,
                       std::int32_t code_count) {
    std::vector<std::int64_t> counts(code_count, 0);
    for (auto r : rows) counts[static_cast<std::int32_t>(y[r])]++;
    return static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

// sum of squared deviations (continuous) or Gini-weighted count (discrete)
double impurity(const std::vector<double>& y, const std::vector<std::size_t>& rows,
                bool discrete, std::int32_t code_count) {
    const auto n = static_cast<double>(rows.size());
    if (!discrete) {
        double s = 0.0, ss = 0.0;
        for (auto r : rows) {
            s += y[r];
            ss += y[r] * y[r];
        }
        return ss - s * s / n;
    }
    std::vector<std::int64_t> counts(code_count, 0);
    for (auto r : rows) counts[static_cast<std::int32_t>(y[r])]++;
    double gini = 1.0;
    for (auto c : counts) {
        const double p = static_cast<double>(c) / n;
        gini -= p * p;
    }
    return gini * n;
}

int build_node(ImputeTree& tree, const std::vector<std::vector<double>>& work,
               const std::vector<double>& y, std::vector<std::size_t> rows, int depth,
               std::size_t target, bool discrete, std::int32_t code_count) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    auto make_leaf = [&] {
        tree.nodes[id].value = discrete ? leaf_value_mode(y, rows, code_count)
                                        : leaf_value_continuous(y, rows);
        return id;
    };
    if (depth >= kImputeDepth || rows.size() < 2 * kImputeMinLeaf) return make_leaf();

    const double parent_imp = impurity(y, rows, discrete, code_count);
    double best_gain = 1e-12;
    int best_feature = -1;
    double best_threshold = 0.0;

    for (std::size_t f = 0; f < work.size(); ++f) {
        if (f == target) continue;
        std::vector<double> vals;
        vals.reserve(rows.size());
        for (auto r : rows) vals.push_back(work[f][r]);
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        if (vals.size() < 2) continue;
        std::vector<double> cands;
        const std::size_t n_mid = vals.size() - 1;
        const std::size_t take = std::min(n_mid, kImputeCandidates);
        for (std::size_t j = 0; j < take; ++j) {
            const std::size_t m = n_mid * (2 * j + 1) / (2 * take);
            cands.push_back(0.5 * (vals[m] + vals[m + 1]));
        }
        for (double thr : cands) {
            std::vector<std::size_t> left, right;
            for (auto r : rows) (work[f][r] <= thr ? left : right).push_back(r);
            if (left.size() < kImputeMinLeaf || right.size() < kImputeMinLeaf) continue;
            const double gain = parent_imp - impurity(y, left, discrete, code_count) -
                                impurity(y, right, discrete, code_count);
            if (gain > best_gain) {
                best_gain = gain;
                best_feature = static_cast<int>(f);
                best_threshold = thr;
            }
        }
    }
    if (best_feature < 0) return make_leaf();

    std::vector<std::size_t> left, right;
    for (auto r : rows) (work[best_feature][r] <= best_threshold ? left : right).push_back(r);
    tree.nodes[id].feature = best_feature;
    tree.nodes[id].threshold = best_threshold;
    tree.nodes[id].left =
        build_node(tree, work, y, std::move(left), depth + 1, target, discrete, code_count);
    tree.nodes[id].right =
        build_node(tree, work, y, std::move(right), depth + 1, target, discrete, code_count);
    return id;
}

}  // namespace

Dataset impute_random_missing(const Dataset& d, const MissingnessProfile& profile,
                              int iterations) {
    const std::size_t n = d.n_rows();
    const std::size_t p = d.n_cols();

    std::vector<std::size_t> targets;
    for (const auto& cm : profile.columns)
        if (cm.classification == MissingClass::Random && cm.missing_count > 0)
            targets.push_back(cm.col);
    if (targets.empty()) return d;

    // working copy: every masked cell gets a mean/mode placeholder so any
    // column can serve as a predictor
    std::vector<std::vector<double>> work(p, std::vector<double>(n, 0.0));
    for (std::size_t c = 0; c < p; ++c) {
        const bool discrete = d.schema().column(c).kind.is_discrete();
        double fill = 0.0;
        {
            std::size_t seen = 0;
            if (discrete) {
                std::vector<std::int64_t> counts(d.schema().column(c).kind.code_count(), 0);
                for (std::size_t r = 0; r < n; ++r)
                    if (!d.is_missing(c, static_cast<RowIndex>(r))) {
                        counts[d.code(c, static_cast<RowIndex>(r))]++;
                        ++seen;
                    }
                if (seen > 0)
                    fill = static_cast<double>(
                        std::max_element(counts.begin(), counts.end()) - counts.begin());
            } else {
                double s = 0.0;
                for (std::size_t r = 0; r < n; ++r)
                    if (!d.is_missing(c, static_cast<RowIndex>(r))) {
                        s += d.real(c, static_cast<RowIndex>(r));
                        ++seen;
                    }
                if (seen > 0) fill = s / static_cast<double>(seen);
            }
        }
        for (std::size_t r = 0; r < n; ++r) {
            const auto row = static_cast<RowIndex>(r);
            work[c][r] = d.is_missing(c, row) ? fill : d.numeric(c, row);
        }
    }

    for (int cycle = 0; cycle < iterations; ++cycle) {
        for (auto t : targets) {
            const bool discrete = d.schema().column(t).kind.is_discrete();
            const std::int32_t code_count =
                discrete ? d.schema().column(t).kind.code_count() : 0;
            std::vector<std::size_t> observed, masked;
            for (std::size_t r = 0; r < n; ++r)
                (d.is_missing(t, static_cast<RowIndex>(r)) ? masked : observed).push_back(r);
            if (observed.empty() || masked.empty()) continue;

            std::vector<double> y(n, 0.0);
            for (auto r : observed) y[r] = d.numeric(t, static_cast<RowIndex>(r));

            ImputeTree tree;
            build_node(tree, work, y, observed, 0, t, discrete, code_count);
            for (auto r : masked) work[t][r] = tree.predict(work, r);
        }
    }

    Dataset out = d;
    for (auto t : targets) {
        const auto& kind = d.schema().column(t).kind;
        for (std::size_t r = 0; r < n; ++r) {
            const auto row = static_cast<RowIndex>(r);
            if (!d.is_missing(t, row)) continue;
            if (kind.is_discrete()) {
                auto code = static_cast<std::int32_t>(std::lround(work[t][r]));
                code = std::clamp(code, 0, kind.code_count() - 1);
                out.set_code(t, row, code);
            } else {
                out.set_real(t, row, work[t][r]);
            }
        }
    }
    return out;
}

}  // namespace mural
