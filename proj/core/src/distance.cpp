#include "mural/distance.hpp"

#include <algorithm>
#include <cmath>

namespace mural {

SquareMatrix tree_leaf_distances(const MuralTree& tree) {
    const auto leaves = tree.leaf_ids();
    const std::size_t n_leaves = leaves.size();
    std::vector<std::int32_t> leaf_slot(tree.nodes.size(), -1);
    for (std::size_t i = 0; i < n_leaves; ++i) leaf_slot[leaves[i]] = static_cast<std::int32_t>(i);

    SquareMatrix out(n_leaves, 0.0);

    // Pairs are resolved at their lowest common ancestor: a post-order merge
    // of (leaf, weighted depth) lists touches every leaf pair exactly once.
    struct Entry {
        std::int32_t slot;
        double wdepth;
    };
    std::vector<std::vector<Entry>> pending(tree.nodes.size());
    for (std::size_t id_plus = tree.nodes.size(); id_plus > 0; --id_plus) {
        const auto id = id_plus - 1;
        const auto& node = tree.nodes[id];
        auto& mine = pending[id];
        if (node.is_leaf()) {
            mine.push_back({leaf_slot[id], 0.0});
        } else {
            for (auto c : node.children) {
                auto& theirs = pending[c];
                const double w = tree.nodes[c].edge_weight;
                for (auto& e : theirs) e.wdepth += w;
                for (const auto& a : mine)
                    for (const auto& b : theirs) {
                        const double dist = a.wdepth + b.wdepth;
                        out.at(a.slot, b.slot) = dist;
                        out.at(b.slot, a.slot) = dist;
                    }
                if (theirs.size() > mine.size()) mine.swap(theirs);
                mine.insert(mine.end(), theirs.begin(), theirs.end());
                theirs.clear();
                theirs.shrink_to_fit();
            }
        }
    }
    return out;
}

namespace {

DistanceMatrix average_over_trees(const MuralForest& forest,
                                  const std::vector<std::vector<std::int32_t>>& assignments,
                                  std::size_t n) {
    DistanceMatrix dm{SquareMatrix(n, 0.0)};
    const double inv_k = 1.0 / static_cast<double>(forest.trees.size());

    for (std::size_t t = 0; t < forest.trees.size(); ++t) {
        const auto& tree = forest.trees[t];
        const auto leaves = tree.leaf_ids();
        std::vector<std::int32_t> leaf_slot(tree.nodes.size(), -1);
        for (std::size_t i = 0; i < leaves.size(); ++i)
            leaf_slot[leaves[i]] = static_cast<std::int32_t>(i);
        const auto ld = tree_leaf_distances(tree);

        std::vector<std::int32_t> slot_of(n);
        for (std::size_t r = 0; r < n; ++r) slot_of[r] = leaf_slot[assignments[t][r]];

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
            const auto si = slot_of[static_cast<std::size_t>(i)];
            double* row = &dm.m.at(static_cast<std::size_t>(i), 0);
            for (std::size_t j = 0; j < n; ++j) row[j] += ld.at(si, slot_of[j]);
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) dm.m.at(i, j) *= inv_k;
        dm.m.at(i, i) = 0.0;
    }
    return dm;
}

}  // namespace

DistanceMatrix forest_distance_matrix(const MuralForest& forest) {
    if (forest.trees.empty()) throw UserError("forest has no trees");
    return average_over_trees(forest, forest.leaf_assignments, forest.n_rows);
}

DistanceMatrix forest_distance_matrix(const MuralForest& forest, const Dataset& rows) {
    if (forest.trees.empty()) throw UserError("forest has no trees");
    const std::size_t n = rows.n_rows();
    std::vector<std::vector<std::int32_t>> assignments(
        forest.trees.size(), std::vector<std::int32_t>(n));
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (std::int64_t t = 0; t < static_cast<std::int64_t>(forest.trees.size()); ++t)
        for (std::size_t r = 0; r < n; ++r)
            assignments[t][r] = forest.trees[t].route(rows, static_cast<RowIndex>(r));
    return average_over_trees(forest, assignments, n);
}

Bandwidth Bandwidth::fixed(double epsilon) {
    if (!(epsilon > 0.0)) throw UserError("bandwidth epsilon must be > 0");
    return {Kind::Fixed, epsilon, 0};
}

Bandwidth Bandwidth::adaptive_knn(int k) {
    if (k < 1) throw UserError("bandwidth k must be >= 1");
    return {Kind::AdaptiveKnn, 0.0, k};
}

AffinityMatrix affinity(const DistanceMatrix& dm, const Bandwidth& bw) {
    const std::size_t n = dm.size();
    double epsilon = bw.epsilon;
    if (bw.kind == Bandwidth::Kind::AdaptiveKnn) {
        std::vector<double> kth;
        kth.reserve(n);
        std::vector<double> nonzero;
        for (std::size_t i = 0; i < n; ++i) {
            nonzero.clear();
            for (std::size_t j = 0; j < n; ++j) {
                const double v = dm(i, j);
                if (j != i && v > 0.0) nonzero.push_back(v);
            }
            if (nonzero.empty()) continue;
            const std::size_t k =
                std::min<std::size_t>(static_cast<std::size_t>(bw.k), nonzero.size());
            std::nth_element(nonzero.begin(), nonzero.begin() + (k - 1), nonzero.end());
            kth.push_back(nonzero[k - 1]);
        }
        if (kth.empty())
            throw UserError("adaptive bandwidth: distance matrix has no nonzero entries");
        std::nth_element(kth.begin(), kth.begin() + kth.size() / 2, kth.end());
        const double med = kth[kth.size() / 2];
        epsilon = med * med;
        if (!(epsilon > 0.0)) throw UserError("adaptive bandwidth collapsed to zero");
    }

    AffinityMatrix out{SquareMatrix(n, 0.0), epsilon};
    for (std::size_t i = 0; i < n; ++i) {
        out.m.at(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = dm(i, j);
            const double v = std::exp(-(d * d) / epsilon);
            out.m.at(i, j) = v;
            out.m.at(j, i) = v;
        }
    }
    return out;
}

DiffusionOperator diffusion(const AffinityMatrix& k) {
    const std::size_t n = k.size();
    DiffusionOperator out{SquareMatrix(n, 0.0), std::vector<double>(n, 0.0)};
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) sum += k(i, j);
        if (!(sum > 0.0)) throw UserError("diffusion: affinity row " + std::to_string(i) +
                                          " has non-positive sum");
        out.degrees[i] = sum;
        for (std::size_t j = 0; j < n; ++j) out.m.at(i, j) = k(i, j) / sum;
    }
    return out;
}

DistanceMatrix euclidean_distance_matrix(const Dataset& d) {
    const std::size_t n = d.n_rows();
    const std::size_t p = d.n_cols();
    std::vector<double> flat(n * p);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < p; ++c) {
            if (d.is_missing(c, static_cast<RowIndex>(r)))
                throw UserError("euclidean_distance_matrix: dataset has masked cells");
            flat[r * p + c] = d.numeric(c, static_cast<RowIndex>(r));
        }
    DistanceMatrix dm{SquareMatrix(n, 0.0)};
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        for (std::size_t j = static_cast<std::size_t>(i) + 1; j < n; ++j) {
            double ss = 0.0;
            for (std::size_t c = 0; c < p; ++c) {
                const double diff = flat[static_cast<std::size_t>(i) * p + c] - flat[j * p + c];
                ss += diff * diff;
            }
            const double v = std::sqrt(ss);
            dm.m.at(static_cast<std::size_t>(i), j) = v;
            dm.m.at(j, static_cast<std::size_t>(i)) = v;
        }
    }
    return dm;
}

}  // namespace mural
