#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "mural/distance.hpp"
#include "oracles.hpp"

using namespace mural;

namespace {

// depth-3 / depth-1 pair whose lowest common ancestor is the root
MuralTree lopsided_tree() {
    MuralTree tree;
    tree.nodes.resize(7);
    auto link = [&](int id, int parent) {
        tree.nodes[id].parent = parent;
        tree.nodes[id].depth = tree.nodes[parent].depth + 1;
    };
    tree.nodes[0].split = ContinuousSplit{0, 0.0};
    tree.nodes[0].children = {1, 2};
    tree.nodes[0].child_counts = {1, 1};
    link(1, 0);
    tree.nodes[1].split = ContinuousSplit{0, 0.0};
    tree.nodes[1].children = {3, 4};
    tree.nodes[1].child_counts = {1, 1};
    link(2, 0);  // leaf at depth 1
    link(3, 1);
    tree.nodes[3].split = ContinuousSplit{0, 0.0};
    tree.nodes[3].children = {5, 6};
    tree.nodes[3].child_counts = {1, 1};
    link(4, 1);  // leaf at depth 2
    link(5, 3);  // leaf at depth 3
    link(6, 3);  // leaf at depth 3
    return tree;
}

}  // namespace

TEST_CASE("tree_leaf_distances on a hand tree") {
    const auto tree = lopsided_tree();
    const auto leaves = tree.leaf_ids();  // {2, 4, 5, 6}
    REQUIRE(leaves == std::vector<std::int32_t>{2, 4, 5, 6});
    const auto dist = tree_leaf_distances(tree);

    CHECK(dist.at(0, 0) == 0.0);
    CHECK(dist.at(2, 3) == 2.0);  // siblings under node 3
    CHECK(dist.at(0, 2) == 4.0);  // depth 3 and depth 1 through the root
    CHECK(dist.at(0, 1) == 3.0);
    CHECK(dist.at(1, 2) == 3.0);  // depth 2 and depth 3 meeting at depth 1
}

TEST_CASE("tree distances match graph search on random trees") {
    Rng rng(404, 0);
    for (int trial = 0; trial < 60; ++trial) {
        const bool weighted = trial % 3 == 0;
        const auto tree = oracle::random_tree(rng, 4 + rng.uniform_index(29), weighted);
        const auto fast = tree_leaf_distances(tree);
        const auto slow = oracle::leaf_distances_by_search(tree);
        const std::size_t n = slow.size();
        REQUIRE(fast.size() == n);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b)
                CHECK(fast.at(a, b) == doctest::Approx(slow[a][b]).epsilon(1e-12));
        // metric axioms: symmetry and triangle inequality
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b) {
                CHECK(fast.at(a, b) == fast.at(b, a));
                for (std::size_t c = 0; c < n; ++c)
                    CHECK(fast.at(a, b) <= fast.at(a, c) + fast.at(c, b) + 1e-9);
            }
    }
}

namespace {

Schema two_cols() {
    std::vector<ColumnSpec> cols{
        {"a", ColumnKind::continuous(), MissingnessHint::Auto, "NA"},
        {"b", ColumnKind::continuous(), MissingnessHint::Auto, "NA"},
    };
    return Schema(std::move(cols));
}

MuralForest tiny_forest(const Dataset& d, int n_trees, int depth, std::uint64_t seed) {
    ForestConfig config;
    config.n_trees = n_trees;
    config.max_depth = depth;
    config.min_leaf = 2;
    config.seed = seed;
    return fit(d, config);
}

}  // namespace

TEST_CASE("forest_distance_matrix basics") {
    Rng rng(9, 0);
    Dataset d(two_cols(), 30);
    for (std::size_t r = 0; r < 30; ++r) {
        d.set_real(0, static_cast<RowIndex>(r), rng.normal());
        d.set_real(1, static_cast<RowIndex>(r), rng.normal());
    }

    SUBCASE("single-leaf forest gives zeros") {
        const auto forest = tiny_forest(d, 1, 0, 1);
        const auto dm = forest_distance_matrix(forest);
        for (std::size_t i = 0; i < dm.size(); ++i)
            for (std::size_t j = 0; j < dm.size(); ++j) CHECK(dm(i, j) == 0.0);
    }
    SUBCASE("symmetry, zero diagonal, triangle inequality") {
        const auto forest = tiny_forest(d, 7, 4, 2);
        const auto dm = forest_distance_matrix(forest);
        Rng trng(5, 0);
        for (std::size_t i = 0; i < dm.size(); ++i) CHECK(dm(i, i) == 0.0);
        for (int trial = 0; trial < 2000; ++trial) {
            const auto i = trng.uniform_index(30), j = trng.uniform_index(30),
                       k = trng.uniform_index(30);
            CHECK(dm(i, j) == dm(j, i));
            CHECK(dm(i, j) <= dm(i, k) + dm(k, j) + 1e-9);
        }
    }
    SUBCASE("duplicating every tree leaves the average unchanged") {
        auto forest = tiny_forest(d, 5, 4, 3);
        const auto dm = forest_distance_matrix(forest);
        MuralForest doubled = forest;
        for (const auto& tree : forest.trees) doubled.trees.push_back(tree);
        for (const auto& la : forest.leaf_assignments)
            doubled.leaf_assignments.push_back(la);
        const auto dm2 = forest_distance_matrix(doubled);
        for (std::size_t i = 0; i < dm.size(); ++i)
            for (std::size_t j = 0; j < dm.size(); ++j)
                CHECK(dm2(i, j) == doctest::Approx(dm(i, j)).epsilon(1e-12));
    }
    SUBCASE("scaling edge weights scales the matrix") {
        auto forest = tiny_forest(d, 5, 4, 3);
        const auto dm = forest_distance_matrix(forest);
        const double c = 3.25;
        MuralForest scaled = forest;
        for (auto& tree : scaled.trees)
            for (auto& node : tree.nodes) node.edge_weight *= c;
        const auto dms = forest_distance_matrix(scaled);
        for (std::size_t i = 0; i < dm.size(); ++i)
            for (std::size_t j = 0; j < dm.size(); ++j)
                CHECK(dms(i, j) == doctest::Approx(c * dm(i, j)).epsilon(1e-12));
    }
    SUBCASE("routed matrix agrees on the training rows") {
        const auto forest = tiny_forest(d, 5, 4, 3);
        const auto a = forest_distance_matrix(forest);
        const auto b = forest_distance_matrix(forest, d);
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t j = 0; j < a.size(); ++j) CHECK(a(i, j) == b(i, j));
    }
    SUBCASE("two hand trees match hand-averaged path lengths") {
        // tree A: root with leaves {0,1} | {2}; tree B: root with {0} | {1,2}
        auto make = [](const std::vector<std::vector<RowIndex>>& parts) {
            MuralTree tree;
            tree.nodes.resize(3);
            tree.nodes[0].split = ContinuousSplit{0, 0.0};
            tree.nodes[0].children = {1, 2};
            tree.nodes[0].child_counts = {
                static_cast<std::int64_t>(parts[0].size()),
                static_cast<std::int64_t>(parts[1].size())};
            for (int c = 0; c < 2; ++c) {
                tree.nodes[c + 1].parent = 0;
                tree.nodes[c + 1].depth = 1;
                tree.nodes[c + 1].rows = parts[c];
            }
            return tree;
        };
        MuralForest forest;
        forest.n_rows = 3;
        forest.trees = {make({{0, 1}, {2}}), make({{0}, {1, 2}})};
        forest.leaf_assignments = {{1, 1, 2}, {1, 2, 2}};
        const auto dm = forest_distance_matrix(forest);
        // d(0,1): tree A 0, tree B 2 -> 1; d(0,2): 2,2 -> 2; d(1,2): 2,0 -> 1
        CHECK(dm(0, 1) == doctest::Approx(1.0));
        CHECK(dm(0, 2) == doctest::Approx(2.0));
        CHECK(dm(1, 2) == doctest::Approx(1.0));
    }
}

TEST_CASE("affinity") {
    DistanceMatrix dm{SquareMatrix(4, 0.0)};
    const double hand[4][4] = {{0, 1, 2, 3}, {1, 0, 1.5, 2.5}, {2, 1.5, 0, 1}, {3, 2.5, 1, 0}};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) dm.m.at(i, j) = hand[i][j];

    SUBCASE("fixed bandwidth matches scalar evaluation") {
        const auto k = affinity(dm, Bandwidth::fixed(4.0));
        CHECK(k.bandwidth == 4.0);
        for (int i = 0; i < 4; ++i) CHECK(k(i, i) == 1.0);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                CHECK(k(i, j) ==
                      doctest::Approx(std::exp(-hand[i][j] * hand[i][j] / 4.0)).epsilon(1e-12));
        // d^2 = epsilon -> e^-1
        CHECK(k(0, 2) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    }
    SUBCASE("adaptive knn bandwidth") {
        const auto k = affinity(dm, Bandwidth::adaptive_knn(2));
        // 2nd-smallest nonzero per row: {2, 1.5, 1.5, 2.5}; median picks 2
        CHECK(k.bandwidth == doctest::Approx(4.0));
    }
    SUBCASE("all-zero matrix rejected under adaptive bandwidth") {
        DistanceMatrix zeros{SquareMatrix(3, 0.0)};
        CHECK_THROWS_AS(affinity(zeros, Bandwidth::adaptive_knn(2)), UserError);
    }
}

TEST_CASE("diffusion") {
    SUBCASE("rows sum to one") {
        DistanceMatrix dm{SquareMatrix(5, 0.0)};
        Rng rng(3, 0);
        for (int i = 0; i < 5; ++i)
            for (int j = i + 1; j < 5; ++j) {
                const double v = rng.uniform(0.5, 3.0);
                dm.m.at(i, j) = v;
                dm.m.at(j, i) = v;
            }
        const auto p = diffusion(affinity(dm, Bandwidth::fixed(2.0)));
        for (int i = 0; i < 5; ++i) {
            double sum = 0.0;
            for (int j = 0; j < 5; ++j) {
                sum += p(i, j);
                CHECK(p(i, j) >= 0.0);
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
    SUBCASE("constant affinity gives uniform rows") {
        AffinityMatrix k{SquareMatrix(4, 1.0), 1.0};
        const auto p = diffusion(k);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) CHECK(p(i, j) == doctest::Approx(0.25));
    }
    SUBCASE("hand-normalized 3x3") {
        AffinityMatrix k{SquareMatrix(3, 0.0), 1.0};
        const double hand[3][3] = {{1.0, 0.5, 0.5}, {0.5, 1.0, 0.25}, {0.5, 0.25, 1.0}};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) k.m.at(i, j) = hand[i][j];
        const auto p = diffusion(k);
        CHECK(p(0, 1) == doctest::Approx(0.25));
        CHECK(p(1, 2) == doctest::Approx(0.25 / 1.75));
        CHECK(p.degrees[0] == doctest::Approx(2.0));
    }
}

TEST_CASE("matrix io round trips") {
    Rng rng(12, 0);
    SquareMatrix m(6, 0.0);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) m.at(i, j) = rng.uniform(-10.0, 10.0);

    SUBCASE("csv") {
        std::ostringstream out;
        write_matrix_csv(m, out);
        std::istringstream in(out.str());
        const auto back = read_matrix_csv(in);
        REQUIRE(back.size() == 6);
        for (std::size_t i = 0; i < 6; ++i)
            for (std::size_t j = 0; j < 6; ++j) CHECK(back.at(i, j) == m.at(i, j));
    }
    SUBCASE("binary") {
        std::ostringstream out;
        write_matrix_binary(m, out);
        CHECK(out.str().size() == 16 + 6 * 6 * 8);  // 16-byte header
        std::istringstream in(out.str());
        const auto back = read_matrix_binary(in);
        REQUIRE(back.size() == 6);
        for (std::size_t i = 0; i < 6; ++i)
            for (std::size_t j = 0; j < 6; ++j) CHECK(back.at(i, j) == m.at(i, j));
    }
    SUBCASE("binary header is rejected when damaged") {
        std::ostringstream out;
        write_matrix_binary(m, out);
        std::string bad = out.str();
        bad[0] = 'x';
        std::istringstream in(bad);
        CHECK_THROWS_AS(read_matrix_binary(in), UserError);
    }
}
