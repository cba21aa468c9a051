#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mural/forest.hpp"

namespace mural {

class SquareMatrix {
public:
    SquareMatrix() = default;
    explicit SquareMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

    std::size_t size() const { return n_; }
    double& at(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

private:
    std::size_t n_ = 0;
    std::vector<double> data_;
};

struct DistanceMatrix {
    SquareMatrix m;
    std::size_t size() const { return m.size(); }
    double operator()(std::size_t i, std::size_t j) const { return m.at(i, j); }
};

struct AffinityMatrix {
    SquareMatrix m;
    double bandwidth = 0.0;  // epsilon actually used
    std::size_t size() const { return m.size(); }
    double operator()(std::size_t i, std::size_t j) const { return m.at(i, j); }
};

struct DiffusionOperator {
    SquareMatrix m;
    std::vector<double> degrees;  // row sums of the affinity matrix
    std::size_t size() const { return m.size(); }
    double operator()(std::size_t i, std::size_t j) const { return m.at(i, j); }
};

// Pairwise path lengths between leaves, indexed in leaf_ids() order:
// d(a, b) = wdepth(a) + wdepth(b) - 2 * wdepth(lca(a, b)).
SquareMatrix tree_leaf_distances(const MuralTree& tree);

// Forest-averaged tree metric over the training rows.
DistanceMatrix forest_distance_matrix(const MuralForest& forest);
// Same, with rows routed through every tree (out-of-sample capable).
DistanceMatrix forest_distance_matrix(const MuralForest& forest, const Dataset& rows);

struct Bandwidth {
    enum class Kind { Fixed, AdaptiveKnn } kind = Kind::AdaptiveKnn;
    double epsilon = 1.0;
    int k = 5;

    static Bandwidth fixed(double epsilon);
    static Bandwidth adaptive_knn(int k = 5);
};

// K(i, j) = exp(-D(i, j)^2 / epsilon); the adaptive rule squares the median
// over rows of the k-th smallest nonzero distance.
AffinityMatrix affinity(const DistanceMatrix& dm, const Bandwidth& bw);

// Row-stochastic P = D^-1 K.
DiffusionOperator diffusion(const AffinityMatrix& k);

// Euclidean distances over all columns' numeric view (baseline pipelines);
// requires a fully observed dataset.
DistanceMatrix euclidean_distance_matrix(const Dataset& d);

// matrix file formats: CSV with row/column indices, and raw row-major
// binary with a 16-byte header (magic, version, n)
void write_matrix_csv(const SquareMatrix& m, std::ostream& out);
SquareMatrix read_matrix_csv(std::istream& in);
void write_matrix_binary(const SquareMatrix& m, std::ostream& out);
SquareMatrix read_matrix_binary(std::istream& in);
void save_matrix(const SquareMatrix& m, const std::string& path, bool binary);
SquareMatrix load_matrix(const std::string& path);  // sniffs the format

}  // namespace mural
