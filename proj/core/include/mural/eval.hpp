#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mural/dataset.hpp"
#include "mural/distance.hpp"

namespace mural {

struct SwissRollSample {
    std::vector<double> t, h;  // intrinsic coordinates
    Dataset ambient;           // 5 continuous columns x1..x5
};

// t ~ U[1.5*pi, 4.5*pi], h ~ U[0, 20];
// ambient = (t cos t, h, t sin t, 0.5 t + g4, 0.5 h + g5) plus optional
// isotropic Gaussian noise on every coordinate.
SwissRollSample gen_swiss_roll_5d(std::size_t n = 3000, double noise = 0.0,
                                  std::uint64_t seed = 0);

// Mean over rows of |kNN_est(i) ∩ kNN_true(i)| / k, self excluded, distance
// ties broken by row index.
double precision_at_k(const DistanceMatrix& est, const DistanceMatrix& truth, std::size_t k);

// Scale-invariant squared relative error over sampled pairs after a
// least-squares scale fit. A documented proxy; absolute values are not
// comparable across implementations of other distortion definitions.
double distortion(const DistanceMatrix& est, const DistanceMatrix& truth,
                  std::size_t sample_pairs = 10000, std::uint64_t seed = 0);

// Geodesic matrix of the Euclidean k-nearest-neighbour graph over a fully
// observed standardized dataset; throws UserError when disconnected.
SquareMatrix knn_geodesic_matrix(const Dataset& complete_standardized, std::size_t k_graph);

// Spearman rank correlation between est and the shortest-path distances of
// the complete data's kNN graph (k_graph doubled once on disconnection).
double geodesic_correlation(const DistanceMatrix& est, const SwissRollSample& truth,
                            std::size_t k_graph = 10);
// Same with a precomputed geodesic matrix.
double geodesic_correlation_from(const DistanceMatrix& est, const SquareMatrix& geodesic);

// Spearman correlation with midrank ties; pairs sampled when there are more
// than ~1e5 of them.
double spearman(std::span<const double> a, std::span<const double> b);

// k-means (k-means++ seeding, 10 restarts) on the top-k right eigenvectors
// of P with the constant direction projected out.
std::vector<std::int32_t> spectral_cluster(const DiffusionOperator& p, std::size_t k,
                                           std::uint64_t seed);

// Mean over points of (b - a) / max(a, b); singleton clusters score 0.
double silhouette(const DistanceMatrix& dm, std::span<const std::int32_t> labels);

// Euclidean distances between rows of the diffusion operator: the geometry
// spectral clustering actually works in.
DistanceMatrix diffusion_distances(const DiffusionOperator& p);

double adjusted_rand_index(std::span<const std::int32_t> a, std::span<const std::int32_t> b);

struct MixedColumnSpec {
    ColumnKind kind = ColumnKind::continuous();
    // continuous: per-group mean, shared sigma
    std::vector<double> group_means;
    double sigma = 1.0;
    // discrete: per-group distribution over codes
    std::vector<std::vector<double>> group_probs;
};

struct MixedMnarRule {
    std::size_t column = 0;
    double quantile = 0.9;  // mask observed values beyond this quantile
    bool above = true;
};

struct MixedClinicalSpec {
    std::size_t n_groups = 2;
    std::vector<double> group_weights;  // empty = uniform
    std::vector<MixedColumnSpec> columns;
    std::vector<MixedMnarRule> mnar_rules;

    void validate() const;
    // 2 well-separated groups over 4 continuous + 1 binary + 1 ordinal
    // column, with a group-tied MNAR threshold rule on column 0
    static MixedClinicalSpec two_group_default();
};

struct MixedClinicalSample {
    Dataset data;
    std::vector<std::int32_t> group;
};

MixedClinicalSample gen_mixed_clinical(std::size_t n, const MixedClinicalSpec& spec,
                                       std::uint64_t seed);

}  // namespace mural
