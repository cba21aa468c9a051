// Spectral clustering on a diffusion operator: symmetrize through the degree
// vector, eigendecompose, drop the constant direction, k-means the rest.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "mural/eval.hpp"
#include "mural/rng.hpp"

namespace mural {

namespace {

struct KMeansResult {
    std::vector<std::int32_t> labels;
    double inertia = std::numeric_limits<double>::infinity();
};

KMeansResult lloyd_once(const Eigen::MatrixXd& x, std::size_t k, Rng& rng) {
    const auto n = static_cast<std::size_t>(x.rows());

    // k-means++ seeding
    std::vector<std::size_t> centers_idx;
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    centers_idx.push_back(static_cast<std::size_t>(rng.uniform_index(n)));
    while (centers_idx.size() < k) {
        const auto& last = centers_idx.back();
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = (x.row(static_cast<Eigen::Index>(i)) -
                              x.row(static_cast<Eigen::Index>(last)))
                                 .squaredNorm();
            d2[i] = std::min(d2[i], d);
            total += d2[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double u = rng.uniform() * total;
            for (std::size_t i = 0; i < n; ++i) {
                u -= d2[i];
                if (u <= 0.0) {
                    pick = i;
                    break;
                }
                pick = i;
            }
        } else {
            // all remaining points coincide with a center: take the first unused
            std::vector<bool> used(n, false);
            for (auto c : centers_idx) used[c] = true;
            while (pick < n && used[pick]) ++pick;
            if (pick == n) pick = 0;
        }
        centers_idx.push_back(pick);
    }

    Eigen::MatrixXd centers(k, x.cols());
    for (std::size_t c = 0; c < k; ++c)
        centers.row(static_cast<Eigen::Index>(c)) =
            x.row(static_cast<Eigen::Index>(centers_idx[c]));

    KMeansResult result;
    result.labels.assign(n, 0);
    for (int iter = 0; iter < 100; ++iter) {
        bool moved = false;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::int32_t best_c = 0;
            for (std::size_t c = 0; c < k; ++c) {
                const double d = (x.row(static_cast<Eigen::Index>(i)) -
                                  centers.row(static_cast<Eigen::Index>(c)))
                                     .squaredNorm();
                if (d < best) {
                    best = d;
                    best_c = static_cast<std::int32_t>(c);
                }
            }
            if (result.labels[i] != best_c) {
                result.labels[i] = best_c;
                moved = true;
            }
        }
        // recompute centers; an emptied cluster grabs the point farthest
        // from its current center
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), x.cols());
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sums.row(result.labels[i]) += x.row(static_cast<Eigen::Index>(i));
            counts[static_cast<std::size_t>(result.labels[i])]++;
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                centers.row(static_cast<Eigen::Index>(c)) =
                    sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(counts[c]);
            } else {
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double d = (x.row(static_cast<Eigen::Index>(i)) -
                                      centers.row(result.labels[i]))
                                         .squaredNorm();
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                centers.row(static_cast<Eigen::Index>(c)) =
                    x.row(static_cast<Eigen::Index>(far));
                moved = true;
            }
        }
        if (!moved && iter > 0) break;
    }

    result.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        result.inertia += (x.row(static_cast<Eigen::Index>(i)) -
                           centers.row(result.labels[i]))
                              .squaredNorm();
    return result;
}

}  // namespace

std::vector<std::int32_t> spectral_cluster(const DiffusionOperator& p, std::size_t k,
                                           std::uint64_t seed) {
    const std::size_t n = p.size();
    if (k < 2 || k > n) throw UserError("spectral_cluster: k must be in 2..n");
    if (p.degrees.size() != n)
        throw UserError("spectral_cluster: diffusion operator lacks degree information");

    // S = D^{1/2} P D^{-1/2} is symmetric when P came from a symmetric kernel
    Eigen::MatrixXd s(n, n);
    std::vector<double> sqrt_deg(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(p.degrees[i] > 0.0)) throw UserError("spectral_cluster: zero degree row");
        sqrt_deg[i] = std::sqrt(p.degrees[i]);
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                sqrt_deg[i] * p(i, j) / sqrt_deg[j];
    // symmetrize away roundoff
    s = 0.5 * (s + s.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    if (es.info() != Eigen::Success) throw UserError("spectral_cluster: eigensolver failed");

    // top-k right eigenvectors of P (eigenvalues ascend in `es`)
    Eigen::MatrixXd v(n, k);
    for (std::size_t c = 0; c < k; ++c) {
        const auto col = static_cast<Eigen::Index>(n - 1 - c);
        for (std::size_t i = 0; i < n; ++i)
            v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                es.eigenvectors()(static_cast<Eigen::Index>(i), col) / sqrt_deg[i];
    }

    // project out the constant eigenvector and keep an orthonormal basis of
    // what is left (k-1 informative directions)
    Eigen::VectorXd ones = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n),
                                                     1.0 / std::sqrt(static_cast<double>(n)));
    v -= ones * (ones.transpose() * v);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(v);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(
                                                static_cast<Eigen::Index>(n),
                                                static_cast<Eigen::Index>(k - 1));

    Rng rng(seed, 0x6b6d6561);  // "kmea" stream
    KMeansResult best;
    for (int restart = 0; restart < 10; ++restart) {
        auto attempt = lloyd_once(q, k, rng);
        if (attempt.inertia < best.inertia) best = std::move(attempt);
    }
    return best.labels;
}

}  // namespace mural
