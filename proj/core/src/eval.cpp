#include "mural/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include "mural/rng.hpp"
#include "mural/stats.hpp"

namespace mural {

SwissRollSample gen_swiss_roll_5d(std::size_t n, double noise, std::uint64_t seed) {
    if (n < 10) throw UserError("gen_swiss_roll_5d: n must be >= 10");
    constexpr double pi = 3.14159265358979323846;
    Rng rng(seed, 0x73776973);  // "swis" stream

    std::vector<ColumnSpec> cols;
    for (int i = 1; i <= 5; ++i)
        cols.push_back({"x" + std::to_string(i), ColumnKind::continuous(),
                        MissingnessHint::Auto, "NA"});
    SwissRollSample s{std::vector<double>(n), std::vector<double>(n),
                      Dataset(Schema(std::move(cols)), n)};

    for (std::size_t i = 0; i < n; ++i) {
        const double t = rng.uniform(1.5 * pi, 4.5 * pi);
        const double h = rng.uniform(0.0, 20.0);
        s.t[i] = t;
        s.h[i] = h;
        // dims 1-3 satisfy the roll equations exactly when noise = 0; the
        // linear dims 4-5 keep every coordinate tied to the manifold
        double x[5] = {t * std::cos(t), h, t * std::sin(t),
                       0.5 * t + noise * rng.normal(), 0.5 * h + noise * rng.normal()};
        if (noise > 0.0)
            for (std::size_t c = 0; c < 3; ++c) x[c] += noise * rng.normal();
        for (std::size_t c = 0; c < 5; ++c) s.ambient.set_real(c, static_cast<RowIndex>(i), x[c]);
    }
    return s;
}

namespace {

// indices of the k nearest neighbours of row i, self excluded, ties by index
std::vector<std::int32_t> knn_of_row(const DistanceMatrix& d, std::size_t i, std::size_t k) {
    const std::size_t n = d.size();
    std::vector<std::int32_t> idx;
    idx.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j)
        if (j != i) idx.push_back(static_cast<std::int32_t>(j));
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::int32_t a, std::int32_t b) {
                          const double da = d(i, static_cast<std::size_t>(a));
                          const double db = d(i, static_cast<std::size_t>(b));
                          if (da != db) return da < db;
                          return a < b;
                      });
    idx.resize(k);
    return idx;
}

}  // namespace

double precision_at_k(const DistanceMatrix& est, const DistanceMatrix& truth, std::size_t k) {
    const std::size_t n = est.size();
    if (truth.size() != n) throw UserError("precision_at_k: matrix sizes differ");
    if (k == 0 || k >= n) throw UserError("precision_at_k: k must be in 1..n-1");

    double total = 0.0;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : total)
#endif
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        const auto a = knn_of_row(est, static_cast<std::size_t>(i), k);
        const auto b = knn_of_row(truth, static_cast<std::size_t>(i), k);
        std::vector<bool> in_b(n, false);
        for (auto j : b) in_b[static_cast<std::size_t>(j)] = true;
        std::size_t hits = 0;
        for (auto j : a) hits += in_b[static_cast<std::size_t>(j)];
        total += static_cast<double>(hits) / static_cast<double>(k);
    }
    return total / static_cast<double>(n);
}

double distortion(const DistanceMatrix& est, const DistanceMatrix& truth,
                  std::size_t sample_pairs, std::uint64_t seed) {
    const std::size_t n = est.size();
    if (truth.size() != n) throw UserError("distortion: matrix sizes differ");
    if (n < 2) throw UserError("distortion: need at least 2 rows");

    Rng rng(seed, 0x64697374);  // "dist" stream
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    pairs.reserve(sample_pairs);
    const std::size_t all_pairs = n * (n - 1) / 2;
    if (all_pairs <= sample_pairs) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    } else {
        for (std::size_t s = 0; s < sample_pairs; ++s) {
            const auto i = static_cast<std::size_t>(rng.uniform_index(n));
            auto j = static_cast<std::size_t>(rng.uniform_index(n - 1));
            if (j >= i) ++j;
            pairs.emplace_back(i, j);
        }
    }

    double se = 0.0, ee = 0.0;
    for (const auto& [i, j] : pairs) {
        if (truth(i, j) <= 0.0) continue;
        se += est(i, j) * truth(i, j);
        ee += est(i, j) * est(i, j);
    }
    const double c = ee > 0.0 ? se / ee : 0.0;

    double sum = 0.0;
    std::size_t used = 0;
    for (const auto& [i, j] : pairs) {
        const double dt = truth(i, j);
        if (dt <= 0.0) continue;
        const double r = (c * est(i, j) - dt) / dt;
        sum += r * r;
        ++used;
    }
    if (used == 0) throw UserError("distortion: no pairs with positive true distance");
    return sum / static_cast<double>(used);
}

SquareMatrix knn_geodesic_matrix(const Dataset& complete_standardized, std::size_t k_graph) {
    const auto euclid = euclidean_distance_matrix(complete_standardized);
    const std::size_t n = euclid.size();
    if (k_graph >= n) throw UserError("knn_geodesic_matrix: k_graph must be < n");

    // symmetric kNN graph (union of directed kNN edges)
    std::vector<std::vector<std::pair<std::int32_t, double>>> adj(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto nbrs = knn_of_row(euclid, i, k_graph);
        for (auto j : nbrs) {
            adj[i].push_back({j, euclid(i, static_cast<std::size_t>(j))});
            adj[static_cast<std::size_t>(j)].push_back(
                {static_cast<std::int32_t>(i), euclid(i, static_cast<std::size_t>(j))});
        }
    }

    SquareMatrix geo(n, std::numeric_limits<double>::infinity());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (std::int64_t src = 0; src < static_cast<std::int64_t>(n); ++src) {
        std::vector<double> dist(n, std::numeric_limits<double>::infinity());
        dist[static_cast<std::size_t>(src)] = 0.0;
        using Item = std::pair<double, std::int32_t>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
        heap.push({0.0, static_cast<std::int32_t>(src)});
        while (!heap.empty()) {
            const auto [du, u] = heap.top();
            heap.pop();
            if (du > dist[static_cast<std::size_t>(u)]) continue;
            for (const auto& [v, w] : adj[static_cast<std::size_t>(u)]) {
                if (du + w < dist[static_cast<std::size_t>(v)]) {
                    dist[static_cast<std::size_t>(v)] = du + w;
                    heap.push({du + w, v});
                }
            }
        }
        for (std::size_t j = 0; j < n; ++j) geo.at(static_cast<std::size_t>(src), j) = dist[j];
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (!std::isfinite(geo.at(i, j)))
                throw UserError("knn graph is disconnected at k=" + std::to_string(k_graph));
    return geo;
}

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty())
        throw std::invalid_argument("spearman: size mismatch or empty");
    const auto ra = stats::midranks(a);
    const auto rb = stats::midranks(b);
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va <= 0.0 || vb <= 0.0) return 0.0;
    return cov / std::sqrt(va * vb);
}

double geodesic_correlation(const DistanceMatrix& est, const SwissRollSample& truth,
                            std::size_t k_graph) {
    const auto [standardized, params] = standardize(truth.ambient);
    SquareMatrix geo;
    try {
        geo = knn_geodesic_matrix(standardized, k_graph);
    } catch (const UserError&) {
        geo = knn_geodesic_matrix(standardized, 2 * k_graph);
    }
    return geodesic_correlation_from(est, geo);
}

double geodesic_correlation_from(const DistanceMatrix& est, const SquareMatrix& geo) {
    const std::size_t n = geo.size();
    if (est.size() != n) throw UserError("geodesic_correlation: matrix sizes differ");

    constexpr std::size_t kMaxPairs = 100000;
    std::vector<double> a, b;
    const std::size_t all_pairs = n * (n - 1) / 2;
    if (all_pairs <= kMaxPairs) {
        a.reserve(all_pairs);
        b.reserve(all_pairs);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                a.push_back(est(i, j));
                b.push_back(geo.at(i, j));
            }
    } else {
        Rng rng(0x67656f64, 0);  // fixed sampling stream
        a.reserve(kMaxPairs);
        b.reserve(kMaxPairs);
        for (std::size_t s = 0; s < kMaxPairs; ++s) {
            const auto i = static_cast<std::size_t>(rng.uniform_index(n));
            auto j = static_cast<std::size_t>(rng.uniform_index(n - 1));
            if (j >= i) ++j;
            a.push_back(est(i, j));
            b.push_back(geo.at(i, j));
        }
    }
    return spearman(a, b);
}

double silhouette(const DistanceMatrix& dm, std::span<const std::int32_t> labels) {
    const std::size_t n = dm.size();
    if (labels.size() != n) throw UserError("silhouette: label count mismatch");
    std::int32_t k = 0;
    for (auto l : labels) {
        if (l < 0) throw UserError("silhouette: negative label");
        k = std::max(k, l + 1);
    }
    std::vector<std::size_t> cluster_size(k, 0);
    for (auto l : labels) cluster_size[static_cast<std::size_t>(l)]++;
    std::size_t live = 0;
    for (auto s : cluster_size) live += s > 0;
    if (live < 2) throw UserError("silhouette: needs at least 2 clusters");

    double total = 0.0;
    std::vector<double> sums(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto own = static_cast<std::size_t>(labels[i]);
        if (cluster_size[own] == 1) continue;  // singleton scores 0
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j)
            sums[static_cast<std::size_t>(labels[j])] += dm(i, j);
        const double a = sums[own] / static_cast<double>(cluster_size[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
            if (c == own || cluster_size[c] == 0) continue;
            b = std::min(b, sums[c] / static_cast<double>(cluster_size[c]));
        }
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

double adjusted_rand_index(std::span<const std::int32_t> a, std::span<const std::int32_t> b) {
    if (a.size() != b.size() || a.empty())
        throw std::invalid_argument("adjusted_rand_index: size mismatch or empty");
    const auto max_label = [](std::span<const std::int32_t> v) {
        std::int32_t m = 0;
        for (auto x : v) m = std::max(m, x + 1);
        return static_cast<std::size_t>(m);
    };
    const std::size_t ka = max_label(a), kb = max_label(b);
    std::vector<std::vector<std::int64_t>> table(ka, std::vector<std::int64_t>(kb, 0));
    for (std::size_t i = 0; i < a.size(); ++i) table[a[i]][b[i]]++;

    auto choose2 = [](std::int64_t x) { return static_cast<double>(x) * (x - 1) / 2.0; };
    double sum_cells = 0.0, sum_rows = 0.0, sum_cols = 0.0;
    std::vector<std::int64_t> row(ka, 0), col(kb, 0);
    for (std::size_t i = 0; i < ka; ++i)
        for (std::size_t j = 0; j < kb; ++j) {
            sum_cells += choose2(table[i][j]);
            row[i] += table[i][j];
            col[j] += table[i][j];
        }
    for (auto r : row) sum_rows += choose2(r);
    for (auto c : col) sum_cols += choose2(c);
    const double all = choose2(static_cast<std::int64_t>(a.size()));
    const double expected = sum_rows * sum_cols / all;
    const double max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index == expected) return 1.0;
    return (sum_cells - expected) / (max_index - expected);
}

void MixedClinicalSpec::validate() const {
    if (n_groups < 1) throw UserError("mixed spec: n_groups must be >= 1");
    if (columns.empty()) throw UserError("mixed spec: no columns");
    if (!group_weights.empty() && group_weights.size() != n_groups)
        throw UserError("mixed spec: group_weights size mismatch");
    for (std::size_t c = 0; c < columns.size(); ++c) {
        const auto& col = columns[c];
        if (col.kind.is_discrete()) {
            if (col.group_probs.size() != n_groups)
                throw UserError("mixed spec: column " + std::to_string(c) +
                                " needs one probability vector per group");
            for (const auto& probs : col.group_probs)
                if (probs.size() != static_cast<std::size_t>(col.kind.code_count()))
                    throw UserError("mixed spec: column " + std::to_string(c) +
                                    " probability vector has wrong length");
        } else if (col.group_means.size() != n_groups) {
            throw UserError("mixed spec: column " + std::to_string(c) +
                            " needs one mean per group");
        }
    }
    for (const auto& rule : mnar_rules) {
        if (rule.column >= columns.size())
            throw UserError("mixed spec: MNAR rule references a missing column");
        if (columns[rule.column].kind.is_discrete())
            throw UserError("mixed spec: MNAR rules apply to continuous columns");
        if (!(rule.quantile > 0.0 && rule.quantile < 1.0))
            throw UserError("mixed spec: MNAR rule quantile must be in (0,1)");
    }
}

MixedClinicalSpec MixedClinicalSpec::two_group_default() {
    MixedClinicalSpec spec;
    spec.n_groups = 2;
    for (int c = 0; c < 4; ++c) {
        MixedColumnSpec col;
        col.kind = ColumnKind::continuous();
        col.sigma = 1.0;
        col.group_means = {0.0, c % 2 == 0 ? 3.0 : -3.0};
        spec.columns.push_back(col);
    }
    {
        MixedColumnSpec col;
        col.kind = ColumnKind::binary();
        col.group_probs = {{0.8, 0.2}, {0.2, 0.8}};
        spec.columns.push_back(col);
    }
    {
        MixedColumnSpec col;
        col.kind = ColumnKind::ordinal(5);
        col.group_probs = {{0.4, 0.3, 0.2, 0.07, 0.03}, {0.03, 0.07, 0.2, 0.3, 0.4}};
        spec.columns.push_back(col);
    }
    // the elevated lab is not recorded when clearly abnormal
    spec.mnar_rules.push_back({0, 0.8, true});
    return spec;
}

DistanceMatrix diffusion_distances(const DiffusionOperator& p) {
    const std::size_t n = p.size();
    DistanceMatrix out{SquareMatrix(n, 0.0)};
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        for (std::size_t j = static_cast<std::size_t>(i) + 1; j < n; ++j) {
            double ss = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
                const double diff = p(static_cast<std::size_t>(i), c) - p(j, c);
                ss += diff * diff;
            }
            const double d = std::sqrt(ss);
            out.m.at(static_cast<std::size_t>(i), j) = d;
            out.m.at(j, static_cast<std::size_t>(i)) = d;
        }
    }
    return out;
}

MixedClinicalSample gen_mixed_clinical(std::size_t n, const MixedClinicalSpec& spec,
                                       std::uint64_t seed) {
    spec.validate();
    if (n < 10) throw UserError("gen_mixed_clinical: n must be >= 10");
    Rng rng(seed, 0x636c696e);  // "clin" stream

    std::vector<ColumnSpec> cols;
    for (std::size_t c = 0; c < spec.columns.size(); ++c)
        cols.push_back({"v" + std::to_string(c + 1), spec.columns[c].kind,
                        MissingnessHint::Auto, "NA"});
    MixedClinicalSample out{Dataset(Schema(std::move(cols)), n),
                            std::vector<std::int32_t>(n)};

    std::vector<double> cum;
    if (!spec.group_weights.empty()) {
        double total = 0.0;
        for (double w : spec.group_weights) total += w;
        double acc = 0.0;
        for (double w : spec.group_weights) {
            acc += w / total;
            cum.push_back(acc);
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        std::size_t g;
        if (cum.empty()) {
            g = static_cast<std::size_t>(rng.uniform_index(spec.n_groups));
        } else {
            const double u = rng.uniform();
            g = 0;
            while (g + 1 < cum.size() && u > cum[g]) ++g;
        }
        out.group[i] = static_cast<std::int32_t>(g);
        for (std::size_t c = 0; c < spec.columns.size(); ++c) {
            const auto& col = spec.columns[c];
            if (col.kind.is_discrete()) {
                const double u = rng.uniform();
                double acc = 0.0;
                std::int32_t code = 0;
                for (std::size_t lvl = 0; lvl < col.group_probs[g].size(); ++lvl) {
                    acc += col.group_probs[g][lvl];
                    if (u <= acc) {
                        code = static_cast<std::int32_t>(lvl);
                        break;
                    }
                    code = static_cast<std::int32_t>(lvl);
                }
                out.data.set_code(c, static_cast<RowIndex>(i), code);
            } else {
                out.data.set_real(c, static_cast<RowIndex>(i),
                                  col.group_means[g] + col.sigma * rng.normal());
            }
        }
    }

    // threshold-style MNAR masking on generated values
    for (const auto& rule : spec.mnar_rules) {
        std::vector<double> values;
        values.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            values.push_back(out.data.real(rule.column, static_cast<RowIndex>(i)));
        std::vector<double> sorted(values);
        std::sort(sorted.begin(), sorted.end());
        const auto pos = static_cast<std::size_t>(rule.quantile * static_cast<double>(n - 1));
        const double threshold = sorted[pos];
        for (std::size_t i = 0; i < n; ++i) {
            const bool beyond = rule.above ? values[i] > threshold : values[i] < threshold;
            if (beyond) out.data.set_missing(rule.column, static_cast<RowIndex>(i));
        }
    }
    return out;
}

}  // namespace mural
