#include "mural/forest.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mural {

std::int32_t split_var(const SplitSpec& s) {
    return std::visit([](const auto& v) { return v.var; }, s);
}

std::int32_t split_aux_var(const SplitSpec& s) {
    if (const auto* m = std::get_if<MnarFourWay>(&s)) return m->aux_var;
    if (const auto* b = std::get_if<BinaryFourWay>(&s)) return b->aux_var;
    return -1;
}

void ForestConfig::validate() const {
    if (n_trees < 1) throw UserError("config: n_trees must be >= 1");
    if (max_depth < 0) throw UserError("config: max_depth must be >= 0");
    if (n_candidate_vars < 1) throw UserError("config: n_candidate_vars must be >= 1");
    if (entropy_dims < 1) throw UserError("config: entropy_dims must be >= 1");
    if (n_residual_vars < 0) throw UserError("config: n_residual_vars must be >= 0");
    if (mnar_restrict_levels < 0) throw UserError("config: mnar_restrict_levels must be >= 0");
    if (min_leaf < 1) throw UserError("config: min_leaf must be >= 1");
    if (max_threshold_candidates < 1)
        throw UserError("config: max_threshold_candidates must be >= 1");
    if (!(four_way_edge_weight > 0.0))
        throw UserError("config: four_way_edge_weight must be > 0");
}

namespace {

// Per-node class codes for one variable: discrete columns keep their codes,
// continuous ones are equal-width binned over this node's observed range.
// The last class is reserved for masked cells.
struct Coding {
    std::vector<std::int32_t> codes;  // aligned with the node's row list
    std::int32_t n_classes = 0;
};

Coding make_coding(const Dataset& d, std::span<const RowIndex> rows, std::size_t var,
                   std::int32_t n_bins_override) {
    Coding c;
    const auto& kind = d.schema().column(var).kind;
    c.codes.resize(rows.size());
    if (kind.is_discrete()) {
        const std::int32_t miss = kind.code_count();
        c.n_classes = miss + 1;
        for (std::size_t i = 0; i < rows.size(); ++i)
            c.codes[i] = d.is_missing(var, rows[i]) ? miss : d.code(var, rows[i]);
        return c;
    }
    const std::int32_t n_bins =
        n_bins_override > 0
            ? n_bins_override
            : static_cast<std::int32_t>(sturges_bin_count(static_cast<std::int64_t>(rows.size())));
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (auto r : rows) {
        if (d.is_missing(var, r)) continue;
        const double v = d.real(var, r);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    c.n_classes = n_bins + 1;
    const double width = (hi - lo) / static_cast<double>(n_bins);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (d.is_missing(var, rows[i])) {
            c.codes[i] = n_bins;
            continue;
        }
        std::int32_t b = 0;
        if (width > 0.0) {
            b = static_cast<std::int32_t>((d.real(var, rows[i]) - lo) / width);
            b = std::clamp(b, 0, n_bins - 1);
        }
        c.codes[i] = b;
    }
    return c;
}

double entropy_bits(std::span<const std::int64_t> counts, std::int64_t total) {
    if (total <= 0) return 0.0;
    double s = 0.0;
    for (auto n : counts)
        if (n > 0) s += static_cast<double>(n) * std::log2(static_cast<double>(n));
    return std::log2(static_cast<double>(total)) - s / static_cast<double>(total);
}

// Gain of a labelled partition for one coding.
double coding_gain(const Coding& coding, std::span<const std::int32_t> part_of,
                   std::int32_t n_parts) {
    const auto n = static_cast<std::int64_t>(coding.codes.size());
    std::vector<std::int64_t> parent(coding.n_classes, 0);
    std::vector<std::vector<std::int64_t>> child(
        n_parts, std::vector<std::int64_t>(coding.n_classes, 0));
    std::vector<std::int64_t> child_n(n_parts, 0);
    for (std::size_t i = 0; i < coding.codes.size(); ++i) {
        parent[coding.codes[i]]++;
        child[part_of[i]][coding.codes[i]]++;
        child_n[part_of[i]]++;
    }
    double g = entropy_bits(parent, n);
    for (std::int32_t a = 0; a < n_parts; ++a)
        g -= static_cast<double>(child_n[a]) / static_cast<double>(n) *
             entropy_bits(child[a], child_n[a]);
    return g;
}

// Joint coding over several variables; class counts multiply, so large
// products fall back to hashing.
Coding make_joint_coding(const Dataset& d, std::span<const RowIndex> rows,
                         std::span<const std::size_t> vars, std::int32_t n_bins_override) {
    std::vector<Coding> parts;
    parts.reserve(vars.size());
    std::uint64_t product = 1;
    for (auto v : vars) {
        parts.push_back(make_coding(d, rows, v, n_bins_override));
        product *= static_cast<std::uint64_t>(parts.back().n_classes);
    }
    Coding joint;
    joint.codes.resize(rows.size());
    if (product <= (1u << 20)) {
        joint.n_classes = static_cast<std::int32_t>(product);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            std::int64_t key = 0;
            for (const auto& p : parts) key = key * p.n_classes + p.codes[i];
            joint.codes[i] = static_cast<std::int32_t>(key);
        }
        return joint;
    }
    std::unordered_map<std::uint64_t, std::int32_t> remap;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::uint64_t key = 0;
        for (const auto& p : parts) key = key * p.n_classes + p.codes[i];
        const auto [it, inserted] =
            remap.emplace(key, static_cast<std::int32_t>(remap.size()));
        joint.codes[i] = it->second;
    }
    joint.n_classes = static_cast<std::int32_t>(remap.size());
    return joint;
}

std::vector<Coding> make_codings(const Dataset& d, std::span<const RowIndex> rows,
                                 std::span<const std::size_t> residual_vars, EntropyMode mode,
                                 std::int32_t n_bins_override) {
    std::vector<Coding> codings;
    if (mode == EntropyMode::JointSubset) {
        codings.push_back(make_joint_coding(d, rows, residual_vars, n_bins_override));
    } else {
        codings.reserve(residual_vars.size());
        for (auto v : residual_vars) codings.push_back(make_coding(d, rows, v, n_bins_override));
    }
    return codings;
}

}  // namespace

double residual_info_gain(const Dataset& d, std::span<const RowIndex> rows,
                          const std::vector<std::vector<RowIndex>>& partition,
                          std::span<const std::size_t> residual_vars, EntropyMode mode,
                          std::int32_t n_bins_override) {
    if (rows.empty()) throw UserError("residual_info_gain: empty row set");
    if (residual_vars.empty()) throw UserError("residual_info_gain: empty residual set");

    std::unordered_map<RowIndex, std::size_t> pos;
    pos.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) pos.emplace(rows[i], i);

    std::vector<std::int32_t> part_of(rows.size(), -1);
    for (std::size_t a = 0; a < partition.size(); ++a) {
        for (auto r : partition[a]) {
            const auto it = pos.find(r);
            if (it == pos.end() || part_of[it->second] != -1)
                throw std::invalid_argument("residual_info_gain: partition is not a partition of rows");
            part_of[it->second] = static_cast<std::int32_t>(a);
        }
    }
    for (auto p : part_of)
        if (p == -1)
            throw std::invalid_argument("residual_info_gain: partition does not cover rows");

    const auto codings = make_codings(d, rows, residual_vars, mode, n_bins_override);
    double gain = 0.0;
    for (const auto& c : codings)
        gain += coding_gain(c, part_of, static_cast<std::int32_t>(partition.size()));
    return gain;
}

namespace {

// Incremental two-way sweep: positions move right-to-left in sorted order
// and per-coding entropies update in O(1) per move via sum(n*log2(n)) terms.
struct TwoWaySweep {
    struct PerCoding {
        std::vector<std::int64_t> left, right;
        double left_s = 0.0, right_s = 0.0;
        double parent_entropy = 0.0;
    };
    std::vector<PerCoding> per;
    const std::vector<Coding>* codings = nullptr;
    std::int64_t left_n = 0, right_n = 0;

    static double nlog2n(std::int64_t n) {
        return n > 0 ? static_cast<double>(n) * std::log2(static_cast<double>(n)) : 0.0;
    }

    void init(const std::vector<Coding>& cs, std::span<const std::size_t> positions) {
        codings = &cs;
        per.assign(cs.size(), {});
        left_n = 0;
        right_n = static_cast<std::int64_t>(positions.size());
        for (std::size_t k = 0; k < cs.size(); ++k) {
            auto& pc = per[k];
            pc.left.assign(cs[k].n_classes, 0);
            pc.right.assign(cs[k].n_classes, 0);
            for (auto i : positions) pc.right[cs[k].codes[i]]++;
            pc.right_s = 0.0;
            for (auto n : pc.right) pc.right_s += nlog2n(n);
            pc.parent_entropy = entropy_bits(pc.right, right_n);
        }
    }

    void move_left(std::size_t position) {
        for (std::size_t k = 0; k < per.size(); ++k) {
            auto& pc = per[k];
            const auto cls = (*codings)[k].codes[position];
            pc.right_s += nlog2n(pc.right[cls] - 1) - nlog2n(pc.right[cls]);
            pc.right[cls]--;
            pc.left_s += nlog2n(pc.left[cls] + 1) - nlog2n(pc.left[cls]);
            pc.left[cls]++;
        }
        ++left_n;
        --right_n;
    }

    double gain() const {
        const double n = static_cast<double>(left_n + right_n);
        double g = 0.0;
        for (const auto& pc : per) {
            const double hl =
                left_n > 0 ? std::log2(static_cast<double>(left_n)) -
                                 pc.left_s / static_cast<double>(left_n)
                           : 0.0;
            const double hr =
                right_n > 0 ? std::log2(static_cast<double>(right_n)) -
                                  pc.right_s / static_cast<double>(right_n)
                            : 0.0;
            g += pc.parent_entropy - (static_cast<double>(left_n) / n) * hl -
                 (static_cast<double>(right_n) / n) * hr;
        }
        return g;
    }
};

}  // namespace

ThresholdResult best_threshold(const Dataset& d, std::span<const RowIndex> rows, std::size_t var,
                               std::span<const std::size_t> residual_vars,
                               const ForestConfig& config, Rng* rng) {
    if (residual_vars.empty()) return {};

    // observed positions sorted by (value, row id)
    std::vector<std::size_t> order;
    order.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (!d.is_missing(var, rows[i])) order.push_back(i);
    if (order.size() < 2 * static_cast<std::size_t>(config.min_leaf)) return {};
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double va = d.numeric(var, rows[a]), vb = d.numeric(var, rows[b]);
        if (va != vb) return va < vb;
        return rows[a] < rows[b];
    });

    // candidate thresholds: midpoints of consecutive distinct values, each
    // paired with the count of positions on its left side
    struct Candidate {
        double threshold;
        std::size_t left_count;
    };
    std::vector<Candidate> cands;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        const double a = d.numeric(var, rows[order[i]]);
        const double b = d.numeric(var, rows[order[i + 1]]);
        if (a < b) cands.push_back({a + 0.5 * (b - a), i + 1});
    }
    if (cands.empty()) return {};
    const auto max_c = static_cast<std::size_t>(config.max_threshold_candidates);
    if (cands.size() > max_c) {
        std::vector<Candidate> thinned;
        thinned.reserve(max_c);
        if (rng != nullptr) {
            // random subsample; threshold diversity across trees is what the
            // forest averages over
            auto picks = rng->sample_without_replacement(cands.size(), max_c);
            std::sort(picks.begin(), picks.end());
            for (auto p : picks) thinned.push_back(cands[p]);
        } else {
            for (std::size_t j = 0; j < max_c; ++j)
                thinned.push_back(cands[cands.size() * (2 * j + 1) / (2 * max_c)]);
        }
        cands = std::move(thinned);
    }

    const auto codings = make_codings(d, rows, residual_vars, config.entropy_mode,
                                      config.n_bins_override);
    TwoWaySweep sweep;
    sweep.init(codings, order);

    ThresholdResult best;
    std::size_t moved = 0;
    for (const auto& cand : cands) {
        while (moved < cand.left_count) sweep.move_left(order[moved++]);
        if (sweep.left_n < config.min_leaf || sweep.right_n < config.min_leaf) continue;
        const double g = sweep.gain();
        if (!best.ok || g > best.gain) {
            best.ok = true;
            best.gain = g;
            best.threshold = cand.threshold;
        }
    }
    return best;
}

namespace {

struct CandidateSplit {
    SplitSpec split;
    std::vector<std::vector<RowIndex>> child_rows;
    double gain = 0.0;
    bool ok = false;
};

std::vector<std::size_t> residual_base(const Dataset& d, std::size_t var,
                                       const ForestConfig& config,
                                       std::span<const std::uint8_t> path_vars) {
    std::vector<std::size_t> base;
    for (std::size_t u = 0; u < d.n_cols(); ++u) {
        if (u == var) continue;
        if (config.exclude_path_vars && u < path_vars.size() && path_vars[u]) continue;
        base.push_back(u);
    }
    return base;
}

std::vector<std::size_t> select_residual(const std::vector<std::size_t>& base,
                                         const ForestConfig& config, Rng& rng) {
    std::size_t want = base.size();
    if (config.entropy_mode == EntropyMode::JointSubset)
        want = std::min<std::size_t>(base.size(), static_cast<std::size_t>(config.entropy_dims));
    else if (config.n_residual_vars > 0)
        want = std::min<std::size_t>(base.size(), static_cast<std::size_t>(config.n_residual_vars));
    if (want == base.size()) return base;
    std::vector<std::size_t> out;
    out.reserve(want);
    for (auto i : rng.sample_without_replacement(base.size(), want)) out.push_back(base[i]);
    return out;
}

std::vector<std::size_t> without(std::vector<std::size_t> vars, std::size_t drop) {
    vars.erase(std::remove(vars.begin(), vars.end(), drop), vars.end());
    return vars;
}

// aux candidates: continuous/ordinal variables fully observed on `branch`
std::vector<std::size_t> aux_candidates(const Dataset& d, std::size_t var,
                                        std::span<const RowIndex> branch) {
    std::vector<std::size_t> out;
    for (std::size_t u = 0; u < d.n_cols(); ++u) {
        if (u == var) continue;
        const auto type = d.schema().column(u).kind.type;
        if (type != ColumnType::Continuous && type != ColumnType::Ordinal) continue;
        bool clean = true;
        for (auto r : branch)
            if (d.is_missing(u, r)) {
                clean = false;
                break;
            }
        if (clean) out.push_back(u);
    }
    return out;
}

std::vector<std::vector<RowIndex>> partition_by_threshold(const Dataset& d,
                                                          std::span<const RowIndex> rows,
                                                          std::size_t var, double thr) {
    std::vector<std::vector<RowIndex>> out(2);
    for (auto r : rows) (d.numeric(var, r) <= thr ? out[0] : out[1]).push_back(r);
    return out;
}

double partition_gain(const Dataset& d, std::span<const RowIndex> rows,
                      const std::vector<std::vector<RowIndex>>& partition,
                      std::span<const std::size_t> residual_vars, const ForestConfig& config) {
    if (residual_vars.empty()) return 0.0;
    return residual_info_gain(d, rows, partition, residual_vars, config.entropy_mode,
                              config.n_bins_override);
}

// Split of a fully observed continuous/ordinal variable.
CandidateSplit eval_continuous(const Dataset& d, std::span<const RowIndex> rows, std::size_t var,
                               const std::vector<std::size_t>& residual,
                               const ForestConfig& config, Rng& rng) {
    CandidateSplit out;
    const auto res = best_threshold(d, rows, var, residual, config, &rng);
    if (!res.ok) return out;
    out.ok = true;
    out.gain = res.gain;
    out.split = ContinuousSplit{static_cast<std::int32_t>(var), res.threshold};
    out.child_rows = partition_by_threshold(d, rows, var, res.threshold);
    return out;
}

// Variable with masked cells in this node: preliminary measured/missing
// split, threshold on the measured branch, aux threshold on the missing
// branch, flattened to four children. Falls back to a plain threshold split
// of the measured rows (masked rows joining the larger child) when the
// missing branch is too small to stand on its own.
CandidateSplit eval_mnar(const Dataset& d, std::span<const RowIndex> rows, std::size_t var,
                         const std::vector<std::size_t>& residual, const ForestConfig& config,
                         Rng& rng) {
    CandidateSplit out;
    const auto type = d.schema().column(var).kind.type;
    if (type == ColumnType::Categorical) return out;  // unsupported as MNAR primary

    std::vector<RowIndex> measured, missing;
    for (auto r : rows) (d.is_missing(var, r) ? missing : measured).push_back(r);

    const auto min2 = static_cast<std::size_t>(2 * config.min_leaf);
    if (measured.size() >= min2 && missing.size() >= min2) {
        const auto meas = best_threshold(d, measured, var, residual, config, &rng);
        if (meas.ok) {
            auto aux_pool = aux_candidates(d, var, missing);
            rng.shuffle(aux_pool);
            for (auto aux : aux_pool) {
                const auto res_aux = without(residual, aux);
                if (res_aux.empty()) continue;
                const auto miss_thr = best_threshold(d, missing, aux, res_aux, config, &rng);
                if (!miss_thr.ok) continue;
                out.ok = true;
                out.split = MnarFourWay{static_cast<std::int32_t>(var), meas.threshold,
                                        static_cast<std::int32_t>(aux), miss_thr.threshold};
                auto meas_part = partition_by_threshold(d, measured, var, meas.threshold);
                auto miss_part = partition_by_threshold(d, missing, aux, miss_thr.threshold);
                out.child_rows = {std::move(meas_part[0]), std::move(meas_part[1]),
                                  std::move(miss_part[0]), std::move(miss_part[1])};
                out.gain = partition_gain(d, rows, out.child_rows, res_aux, config);
                return out;
            }
        }
    }

    // fallback: two-way threshold on the measured values
    if ((type == ColumnType::Continuous || type == ColumnType::Ordinal) &&
        measured.size() >= min2) {
        const auto res = best_threshold(d, rows, var, residual, config, &rng);
        if (!res.ok) return out;
        out.ok = true;
        out.gain = res.gain;
        out.split = ContinuousSplit{static_cast<std::int32_t>(var), res.threshold};
        out.child_rows = partition_by_threshold(d, measured, var, res.threshold);
        const bool left_major = out.child_rows[0].size() >= out.child_rows[1].size();
        auto& major = left_major ? out.child_rows[0] : out.child_rows[1];
        major.insert(major.end(), missing.begin(), missing.end());
    }
    return out;
}

// Binary (or one-vs-rest categorical) variable: two hidden value nodes, each
// thresholded on one aux variable, flattened to four children.
CandidateSplit eval_binary(const Dataset& d, std::span<const RowIndex> rows, std::size_t var,
                           const std::vector<std::size_t>& residual, const ForestConfig& config,
                           Rng& rng) {
    CandidateSplit out;
    const auto& kind = d.schema().column(var).kind;

    // pick the category: fixed 0 for binary, best one-vs-rest gain otherwise
    std::int32_t category = 0;
    std::vector<RowIndex> eq, neq;
    if (kind.type == ColumnType::Binary) {
        for (auto r : rows) (d.code(var, r) == 0 ? eq : neq).push_back(r);
        if (eq.size() < static_cast<std::size_t>(config.min_leaf) ||
            neq.size() < static_cast<std::size_t>(config.min_leaf))
            return out;
    } else {
        double best_gain = -1.0;
        for (std::int32_t c = 0; c < kind.code_count(); ++c) {
            std::vector<std::vector<RowIndex>> part(2);
            for (auto r : rows) (d.code(var, r) == c ? part[0] : part[1]).push_back(r);
            if (part[0].size() < static_cast<std::size_t>(config.min_leaf) ||
                part[1].size() < static_cast<std::size_t>(config.min_leaf))
                continue;
            const double g = partition_gain(d, rows, part, residual, config);
            if (g > best_gain) {
                best_gain = g;
                category = c;
                eq = part[0];
                neq = part[1];
            }
        }
        if (best_gain < 0.0) return out;
    }

    const auto min2 = static_cast<std::size_t>(2 * config.min_leaf);
    if (eq.size() >= min2 && neq.size() >= min2) {
        auto aux_pool = aux_candidates(d, var, rows);
        rng.shuffle(aux_pool);
        for (auto aux : aux_pool) {
            const auto res_aux = without(residual, aux);
            if (res_aux.empty()) continue;
            const auto thr_eq = best_threshold(d, eq, aux, res_aux, config, &rng);
            if (!thr_eq.ok) continue;
            const auto thr_neq = best_threshold(d, neq, aux, res_aux, config, &rng);
            if (!thr_neq.ok) continue;
            out.ok = true;
            out.split = BinaryFourWay{static_cast<std::int32_t>(var), category,
                                      static_cast<std::int32_t>(aux), thr_eq.threshold,
                                      thr_neq.threshold};
            auto eq_part = partition_by_threshold(d, eq, aux, thr_eq.threshold);
            auto neq_part = partition_by_threshold(d, neq, aux, thr_neq.threshold);
            out.child_rows = {std::move(eq_part[0]), std::move(eq_part[1]),
                              std::move(neq_part[0]), std::move(neq_part[1])};
            out.gain = partition_gain(d, rows, out.child_rows, res_aux, config);
            return out;
        }
    }

    // fallback: plain one-vs-rest split
    out.ok = true;
    out.split = CategoricalSplit{static_cast<std::int32_t>(var), category};
    out.child_rows = {std::move(eq), std::move(neq)};
    out.gain = partition_gain(d, rows, out.child_rows, residual, config);
    return out;
}

CandidateSplit eval_candidate(const Dataset& d, std::span<const RowIndex> rows, std::size_t var,
                              const ForestConfig& config, Rng& rng,
                              std::span<const std::uint8_t> path_vars) {
    const auto base = residual_base(d, var, config, path_vars);
    if (base.empty()) return {};
    const auto residual = select_residual(base, config, rng);

    bool missing_here = false;
    for (auto r : rows)
        if (d.is_missing(var, r)) {
            missing_here = true;
            break;
        }
    if (missing_here) return eval_mnar(d, rows, var, residual, config, rng);

    const auto type = d.schema().column(var).kind.type;
    if (type == ColumnType::Binary || type == ColumnType::Categorical)
        return eval_binary(d, rows, var, residual, config, rng);
    return eval_continuous(d, rows, var, residual, config, rng);
}

}  // namespace

SplitOutcome split_node(const Dataset& d, std::span<const RowIndex> rows, std::int32_t depth,
                        const ForestConfig& config, Rng& rng,
                        std::span<const std::uint8_t> column_has_missing,
                        std::span<const std::uint8_t> path_vars) {
    if (rows.empty()) throw std::invalid_argument("split_node: empty row set");
    SplitOutcome out;
    if (depth >= config.max_depth ||
        rows.size() < static_cast<std::size_t>(2 * config.min_leaf))
        return out;

    std::vector<std::size_t> pool;
    for (std::size_t v = 0; v < d.n_cols(); ++v) {
        if (depth < config.mnar_restrict_levels && v < column_has_missing.size() &&
            column_has_missing[v])
            continue;
        pool.push_back(v);
    }
    if (pool.empty()) return out;

    // Draw the whole pool in random order: the first n_candidate_vars
    // splittable variables compete by gain; unsplittable draws pass to the
    // next variable instead of forcing a premature leaf.
    const auto picks = rng.sample_without_replacement(pool.size(), pool.size());

    CandidateSplit best;
    std::size_t evaluated = 0;
    for (auto p : picks) {
        auto cand = eval_candidate(d, rows, pool[p], config, rng, path_vars);
        if (!cand.ok) continue;
        if (!best.ok || cand.gain > best.gain) best = std::move(cand);
        if (++evaluated >= static_cast<std::size_t>(config.n_candidate_vars)) break;
    }
    if (!best.ok) return out;
    out.split = best.split;
    out.child_rows = std::move(best.child_rows);
    out.gain = best.gain;
    return out;
}

namespace {

struct TreeBuilder {
    const Dataset& d;
    const ForestConfig& config;
    std::span<const std::uint8_t> column_has_missing;
    Rng rng;
    MuralTree tree;

    TreeBuilder(const Dataset& data, const ForestConfig& cfg,
                std::span<const std::uint8_t> missing, std::uint64_t tree_index)
        : d(data), config(cfg), column_has_missing(missing), rng(cfg.seed, tree_index + 1) {}

    std::int32_t build(std::vector<RowIndex> rows, std::int32_t depth, std::int32_t parent,
                       double edge_weight, std::vector<std::uint8_t>& path_vars) {
        const auto id = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[id].parent = parent;
        tree.nodes[id].depth = depth;
        tree.nodes[id].edge_weight = edge_weight;

        auto outcome = split_node(d, rows, depth, config, rng, column_has_missing, path_vars);
        if (!outcome.split.has_value()) {
            tree.nodes[id].rows = std::move(rows);
            return id;
        }

        const auto var = static_cast<std::size_t>(split_var(*outcome.split));
        const bool four_way = outcome.child_rows.size() == 4;
        const double child_weight = four_way ? config.four_way_edge_weight : 1.0;
        tree.nodes[id].split = *outcome.split;

        const std::uint8_t prev = path_vars[var];
        path_vars[var] = 1;
        for (auto& child : outcome.child_rows) {
            tree.nodes[id].child_counts.push_back(static_cast<std::int64_t>(child.size()));
            const auto cid = build(std::move(child), depth + 1, id, child_weight, path_vars);
            tree.nodes[id].children.push_back(cid);
        }
        path_vars[var] = prev;
        return id;
    }
};

}  // namespace

MuralForest fit(const Dataset& d, const ForestConfig& config) {
    config.validate();
    if (d.n_rows() < static_cast<std::size_t>(2 * config.min_leaf))
        throw UserError("fit: dataset has fewer than 2*min_leaf rows");
    if (d.n_cols() < 2) throw UserError("fit: need at least 2 columns");

    MuralForest forest;
    forest.config = config;
    forest.schema = d.schema();
    forest.n_rows = d.n_rows();
    forest.column_missing_at_fit.resize(d.n_cols());
    for (std::size_t c = 0; c < d.n_cols(); ++c)
        forest.column_missing_at_fit[c] = d.column_has_missing(c) ? 1 : 0;

    forest.trees.resize(config.n_trees);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (std::int32_t t = 0; t < config.n_trees; ++t) {
        TreeBuilder builder(d, config, forest.column_missing_at_fit,
                            static_cast<std::uint64_t>(t));
        std::vector<RowIndex> all(d.n_rows());
        for (std::size_t r = 0; r < d.n_rows(); ++r) all[r] = static_cast<RowIndex>(r);
        std::vector<std::uint8_t> path_vars(d.n_cols(), 0);
        builder.build(std::move(all), 0, -1, 1.0, path_vars);
        forest.trees[t] = std::move(builder.tree);
    }

    forest.leaf_assignments.assign(config.n_trees,
                                   std::vector<std::int32_t>(d.n_rows(), -1));
    for (std::int32_t t = 0; t < config.n_trees; ++t) {
        const auto& tree = forest.trees[t];
        for (std::size_t id = 0; id < tree.nodes.size(); ++id)
            for (auto r : tree.nodes[id].rows)
                forest.leaf_assignments[t][static_cast<std::size_t>(r)] =
                    static_cast<std::int32_t>(id);
    }
    return forest;
}

std::size_t MuralTree::leaf_count() const {
    std::size_t n = 0;
    for (const auto& node : nodes) n += node.is_leaf();
    return n;
}

std::vector<std::int32_t> MuralTree::leaf_ids() const {
    std::vector<std::int32_t> out;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].is_leaf()) out.push_back(static_cast<std::int32_t>(i));
    return out;
}

double MuralTree::weighted_depth(std::int32_t node) const {
    double w = 0.0;
    while (nodes[node].parent >= 0) {
        w += nodes[node].edge_weight;
        node = nodes[node].parent;
    }
    return w;
}

namespace {

// child with the largest training count among [first, last); ties go left
std::size_t majority_child(const TreeNode& node, std::size_t first, std::size_t last) {
    std::size_t best = first;
    for (std::size_t i = first + 1; i < last; ++i)
        if (node.child_counts[i] > node.child_counts[best]) best = i;
    return best;
}

}  // namespace

std::int32_t MuralTree::route(const Dataset& d, RowIndex row) const {
    std::int32_t id = 0;
    while (!nodes[id].is_leaf()) {
        const auto& node = nodes[id];
        const auto& split = *node.split;
        std::size_t child = 0;
        if (const auto* cs = std::get_if<ContinuousSplit>(&split)) {
            if (d.is_missing(cs->var, row))
                child = majority_child(node, 0, 2);
            else
                child = d.numeric(cs->var, row) <= cs->threshold ? 0 : 1;
        } else if (const auto* cat = std::get_if<CategoricalSplit>(&split)) {
            if (d.is_missing(cat->var, row))
                child = majority_child(node, 0, 2);
            else
                child = d.code(cat->var, row) == cat->category ? 0 : 1;
        } else if (const auto* mnar = std::get_if<MnarFourWay>(&split)) {
            if (!d.is_missing(mnar->var, row)) {
                child = d.numeric(mnar->var, row) <= mnar->measured_threshold ? 0 : 1;
            } else if (d.is_missing(mnar->aux_var, row)) {
                child = majority_child(node, 2, 4);
            } else {
                child = d.numeric(mnar->aux_var, row) <= mnar->aux_threshold ? 2 : 3;
            }
        } else {
            const auto* bin = std::get_if<BinaryFourWay>(&split);
            if (d.is_missing(bin->var, row)) {
                child = majority_child(node, 0, 4);
            } else {
                const bool eq = d.code(bin->var, row) == bin->category;
                const std::size_t base = eq ? 0 : 2;
                const double thr = eq ? bin->aux_threshold_eq : bin->aux_threshold_neq;
                if (d.is_missing(bin->aux_var, row))
                    child = majority_child(node, base, base + 2);
                else
                    child = d.numeric(bin->aux_var, row) <= thr ? base : base + 1;
            }
        }
        id = node.children[child];
    }
    return id;
}

void MuralTree::validate(const Dataset& d) const {
    if (nodes.empty()) throw std::logic_error("tree has no nodes");
    if (nodes[0].parent != -1 || nodes[0].depth != 0)
        throw std::logic_error("bad root node");
    std::vector<std::int64_t> seen(d.n_rows(), 0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& node = nodes[i];
        if (node.parent >= static_cast<std::int32_t>(i))
            throw std::logic_error("nodes are not in preorder");
        if (node.parent >= 0 && node.depth != nodes[node.parent].depth + 1)
            throw std::logic_error("bad depth bookkeeping");
        if (node.is_leaf()) {
            if (!node.children.empty()) throw std::logic_error("leaf with children");
            for (auto r : node.rows) seen[static_cast<std::size_t>(r)]++;
        } else {
            const bool four = std::holds_alternative<MnarFourWay>(*node.split) ||
                              std::holds_alternative<BinaryFourWay>(*node.split);
            const std::size_t arity = four ? 4 : 2;
            if (node.children.size() != arity || node.child_counts.size() != arity)
                throw std::logic_error("wrong split arity");
            if (!node.rows.empty()) throw std::logic_error("internal node stores rows");
            for (auto c : node.children)
                if (c <= static_cast<std::int32_t>(i) || nodes[c].parent != static_cast<std::int32_t>(i))
                    throw std::logic_error("bad child link");
        }
    }
    for (std::size_t r = 0; r < d.n_rows(); ++r)
        if (seen[r] != 1) throw std::logic_error("leaves do not partition the training rows");
    // routing consistency doubles as a per-node partition check
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!nodes[i].is_leaf()) continue;
        for (auto r : nodes[i].rows)
            if (route(d, r) != static_cast<std::int32_t>(i))
                throw std::logic_error("training row does not route to its leaf");
    }
}

}  // namespace mural
