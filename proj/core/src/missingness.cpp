#include "mural/missingness.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mural/rng.hpp"
#include "mural/stats.hpp"

#include "json.hpp"

namespace mural {

const ColumnMissingness* MissingnessProfile::find(std::size_t col) const {
    for (const auto& c : columns)
        if (c.col == col) return &c;
    return nullptr;
}

bool MissingnessProfile::is_mnar(std::size_t col) const {
    const auto* c = find(col);
    return c != nullptr && c->classification == MissingClass::Mnar;
}

bool MissingnessProfile::is_random(std::size_t col) const {
    const auto* c = find(col);
    return c != nullptr && c->classification == MissingClass::Random;
}

std::string MissingnessProfile::text_report(const Schema& schema) const {
    std::ostringstream out;
    out << "# missingness profile (alpha = " << alpha << ")\n";
    if (columns.empty()) {
        out << "no columns with missing values\n";
        return out.str();
    }
    for (const auto& c : columns) {
        out << schema.column(c.col).name << "\tmissing=" << c.missing_count << "\tp=";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6g", c.p_value);
        out << buf << "\t" << (c.classification == MissingClass::Mnar ? "MNAR" : "Random");
        if (c.insufficient_data) out << "\t(insufficient data, used hint)";
        else if (c.forced_by_hint) out << "\t(forced by hint)";
        out << "\n";
    }
    return out.str();
}

std::string MissingnessProfile::json_report(const Schema& schema) const {
    nlohmann::ordered_json root;
    root["alpha"] = alpha;
    root["columns"] = nlohmann::ordered_json::array();
    for (const auto& c : columns) {
        nlohmann::ordered_json jc;
        jc["name"] = schema.column(c.col).name;
        jc["index"] = c.col;
        jc["missing_count"] = c.missing_count;
        jc["p_value"] = c.p_value;
        jc["classification"] = c.classification == MissingClass::Mnar ? "mnar" : "random";
        jc["insufficient_data"] = c.insufficient_data;
        jc["forced_by_hint"] = c.forced_by_hint;
        jc["evidence"] = nlohmann::ordered_json::array();
        for (const auto& e : c.evidence) {
            nlohmann::ordered_json je;
            je["column"] = schema.column(e.other_col).name;
            je["statistic"] = e.statistic;
            je["p"] = e.p_unadjusted;
            je["test"] = e.chi_square ? "chi_square" : "rank_sum";
            jc["evidence"].push_back(je);
        }
        root["columns"].push_back(jc);
    }
    return root.dump(2) + "\n";
}

MissingnessProfile detect_mnar(const Dataset& d, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw UserError("detect_mnar: alpha must be in (0,1)");
    MissingnessProfile profile;
    profile.alpha = alpha;

    const std::size_t n = d.n_rows();
    for (std::size_t v = 0; v < d.n_cols(); ++v) {
        const std::size_t miss = d.missing_count(v);
        if (miss == 0) continue;

        ColumnMissingness cm;
        cm.col = v;
        cm.missing_count = miss;

        const auto hint = d.schema().column(v).hint;
        if (miss < 5 || n - miss < 5) {
            cm.insufficient_data = true;
            cm.classification =
                hint == MissingnessHint::ForceMnar ? MissingClass::Mnar : MissingClass::Random;
            cm.p_value = cm.classification == MissingClass::Mnar ? 0.0 : 1.0;
            profile.columns.push_back(std::move(cm));
            continue;
        }

        for (std::size_t u = 0; u < d.n_cols(); ++u) {
            if (u == v) continue;
            const auto& kind = d.schema().column(u).kind;
            stats::TestResult res;
            bool chi = false;
            if (kind.is_discrete()) {
                // masked/observed indicator of v crossed with u's codes
                std::vector<std::vector<std::int64_t>> table(
                    2, std::vector<std::int64_t>(kind.code_count(), 0));
                std::size_t n_miss = 0, n_obs = 0;
                for (std::size_t r = 0; r < n; ++r) {
                    const auto row = static_cast<RowIndex>(r);
                    if (d.is_missing(u, row)) continue;
                    const bool m = d.is_missing(v, row);
                    table[m ? 1 : 0][d.code(u, row)]++;
                    (m ? n_miss : n_obs)++;
                }
                if (n_miss < 5 || n_obs < 5) continue;
                res = stats::chi_square_independence(table);
                chi = true;
            } else {
                std::vector<double> grp_miss, grp_obs;
                for (std::size_t r = 0; r < n; ++r) {
                    const auto row = static_cast<RowIndex>(r);
                    if (d.is_missing(u, row)) continue;
                    (d.is_missing(v, row) ? grp_miss : grp_obs).push_back(d.real(u, row));
                }
                if (grp_miss.size() < 5 || grp_obs.size() < 5) continue;
                res = stats::rank_sum_test(grp_miss, grp_obs);
            }
            if (!res.valid) continue;
            cm.evidence.push_back({u, res.statistic, res.p_value, chi});
        }

        if (hint != MissingnessHint::Auto) {
            cm.forced_by_hint = true;
            cm.classification =
                hint == MissingnessHint::ForceMnar ? MissingClass::Mnar : MissingClass::Random;
            cm.p_value = cm.classification == MissingClass::Mnar ? 0.0 : 1.0;
        } else if (cm.evidence.empty()) {
            cm.insufficient_data = true;
            cm.classification = MissingClass::Random;
            cm.p_value = 1.0;
        } else {
            double p_min = 1.0;
            for (const auto& e : cm.evidence) p_min = std::min(p_min, e.p_unadjusted);
            cm.p_value = std::min(1.0, p_min * static_cast<double>(cm.evidence.size()));
            cm.classification = cm.p_value <= alpha ? MissingClass::Mnar : MissingClass::Random;
        }
        profile.columns.push_back(std::move(cm));
    }
    return profile;
}

Dataset mean_impute(const Dataset& d) {
    Dataset out = d;
    for (std::size_t c = 0; c < d.n_cols(); ++c) {
        if (d.missing_count(c) == 0) continue;
        const auto& kind = d.schema().column(c).kind;
        if (kind.is_discrete()) {
            std::vector<std::int64_t> counts(kind.code_count(), 0);
            std::size_t seen = 0;
            for (std::size_t r = 0; r < d.n_rows(); ++r) {
                const auto row = static_cast<RowIndex>(r);
                if (d.is_missing(c, row)) continue;
                counts[d.code(c, row)]++;
                ++seen;
            }
            if (seen == 0)
                throw UserError("mean_impute: column '" + d.schema().column(c).name +
                                "' has no observed values");
            const auto mode = static_cast<std::int32_t>(
                std::max_element(counts.begin(), counts.end()) - counts.begin());
            for (std::size_t r = 0; r < d.n_rows(); ++r) {
                const auto row = static_cast<RowIndex>(r);
                if (d.is_missing(c, row)) out.set_code(c, row, mode);
            }
        } else {
            double sum = 0.0;
            std::size_t seen = 0;
            for (std::size_t r = 0; r < d.n_rows(); ++r) {
                const auto row = static_cast<RowIndex>(r);
                if (d.is_missing(c, row)) continue;
                sum += d.real(c, row);
                ++seen;
            }
            if (seen == 0)
                throw UserError("mean_impute: column '" + d.schema().column(c).name +
                                "' has no observed values");
            const double mean = sum / static_cast<double>(seen);
            for (std::size_t r = 0; r < d.n_rows(); ++r) {
                const auto row = static_cast<RowIndex>(r);
                if (d.is_missing(c, row)) out.set_real(c, row, mean);
            }
        }
    }
    return out;
}

Dataset induce_mnar_threshold(const Dataset& d, std::size_t column, double threshold,
                              Direction direction) {
    if (d.schema().column(column).kind.is_discrete())
        throw UserError("induce_mnar_threshold: column '" + d.schema().column(column).name +
                        "' is not continuous");
    Dataset out = d;
    for (std::size_t r = 0; r < d.n_rows(); ++r) {
        const auto row = static_cast<RowIndex>(r);
        if (d.is_missing(column, row)) continue;
        const double v = d.real(column, row);
        const bool beyond = direction == Direction::Above ? v > threshold : v < threshold;
        if (beyond) out.set_missing(column, row);
    }
    return out;
}

Dataset induce_mcar(const Dataset& d, std::size_t column, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction < 1.0))
        throw UserError("induce_mcar: fraction must be in [0,1)");
    const auto k = static_cast<std::size_t>(fraction * static_cast<double>(d.n_rows()));
    Dataset out = d;
    Rng rng(seed, 0x6d636172);  // "mcar" stream
    for (auto r : rng.sample_without_replacement(d.n_rows(), k))
        out.set_missing(column, static_cast<RowIndex>(r));
    return out;
}

Dataset mask_rows(const Dataset& d, std::size_t column, const std::vector<std::uint8_t>& flags) {
    if (flags.size() != d.n_rows())
        throw std::invalid_argument("mask_rows: flag vector size mismatch");
    Dataset out = d;
    for (std::size_t r = 0; r < flags.size(); ++r)
        if (flags[r]) out.set_missing(column, static_cast<RowIndex>(r));
    return out;
}

}  // namespace mural
