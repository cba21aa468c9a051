#include "mural/cohort_expr.hpp"

#include <charconv>
#include <fstream>

namespace mural {

namespace {

enum class Op { Lt, Le, Gt, Ge, Eq, Ne, Missing, Observed };

struct Clause {
    std::size_t col = 0;
    Op op = Op::Eq;
    double literal = 0.0;
};

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

Clause parse_clause(const Dataset& d, const std::string& text, const std::string& full) {
    const std::string t = trim(text);
    if (t.empty()) throw UserError("empty clause in cohort expression '" + full + "'");

    static const std::pair<const char*, Op> ops[] = {
        {"<=", Op::Le}, {">=", Op::Ge}, {"==", Op::Eq},
        {"!=", Op::Ne}, {"<", Op::Lt},  {">", Op::Gt},
    };
    for (const auto& [sym, op] : ops) {
        const auto pos = t.find(sym);
        if (pos == std::string::npos) continue;
        const std::string name = trim(t.substr(0, pos));
        const std::string lit = trim(t.substr(pos + std::string(sym).size()));
        if (name.empty() || lit.empty())
            throw UserError("malformed clause '" + t + "' in cohort expression '" + full + "'");
        Clause c;
        c.col = d.schema().index_of(name);
        c.op = op;
        const auto [p, ec] = std::from_chars(lit.data(), lit.data() + lit.size(), c.literal);
        if (ec != std::errc() || p != lit.data() + lit.size())
            throw UserError("cannot parse literal '" + lit + "' in cohort expression '" + full +
                            "'");
        return c;
    }
    // unary forms
    const auto space = t.find_last_of(" \t");
    if (space != std::string::npos) {
        const std::string name = trim(t.substr(0, space));
        const std::string word = trim(t.substr(space + 1));
        if (word == "missing" || word == "observed") {
            Clause c;
            c.col = d.schema().index_of(name);
            c.op = word == "missing" ? Op::Missing : Op::Observed;
            return c;
        }
    }
    throw UserError("malformed clause '" + t + "' in cohort expression '" + full + "'");
}

bool eval_clause(const Dataset& d, const Clause& c, RowIndex row) {
    const bool missing = d.is_missing(c.col, row);
    switch (c.op) {
        case Op::Missing: return missing;
        case Op::Observed: return !missing;
        default: break;
    }
    if (missing) return false;
    const double v = d.numeric(c.col, row);
    switch (c.op) {
        case Op::Lt: return v < c.literal;
        case Op::Le: return v <= c.literal;
        case Op::Gt: return v > c.literal;
        case Op::Ge: return v >= c.literal;
        case Op::Eq: return v == c.literal;
        case Op::Ne: return v != c.literal;
        default: return false;
    }
}

std::vector<RowIndex> read_row_id_file(const Dataset& d, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UserError("cannot open row-id file '" + path + "'");
    std::vector<RowIndex> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::int64_t id = 0;
        const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), id);
        if (ec != std::errc() || p != t.data() + t.size())
            throw UserError("row-id file '" + path + "' line " + std::to_string(lineno) +
                            ": cannot parse '" + t + "'");
        if (id < 0 || id >= static_cast<std::int64_t>(d.n_rows()))
            throw UserError("row-id file '" + path + "' line " + std::to_string(lineno) +
                            ": row " + t + " out of range");
        rows.push_back(id);
    }
    return rows;
}

}  // namespace

std::vector<RowIndex> select_cohort(const Dataset& d, const std::string& expr) {
    const std::string t = trim(expr);
    if (t.empty()) throw UserError("empty cohort expression");
    if (t[0] == '@') return read_row_id_file(d, t.substr(1));

    // split on '&' / '&&' / ' and '
    std::vector<std::string> parts;
    std::string cur;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] == '&') {
            parts.push_back(cur);
            cur.clear();
            if (i + 1 < t.size() && t[i + 1] == '&') ++i;
        } else if (t.compare(i, 5, " and ") == 0) {
            parts.push_back(cur);
            cur.clear();
            i += 4;
        } else {
            cur.push_back(t[i]);
        }
    }
    parts.push_back(cur);

    std::vector<Clause> clauses;
    for (const auto& p : parts) clauses.push_back(parse_clause(d, p, expr));

    std::vector<RowIndex> rows;
    for (std::size_t r = 0; r < d.n_rows(); ++r) {
        const auto row = static_cast<RowIndex>(r);
        bool all = true;
        for (const auto& c : clauses)
            if (!eval_clause(d, c, row)) {
                all = false;
                break;
            }
        if (all) rows.push_back(row);
    }
    return rows;
}

}  // namespace mural
