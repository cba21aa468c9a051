#include "mural/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace mural {

ColumnKind ColumnKind::ordinal(std::int32_t level_count) {
    if (level_count < 1) throw UserError("ordinal column needs a positive level count");
    return {ColumnType::Ordinal, level_count};
}

ColumnKind ColumnKind::categorical(std::int32_t cardinality) {
    if (cardinality < 3) throw UserError("categorical column needs cardinality >= 3");
    return {ColumnType::Categorical, cardinality};
}

std::string ColumnKind::to_string() const {
    switch (type) {
        case ColumnType::Continuous: return "continuous";
        case ColumnType::Binary: return "binary";
        case ColumnType::Ordinal: return "ordinal:" + std::to_string(levels);
        case ColumnType::Categorical: return "categorical:" + std::to_string(levels);
    }
    return "?";
}

ColumnKind ColumnKind::parse(const std::string& text) {
    if (text == "continuous") return continuous();
    if (text == "binary") return binary();
    const auto colon = text.find(':');
    if (colon != std::string::npos) {
        const std::string head = text.substr(0, colon);
        const std::string tail = text.substr(colon + 1);
        int n = 0;
        const auto [p, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), n);
        if (ec == std::errc() && p == tail.data() + tail.size()) {
            if (head == "ordinal") return ordinal(n);
            if (head == "categorical") return categorical(n);
        }
    }
    throw UserError("unknown column kind '" + text +
                    "' (expected continuous|ordinal:<k>|binary|categorical:<k>)");
}

std::string hint_to_string(MissingnessHint h) {
    switch (h) {
        case MissingnessHint::Auto: return "auto";
        case MissingnessHint::ForceMnar: return "mnar";
        case MissingnessHint::ForceRandom: return "random";
    }
    return "?";
}

MissingnessHint parse_hint(const std::string& text) {
    if (text == "auto") return MissingnessHint::Auto;
    if (text == "mnar") return MissingnessHint::ForceMnar;
    if (text == "random") return MissingnessHint::ForceRandom;
    throw UserError("unknown missingness hint '" + text + "' (expected auto|mnar|random)");
}

Schema::Schema(std::vector<ColumnSpec> columns) : columns_(std::move(columns)) {
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        const auto& name = columns_[i].name;
        if (name.empty()) throw UserError("schema column " + std::to_string(i) + " has an empty name");
        if (!seen.emplace(name, i).second)
            throw UserError("schema has duplicate column name '" + name + "'");
    }
}

std::size_t Schema::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
        if (columns_[i].name == name) return i;
    throw UserError("unknown column '" + name + "'");
}

bool Schema::has_column(const std::string& name) const {
    for (const auto& c : columns_)
        if (c.name == name) return true;
    return false;
}

bool Schema::operator==(const Schema& other) const {
    if (columns_.size() != other.columns_.size()) return false;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        const auto& a = columns_[i];
        const auto& b = other.columns_[i];
        if (a.name != b.name || !(a.kind == b.kind) || a.hint != b.hint ||
            a.missing_token != b.missing_token)
            return false;
    }
    return true;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

Schema Schema::parse_text(const std::string& text) {
    std::vector<ColumnSpec> cols;
    ColumnSpec cur;
    bool in_block = false;
    bool kind_seen = false;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    auto flush = [&] {
        if (!in_block) return;
        if (cur.name.empty()) throw UserError("schema file: [column] block without a name");
        if (!kind_seen) throw UserError("schema file: column '" + cur.name + "' has no kind");
        cols.push_back(cur);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t == "[column]") {
            flush();
            cur = ColumnSpec{};
            in_block = true;
            kind_seen = false;
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw UserError("schema file line " + std::to_string(lineno) +
                            ": expected key = value, got '" + t + "'");
        if (!in_block)
            throw UserError("schema file line " + std::to_string(lineno) +
                            ": key outside a [column] block");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key == "name") cur.name = value;
        else if (key == "kind") { cur.kind = ColumnKind::parse(value); kind_seen = true; }
        else if (key == "missing_token") cur.missing_token = value;
        else if (key == "missingness") cur.hint = parse_hint(value);
        else
            throw UserError("schema file line " + std::to_string(lineno) + ": unknown key '" +
                            key + "'");
    }
    flush();
    if (cols.empty()) throw UserError("schema file defines no columns");
    return Schema(std::move(cols));
}

Schema Schema::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UserError("cannot open schema file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str());
}

std::string Schema::to_text() const {
    std::ostringstream out;
    for (const auto& c : columns_) {
        out << "[column]\n";
        out << "name = " << c.name << "\n";
        out << "kind = " << c.kind.to_string() << "\n";
        out << "missing_token = " << c.missing_token << "\n";
        out << "missingness = " << hint_to_string(c.hint) << "\n";
    }
    return out.str();
}

void Schema::save_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UserError("cannot write schema file '" + path + "'");
    out << to_text();
}

Dataset::Dataset(Schema schema, std::size_t n_rows)
    : schema_(std::move(schema)), n_rows_(n_rows), columns_(schema_.n_cols()) {
    for (std::size_t c = 0; c < schema_.n_cols(); ++c) {
        if (schema_.column(c).kind.is_discrete())
            columns_[c].codes.assign(n_rows_, 0);
        else
            columns_[c].reals.assign(n_rows_, 0.0);
        columns_[c].missing.assign(n_rows_, 1);  // cells start masked until set
    }
}

void Dataset::set_real(std::size_t col, RowIndex row, double value) {
    columns_[col].reals[static_cast<std::size_t>(row)] = value;
    columns_[col].missing[static_cast<std::size_t>(row)] = 0;
}

void Dataset::set_code(std::size_t col, RowIndex row, std::int32_t code) {
    columns_[col].codes[static_cast<std::size_t>(row)] = code;
    columns_[col].missing[static_cast<std::size_t>(row)] = 0;
}

void Dataset::set_missing(std::size_t col, RowIndex row) {
    columns_[col].missing[static_cast<std::size_t>(row)] = 1;
}

void Dataset::clear_missing(std::size_t col, RowIndex row) {
    columns_[col].missing[static_cast<std::size_t>(row)] = 0;
}

std::size_t Dataset::missing_count(std::size_t col) const {
    std::size_t n = 0;
    for (auto m : columns_[col].missing) n += m;
    return n;
}

void Dataset::validate() const {
    for (std::size_t c = 0; c < n_cols(); ++c) {
        const auto& spec = schema_.column(c);
        for (std::size_t r = 0; r < n_rows_; ++r) {
            if (is_missing(c, static_cast<RowIndex>(r))) continue;
            if (spec.kind.is_discrete()) {
                const auto v = code(c, static_cast<RowIndex>(r));
                if (v < 0 || v >= spec.kind.code_count())
                    throw UserError("column '" + spec.name + "' row " + std::to_string(r) +
                                    ": code " + std::to_string(v) + " out of range");
            } else {
                const double v = real(c, static_cast<RowIndex>(r));
                if (!std::isfinite(v))
                    throw UserError("column '" + spec.name + "' row " + std::to_string(r) +
                                    ": non-finite value");
            }
        }
    }
}

bool Dataset::equals(const Dataset& other) const {
    if (!(schema_ == other.schema_) || n_rows_ != other.n_rows_) return false;
    for (std::size_t c = 0; c < n_cols(); ++c) {
        for (std::size_t r = 0; r < n_rows_; ++r) {
            const auto row = static_cast<RowIndex>(r);
            if (is_missing(c, row) != other.is_missing(c, row)) return false;
            if (is_missing(c, row)) continue;
            if (schema_.column(c).kind.is_discrete()) {
                if (code(c, row) != other.code(c, row)) return false;
            } else {
                if (real(c, row) != other.real(c, row)) return false;
            }
        }
    }
    return true;
}

namespace {

// One CSV record, RFC-4180 quoting. Returns false at end of stream.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
    fields.clear();
    std::string field;
    bool in_quotes = false;
    bool any = false;
    int ch;
    while ((ch = in.get()) != EOF) {
        any = true;
        const char c = static_cast<char>(ch);
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            break;
        } else if (c == '\r') {
            if (in.peek() == '\n') in.get();
            break;
        } else {
            field.push_back(c);
        }
    }
    if (!any) return false;
    fields.push_back(std::move(field));
    return true;
}

std::string cell_name(const Schema& schema, std::size_t col, std::size_t row1based) {
    return "row " + std::to_string(row1based) + ", column '" + schema.column(col).name + "'";
}

}  // namespace

Dataset load_csv(const Schema& schema, std::istream& in) {
    std::vector<std::string> header;
    if (!read_record(in, header)) throw UserError("CSV is empty (no header row)");
    if (header.size() != schema.n_cols())
        throw UserError("CSV header has " + std::to_string(header.size()) + " columns, schema has " +
                        std::to_string(schema.n_cols()));
    // map file position -> schema column
    std::vector<std::size_t> to_schema(header.size());
    std::vector<bool> used(schema.n_cols(), false);
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (!schema.has_column(header[i]))
            throw UserError("CSV header column '" + header[i] + "' is not in the schema");
        const std::size_t s = schema.index_of(header[i]);
        if (used[s]) throw UserError("CSV header repeats column '" + header[i] + "'");
        used[s] = true;
        to_schema[i] = s;
    }

    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> fields;
    while (read_record(in, fields)) {
        if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
        if (fields.size() != header.size())
            throw UserError("CSV row " + std::to_string(rows.size() + 2) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(header.size()));
        rows.push_back(fields);
    }

    Dataset d(schema, rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t f = 0; f < header.size(); ++f) {
            const std::size_t c = to_schema[f];
            const auto& spec = schema.column(c);
            const std::string& text = rows[r][f];
            if (text.empty() || text == spec.missing_token || text == "NA") {
                d.set_missing(c, static_cast<RowIndex>(r));
                continue;
            }
            if (spec.kind.is_discrete()) {
                std::int32_t v = 0;
                const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
                if (ec != std::errc() || p != text.data() + text.size())
                    throw UserError("cannot parse '" + text + "' as an integer code at " +
                                    cell_name(schema, c, r + 2));
                if (v < 0 || v >= spec.kind.code_count())
                    throw UserError("code '" + text + "' out of range 0.." +
                                    std::to_string(spec.kind.code_count() - 1) + " at " +
                                    cell_name(schema, c, r + 2));
                d.set_code(c, static_cast<RowIndex>(r), v);
            } else {
                double v = 0.0;
                const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
                if (ec != std::errc() || p != text.data() + text.size())
                    throw UserError("cannot parse '" + text + "' as a real number at " +
                                    cell_name(schema, c, r + 2));
                if (!std::isfinite(v))
                    throw UserError("non-finite value '" + text + "' at " + cell_name(schema, c, r + 2));
                d.set_real(c, static_cast<RowIndex>(r), v);
            }
        }
    }
    return d;
}

Dataset load_csv_file(const Schema& schema, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UserError("cannot open data file '" + path + "'");
    return load_csv(schema, in);
}

namespace {

void write_field(std::ostream& out, const std::string& text) {
    const bool quote = text.find_first_of(",\"\r\n") != std::string::npos;
    if (!quote) {
        out << text;
        return;
    }
    out << '"';
    for (char c : text) {
        if (c == '"') out << '"';
        out << c;
    }
    out << '"';
}

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_csv(const Dataset& d, std::ostream& out) {
    const auto& schema = d.schema();
    for (std::size_t c = 0; c < schema.n_cols(); ++c) {
        if (c) out << ',';
        write_field(out, schema.column(c).name);
    }
    out << '\n';
    for (std::size_t r = 0; r < d.n_rows(); ++r) {
        for (std::size_t c = 0; c < schema.n_cols(); ++c) {
            if (c) out << ',';
            const auto row = static_cast<RowIndex>(r);
            if (d.is_missing(c, row)) {
                write_field(out, schema.column(c).missing_token);
            } else if (schema.column(c).kind.is_discrete()) {
                out << d.code(c, row);
            } else {
                out << format_real(d.real(c, row));
            }
        }
        out << '\n';
    }
}

void write_csv_file(const Dataset& d, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UserError("cannot write data file '" + path + "'");
    write_csv(d, out);
}

std::pair<Dataset, StandardizationParams> standardize(const Dataset& d, bool include_ordinal) {
    StandardizationParams params;
    params.columns.resize(d.n_cols());
    Dataset out = d;
    for (std::size_t c = 0; c < d.n_cols(); ++c) {
        const auto& kind = d.schema().column(c).kind;
        const bool eligible = kind.type == ColumnType::Continuous ||
                              (include_ordinal && kind.type == ColumnType::Ordinal);
        if (!eligible) continue;
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t r = 0; r < d.n_rows(); ++r) {
            const auto row = static_cast<RowIndex>(r);
            if (d.is_missing(c, row)) continue;
            sum += d.numeric(c, row);
            ++n;
        }
        auto& p = params.columns[c];
        if (n < 2) {
            p.zero_variance = true;
            continue;
        }
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t r = 0; r < d.n_rows(); ++r) {
            const auto row = static_cast<RowIndex>(r);
            if (d.is_missing(c, row)) continue;
            const double dv = d.numeric(c, row) - mean;
            ss += dv * dv;
        }
        const double var = ss / static_cast<double>(n - 1);
        if (var <= 0.0) {
            p.zero_variance = true;
            continue;
        }
        p.scaled = true;
        p.mean = mean;
        p.stddev = std::sqrt(var);
        if (kind.type == ColumnType::Continuous) {
            for (std::size_t r = 0; r < d.n_rows(); ++r) {
                const auto row = static_cast<RowIndex>(r);
                if (d.is_missing(c, row)) continue;
                out.set_real(c, row, (d.real(c, row) - p.mean) / p.stddev);
            }
        }
        // ordinal codes keep their integer storage; scaled params are
        // recorded for consumers that want the transform
    }
    return {std::move(out), std::move(params)};
}

Dataset apply_standardization(const Dataset& d, const StandardizationParams& params) {
    if (params.columns.size() != d.n_cols())
        throw UserError("standardization parameters cover " +
                        std::to_string(params.columns.size()) + " columns, dataset has " +
                        std::to_string(d.n_cols()));
    Dataset out = d;
    for (std::size_t c = 0; c < d.n_cols(); ++c) {
        const auto& p = params.columns[c];
        if (!p.scaled || d.schema().column(c).kind.is_discrete()) continue;
        for (std::size_t r = 0; r < d.n_rows(); ++r) {
            const auto row = static_cast<RowIndex>(r);
            if (d.is_missing(c, row)) continue;
            out.set_real(c, row, (d.real(c, row) - p.mean) / p.stddev);
        }
    }
    return out;
}

std::int64_t sturges_bin_count(std::int64_t n) {
    if (n < 1) throw UserError("sturges_bin_count requires n >= 1");
    const auto u = static_cast<std::uint64_t>(n);
    const int ceil_log2 = (u == 1) ? 0 : 64 - std::countl_zero(u - 1);
    return static_cast<std::int64_t>(ceil_log2) + 1;
}

std::vector<std::int32_t> discretize(std::span<const double> values,
                                     std::span<const std::uint8_t> mask,
                                     std::int32_t n_bins) {
    if (n_bins < 1) throw UserError("discretize requires n_bins >= 1");
    if (values.size() != mask.size())
        throw std::invalid_argument("discretize: values/mask size mismatch");
    double lo = 0.0, hi = 0.0;
    bool seen = false;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (mask[i]) continue;
        if (!seen) {
            lo = hi = values[i];
            seen = true;
        } else {
            lo = std::min(lo, values[i]);
            hi = std::max(hi, values[i]);
        }
    }
    if (!seen) throw UserError("discretize: column has no observed values");
    std::vector<std::int32_t> codes(values.size(), kMissingCode);
    const double width = (hi - lo) / static_cast<double>(n_bins);
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (mask[i]) continue;
        std::int32_t b = 0;
        if (width > 0.0) {
            b = static_cast<std::int32_t>((values[i] - lo) / width);
            b = std::clamp(b, 0, n_bins - 1);
        }
        codes[i] = b;
    }
    return codes;
}

std::vector<std::int32_t> discretize_column(const Dataset& d, std::size_t col,
                                            std::int32_t n_bins) {
    std::vector<double> values(d.n_rows());
    std::vector<std::uint8_t> mask(d.n_rows());
    for (std::size_t r = 0; r < d.n_rows(); ++r) {
        const auto row = static_cast<RowIndex>(r);
        mask[r] = d.is_missing(col, row) ? 1 : 0;
        values[r] = mask[r] ? 0.0 : d.numeric(col, row);
    }
    return discretize(values, mask, n_bins);
}

}  // namespace mural
