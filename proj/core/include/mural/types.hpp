#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mural {

using RowIndex = std::int64_t;

// Raised for bad user input (files, flags, expressions). The CLI maps these
// to exit code 1; anything else escaping to main is an internal error (2).
class UserError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ColumnType : std::uint8_t {
    Continuous = 0,
    Ordinal = 1,
    Binary = 2,
    Categorical = 3,
};

struct ColumnKind {
    ColumnType type = ColumnType::Continuous;
    std::int32_t levels = 0;  // Ordinal: level count; Categorical: cardinality; Binary: 2

    static ColumnKind continuous() { return {ColumnType::Continuous, 0}; }
    static ColumnKind binary() { return {ColumnType::Binary, 2}; }
    static ColumnKind ordinal(std::int32_t level_count);
    static ColumnKind categorical(std::int32_t cardinality);

    bool is_discrete() const { return type != ColumnType::Continuous; }
    // Number of valid codes for a discrete column (codes are 0..code_count()-1).
    std::int32_t code_count() const { return is_discrete() ? levels : 0; }

    std::string to_string() const;
    static ColumnKind parse(const std::string& text);

    bool operator==(const ColumnKind&) const = default;
};

enum class MissingnessHint : std::uint8_t { Auto = 0, ForceMnar = 1, ForceRandom = 2 };

std::string hint_to_string(MissingnessHint h);
MissingnessHint parse_hint(const std::string& text);

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::continuous();
    MissingnessHint hint = MissingnessHint::Auto;
    std::string missing_token = "NA";  // empty cells are always treated as missing too
};

class Schema {
public:
    Schema() = default;
    explicit Schema(std::vector<ColumnSpec> columns);

    std::size_t n_cols() const { return columns_.size(); }
    const ColumnSpec& column(std::size_t i) const { return columns_.at(i); }
    const std::vector<ColumnSpec>& columns() const { return columns_; }

    // Index of a named column; throws UserError when absent.
    std::size_t index_of(const std::string& name) const;
    bool has_column(const std::string& name) const;

    // Flat key/value schema file, one [column] block per column.
    static Schema parse_text(const std::string& text);
    static Schema load_file(const std::string& path);
    std::string to_text() const;
    void save_file(const std::string& path) const;

    bool operator==(const Schema& other) const;

private:
    std::vector<ColumnSpec> columns_;
};

}  // namespace mural
