#pragma once

#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "mural/types.hpp"

namespace mural {

// Code used for masked entries in discretized output. Valid bins are >= 0.
inline constexpr std::int32_t kMissingCode = -1;

// Columnar mixed-type table with an explicit per-cell missing mask.
// Continuous columns store 64-bit reals, discrete columns small integer
// codes. Library operations treat datasets as immutable values; the setters
// exist for construction (loaders, generators, tests).
class Dataset {
public:
    Dataset() = default;
    Dataset(Schema schema, std::size_t n_rows);

    std::size_t n_rows() const { return n_rows_; }
    std::size_t n_cols() const { return schema_.n_cols(); }
    const Schema& schema() const { return schema_; }

    bool is_missing(std::size_t col, RowIndex row) const {
        return columns_[col].missing[static_cast<std::size_t>(row)] != 0;
    }
    double real(std::size_t col, RowIndex row) const {
        return columns_[col].reals[static_cast<std::size_t>(row)];
    }
    std::int32_t code(std::size_t col, RowIndex row) const {
        return columns_[col].codes[static_cast<std::size_t>(row)];
    }
    // Uniform numeric view: continuous value or discrete code as double.
    double numeric(std::size_t col, RowIndex row) const {
        const auto& c = columns_[col];
        return c.reals.empty() ? static_cast<double>(c.codes[static_cast<std::size_t>(row)])
                               : c.reals[static_cast<std::size_t>(row)];
    }

    void set_real(std::size_t col, RowIndex row, double value);
    void set_code(std::size_t col, RowIndex row, std::int32_t code);
    void set_missing(std::size_t col, RowIndex row);
    void clear_missing(std::size_t col, RowIndex row);

    std::size_t missing_count(std::size_t col) const;
    bool column_has_missing(std::size_t col) const { return missing_count(col) > 0; }
    std::span<const std::uint8_t> missing_mask(std::size_t col) const {
        return columns_[col].missing;
    }

    // Checks the stored invariants (finite observed continuous values,
    // discrete codes in range). Throws UserError naming the first bad cell.
    void validate() const;

    bool equals(const Dataset& other) const;

private:
    struct Column {
        std::vector<double> reals;        // continuous columns only
        std::vector<std::int32_t> codes;  // discrete columns only
        std::vector<std::uint8_t> missing;
    };

    Schema schema_;
    std::size_t n_rows_ = 0;
    std::vector<Column> columns_;
};

struct ColumnStandardization {
    bool scaled = false;         // column was shifted/scaled
    bool zero_variance = false;  // flagged and passed through unscaled
    double mean = 0.0;
    double stddev = 1.0;
};

struct StandardizationParams {
    std::vector<ColumnStandardization> columns;
};

// CSV ingestion (RFC-4180-style quoting). The header row must contain the
// schema's column names, in order or as a permutation. Cells equal to the
// column's missing token, "NA", or the empty string are masked.
Dataset load_csv(const Schema& schema, std::istream& in);
Dataset load_csv_file(const Schema& schema, const std::string& path);
void write_csv(const Dataset& d, std::ostream& out);
void write_csv_file(const Dataset& d, const std::string& path);

// Each continuous column is shifted/scaled to observed-entry mean 0 and unit
// sample variance. Zero-variance (or single-observation) columns pass
// through flagged. Discrete columns are untouched unless include_ordinal is
// set, which scales ordinal codes as well.
std::pair<Dataset, StandardizationParams> standardize(const Dataset& d,
                                                      bool include_ordinal = false);
// Applies previously computed parameters (out-of-sample rows).
Dataset apply_standardization(const Dataset& d, const StandardizationParams& params);

// ceil(log2(n)) + 1
std::int64_t sturges_bin_count(std::int64_t n);

// Equal-width binning over the observed range; the maximum observed value
// lands in the last bin; masked entries get kMissingCode.
std::vector<std::int32_t> discretize(std::span<const double> values,
                                     std::span<const std::uint8_t> mask,
                                     std::int32_t n_bins);
std::vector<std::int32_t> discretize_column(const Dataset& d, std::size_t col,
                                            std::int32_t n_bins);

}  // namespace mural
