#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mural/dataset.hpp"

namespace mural {

enum class MissingClass : std::uint8_t { Mnar = 0, Random = 1 };

struct MissingnessEvidence {
    std::size_t other_col = 0;
    double statistic = 0.0;
    double p_unadjusted = 1.0;
    bool chi_square = false;  // rank-sum otherwise
};

struct ColumnMissingness {
    std::size_t col = 0;
    std::size_t missing_count = 0;
    MissingClass classification = MissingClass::Random;
    double p_value = 1.0;  // Bonferroni-adjusted minimum over evidence
    bool insufficient_data = false;
    bool forced_by_hint = false;
    std::vector<MissingnessEvidence> evidence;
};

struct MissingnessProfile {
    double alpha = 0.05;
    std::vector<ColumnMissingness> columns;  // only columns with masked cells

    const ColumnMissingness* find(std::size_t col) const;
    bool is_mnar(std::size_t col) const;
    bool is_random(std::size_t col) const;

    std::string text_report(const Schema& schema) const;
    std::string json_report(const Schema& schema) const;
};

// Classifies every column with masked cells as MNAR or randomly missing by
// pairwise two-sample screens against every other column: rank-sum for
// continuous companions, chi-square on the missing/observed contingency for
// discrete ones. The column's p-value is the Bonferroni-adjusted minimum.
// Columns with fewer than 5 masked or 5 observed rows are classified by
// their schema hint (Auto falls back to Random) and flagged.
MissingnessProfile detect_mnar(const Dataset& d, double alpha = 0.05);

// Chained-equations single imputation of the Random-classified columns.
// Working values start at column means/modes; each cycle refits a depth-3
// tree per target column on all other columns and repredicts its masked
// cells. MNAR columns keep their masks.
Dataset impute_random_missing(const Dataset& d, const MissingnessProfile& profile,
                              int iterations = 5);

// Observed mean (continuous) / mode (discrete) fill of every masked cell.
Dataset mean_impute(const Dataset& d);

enum class Direction : std::uint8_t { Above = 0, Below = 1 };

// Masks cells strictly beyond the threshold in the given direction.
Dataset induce_mnar_threshold(const Dataset& d, std::size_t column, double threshold,
                              Direction direction);

// Masks floor(fraction * n_rows) distinct uniformly sampled rows.
Dataset induce_mcar(const Dataset& d, std::size_t column, double fraction, std::uint64_t seed);

// Masks the rows whose flag is nonzero (experiment harness helper for
// missingness rules driven by latent coordinates).
Dataset mask_rows(const Dataset& d, std::size_t column, const std::vector<std::uint8_t>& flags);

}  // namespace mural
