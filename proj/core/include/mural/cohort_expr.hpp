#pragma once

#include <string>
#include <vector>

#include "mural/dataset.hpp"

namespace mural {

// Cohort selection mini-language: conjunctions of `column op literal`
// clauses joined by `&` (or `and`), with ops < <= > >= == != plus the unary
// forms `column missing` and `column observed`. Comparisons on masked cells
// are false. An expression of the form `@path` reads row ids from a file
// (one per line, '#' comments).
std::vector<RowIndex> select_cohort(const Dataset& d, const std::string& expr);

}  // namespace mural
