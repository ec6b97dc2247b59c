#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "multilc/data.hpp"
#include "multilc/em.hpp"
#include "multilc/init.hpp"

namespace multilc {

// One evaluated (T, M) specification. Failed cells keep their grid position
// with converged = false and NaN statistics; they never win the comparison.
struct SelectionCell {
  int t = 1;
  int m = 1;
  int step = 0;  // sequential stage that produced the row (0 = simultaneous)
  double ll = 0.0;
  Index npar = 0;
  double bic_low = 0.0;
  double bic_high = 0.0;
  double aic = 0.0;
  double icl_bic_low = 0.0;
  double icl_bic_high = 0.0;
  bool converged = false;
  std::string error;  // diagnostic for failed cells
};

struct SelectionOptions {
  std::vector<int> t_grid;  // candidate low-level class counts
  std::vector<int> m_grid;  // candidate high-level class counts ({1} if empty)
  bool sequential = true;
  std::uint64_t seed = 1;
  int threads = 1;
  EmControl em;
  InitControl init;
};

struct SelectionResult {
  std::vector<SelectionCell> cells;  // evaluation order (stage, then grid)
  int best_t = 1;
  int best_m = 1;
  bool sequential = true;
};

// Model selection over class counts on the measurement part of the model.
// Sequential: pick T by low-level BIC among single-level fits, pick M by
// high-level BIC at that T, then re-pick T at the chosen M. Simultaneous:
// evaluate the full grid and take the low-level BIC minimum. Ties prefer
// smaller T, then smaller M. Cells are fitted from refined starts seeded by
// (T, M), so results do not depend on the worker count.
SelectionResult select_classes(const Dataset& measurement, const SelectionOptions& opts);

// The selection table as CSV (header + one row per evaluated cell).
std::string selection_table_csv(const SelectionResult& result);

// Parses "a" or "a:b" (inclusive, ascending) into a grid of class counts.
std::vector<int> parse_class_range(const std::string& text);

}  // namespace multilc
