#pragma once

#include "multilc/model.hpp"

#include <string>
#include <vector>

namespace multilc {

// Entropy decomposition of a posterior matrix (rows = units or groups).
// total_entropy is the summed row entropy; prior_entropy_total is
// count * H(mean posterior). r2 = 1 - total/prior, defined as 1 when the
// prior entropy vanishes (single class or degenerate prior).
struct LevelEntropy {
  double total_entropy = 0.0;
  double prior_entropy_total = 0.0;
  double r2 = 1.0;
  double class_err = 0.0;  // mean of (1 - row maximum)
};
LevelEntropy level_entropy(const Matrix& posterior);

struct InformationCriteria {
  Index npar = 0;
  double ll = 0.0;
  Index n = 0;  // low-level units behind the likelihood
  Index j = 0;  // groups (0 when ungrouped)
  double bic_low = 0.0;
  double bic_high = 0.0;  // NaN when ungrouped
  double aic = 0.0;
  double icl_bic_low = 0.0;
  double icl_bic_high = 0.0;
};

// Free-parameter count: per-item (C_h - 1) * T, plus (T-1) * M * K low-level
// and (M-1) * K* high-level coefficients. Intercept-only levels pass width 1.
Index count_free_parameters(const std::vector<ItemSchema>& items, int t, int m, Index k_low,
                            Index k_high);

InformationCriteria information_criteria(double ll, Index npar, Index n, Index j,
                                         const Posteriors& post);

struct ClassificationStats {
  double class_err_low = 0.0;
  double class_err_high = 0.0;
  double entropy_r2_low = 1.0;
  double entropy_r2_high = 1.0;
};
ClassificationStats classification_stats(const Posteriors& post);

// Column means of the unit posteriors restricted to one group's rows.
struct GroupProfile {
  std::string label;
  Vector mean_membership;  // length T, sums to 1
};
GroupProfile group_class_proportions(const Matrix& px_marginal, const Dataset& data,
                                     const std::string& label);

// Argmax per row; ties broken by the smallest index.
std::vector<int> modal_assignments(const Matrix& posterior);

}  // namespace multilc
