#include "multilc/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "multilc/numerics.hpp"

namespace multilc {

LevelEntropy level_entropy(const Matrix& posterior) {
  LevelEntropy out;
  const Index rows = posterior.rows();
  const Index k = posterior.cols();
  if (rows == 0 || k <= 1) return out;  // r2 = 1, errors 0 by convention
  double total = 0.0;
  double err = 0.0;
  for (Index i = 0; i < rows; ++i) {
    const Vector row = posterior.row(i).transpose();
    total += shannon_entropy(row);
    err += 1.0 - row.maxCoeff();
  }
  const Vector prior = posterior.colwise().mean().transpose();
  out.total_entropy = total;
  out.prior_entropy_total = static_cast<double>(rows) * shannon_entropy(prior);
  out.r2 = out.prior_entropy_total > 0.0 ? 1.0 - total / out.prior_entropy_total : 1.0;
  out.class_err = err / static_cast<double>(rows);
  return out;
}

Index count_free_parameters(const std::vector<ItemSchema>& items, int t, int m, Index k_low,
                            Index k_high) {
  Index npar = 0;
  for (const auto& item : items) npar += static_cast<Index>(item.n_categories() - 1) * t;
  npar += static_cast<Index>(t - 1) * m * k_low;
  npar += static_cast<Index>(m - 1) * k_high;
  return npar;
}

InformationCriteria information_criteria(double ll, Index npar, Index n, Index j,
                                         const Posteriors& post) {
  InformationCriteria ic;
  ic.npar = npar;
  ic.ll = ll;
  ic.n = n;
  ic.j = j;
  const double dn = static_cast<double>(npar);
  ic.bic_low = -2.0 * ll + dn * std::log(static_cast<double>(n));
  ic.bic_high = j > 0 ? -2.0 * ll + dn * std::log(static_cast<double>(j))
                      : std::numeric_limits<double>::quiet_NaN();
  ic.aic = -2.0 * ll + 2.0 * dn;
  const LevelEntropy low = level_entropy(post.px_marginal);
  const LevelEntropy high = level_entropy(post.pw);
  ic.icl_bic_low = ic.bic_low + 2.0 * low.total_entropy;
  ic.icl_bic_high = ic.bic_high + 2.0 * high.total_entropy;
  return ic;
}

ClassificationStats classification_stats(const Posteriors& post) {
  ClassificationStats out;
  const LevelEntropy low = level_entropy(post.px_marginal);
  const LevelEntropy high = level_entropy(post.pw);
  out.class_err_low = low.class_err;
  out.entropy_r2_low = low.r2;
  out.class_err_high = high.class_err;
  out.entropy_r2_high = high.r2;
  return out;
}

GroupProfile group_class_proportions(const Matrix& px_marginal, const Dataset& data,
                                     const std::string& label) {
  if (!data.grouped()) throw InputError("group profiles require grouped data");
  const auto it = std::find(data.group_labels.begin(), data.group_labels.end(), label);
  if (it == data.group_labels.end()) throw InputError("unknown group label '" + label + "'");
  const Index j = static_cast<Index>(it - data.group_labels.begin());
  const auto& rows = data.rows_by_group[static_cast<std::size_t>(j)];
  if (rows.empty()) throw InputError("group '" + label + "' has no rows");
  Vector mean = Vector::Zero(px_marginal.cols());
  for (const Index r : rows) mean += px_marginal.row(r).transpose();
  mean /= static_cast<double>(rows.size());
  return GroupProfile{label, std::move(mean)};
}

std::vector<int> modal_assignments(const Matrix& posterior) {
  std::vector<int> out(static_cast<std::size_t>(posterior.rows()));
  for (Index i = 0; i < posterior.rows(); ++i) {
    Index best = 0;
    for (Index t = 1; t < posterior.cols(); ++t)
      if (posterior(i, t) > posterior(i, best)) best = t;
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace multilc
