#include "multilc/init.hpp"

#include "multilc/aggregate.hpp"
#include "multilc/numerics.hpp"

#include <cmath>

namespace multilc {

Matrix one_hot_items(const IntMatrix& y, const std::vector<ItemSchema>& items) {
  const Index n = y.rows();
  Index width = 0;
  for (const auto& item : items) {
    width += item.n_categories() == 2 ? 1 : item.n_categories();
  }
  Matrix x = Matrix::Zero(n, width);
  Index col = 0;
  for (Index h = 0; h < y.cols(); ++h) {
    const int cats = items[static_cast<size_t>(h)].n_categories();
    if (cats == 2) {
      for (Index i = 0; i < n; ++i) x(i, col) = y(i, h) == 1 ? 1.0 : 0.0;
      ++col;
    } else {
      for (Index i = 0; i < n; ++i) x(i, col + y(i, h)) = 1.0;
      col += cats;
    }
  }
  return x;
}

namespace {

// Class-conditional item frequencies from a hard partition, floored so the
// first EM iteration sees no degenerate probabilities.
ResponseProbs phi_from_partition(const IntMatrix& y, const std::vector<ItemSchema>& items,
                                 const std::vector<int>& assign, int t_count, double floor) {
  const Index n = y.rows();
  ResponseProbs phi;
  phi.reserve(items.size());
  for (Index h = 0; h < y.cols(); ++h) {
    Matrix table = Matrix::Zero(t_count, items[static_cast<size_t>(h)].n_categories());
    for (Index i = 0; i < n; ++i) table(assign[static_cast<size_t>(i)], y(i, h)) += 1.0;
    for (Index t = 0; t < t_count; ++t) {
      Vector row = table.row(t).transpose();
      const double total = row.sum();
      row = total > 0.0 ? Vector(row / total) : Vector::Constant(row.size(), 1.0 / row.size());
      row = row.cwiseMax(floor).cwiseMin(1.0 - floor);
      table.row(t) = (row / row.sum()).transpose();
    }
    phi.push_back(std::move(table));
  }
  return phi;
}

Vector cluster_shares(const std::vector<int>& assign, int k, double floor) {
  Vector counts = Vector::Zero(k);
  for (int a : assign) counts[a] += 1.0;
  return floored_proportions(counts / static_cast<double>(assign.size()), floor);
}

}  // namespace

InitBundle init_measurement(const Dataset& data, int t, int m, std::uint64_t seed,
                            const EmControl& ctrl, const InitControl& ictrl) {
  if (t < 1) throw InputError("number of low-level classes must be >= 1");
  if (m < 1) throw InputError("number of high-level classes must be >= 1");
  if (m > 1 && !data.grouped()) throw InputError("M > 1 requires group ids");
  const Index n = data.n();

  InitBundle bundle;
  Rng rng = Rng::derive(seed, {static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(m)});

  // (a) Pooled clustering into T classes, then a single-level EM refinement.
  std::vector<int> assign(static_cast<size_t>(n), 0);
  if (t > 1) {
    if (ictrl.method == ClusterMethod::kmodes) {
      assign = kmodes(data.y, t, rng, ictrl.restarts).assign;
    } else {
      const Matrix scores = pca_scores(one_hot_items(data.y, data.items), ictrl.pca_threshold).scores;
      assign = kmeans(scores, t, rng, ictrl.restarts).assign;
    }
  }
  const ResponseProbs phi_start = phi_from_partition(data.y, data.items, assign, t, ictrl.floor);
  const Vector cp_start = cluster_shares(assign, t, ictrl.floor);

  bundle.step1 = em_single_measurement(data.y, phi_start, cp_start, ctrl);
  bundle.phi0 = bundle.step1.phi;
  bundle.class_probs0 = bundle.step1.class_probs;
  bundle.x_tilde = modal_assignments(bundle.step1.posterior);

  if (m == 1) {
    bundle.omega0 = Vector::Ones(1);
    bundle.pi0 = bundle.class_probs0.transpose();
    return bundle;
  }

  // (b) Aggregate unit posteriors within groups and cluster the J x T matrix.
  const Index j_count = data.n_groups();
  Matrix group_means = Matrix::Zero(j_count, t);
  for (Index j = 0; j < j_count; ++j) {
    const auto& rows = data.rows_by_group[static_cast<size_t>(j)];
    for (Index i : rows) group_means.row(j) += bundle.step1.posterior.row(i);
    group_means.row(j) /= static_cast<double>(rows.size());
  }
  bundle.w_tilde = kmeans(group_means, m, rng, ictrl.restarts).assign;

  // Defensive repair: split the largest cluster if any ended empty.
  {
    std::vector<int> sizes(static_cast<size_t>(m), 0);
    for (int w : bundle.w_tilde) ++sizes[static_cast<size_t>(w)];
    for (int c = 0; c < m; ++c) {
      if (sizes[static_cast<size_t>(c)] > 0) continue;
      int largest = 0;
      for (int d = 1; d < m; ++d) {
        if (sizes[static_cast<size_t>(d)] > sizes[static_cast<size_t>(largest)]) largest = d;
      }
      for (size_t j = 0; j < bundle.w_tilde.size(); ++j) {
        if (bundle.w_tilde[j] == largest) {
          bundle.w_tilde[j] = c;
          --sizes[static_cast<size_t>(largest)];
          ++sizes[static_cast<size_t>(c)];
          break;
        }
      }
    }
  }
  bundle.omega0 = cluster_shares(bundle.w_tilde, m, ictrl.floor);

  // (c) Cross-tabulate modal classes against group clusters; normalize within
  // each group-class so rows of pi0 are distributions over classes.
  Matrix counts = Matrix::Zero(m, t);
  for (Index i = 0; i < n; ++i) {
    const int w = bundle.w_tilde[static_cast<size_t>(data.group_of[static_cast<size_t>(i)])];
    counts(w, bundle.x_tilde[static_cast<size_t>(i)]) += 1.0;
  }
  bundle.pi0.resize(m, t);
  for (int g = 0; g < m; ++g) {
    Vector row = counts.row(g).transpose();
    if (row.sum() <= 0.0) {
      bundle.pi0.row(g).setConstant(1.0 / t);  // empty cross-tab column: uniform
      continue;
    }
    row /= row.sum();
    row = row.cwiseMax(ictrl.floor).cwiseMin(1.0 - ictrl.floor);
    bundle.pi0.row(g) = (row / row.sum()).transpose();
  }
  return bundle;
}

StructuralParams init_structural(const Vector& omega0, const Matrix& pi0, Index k_low,
                                 Index k_high, bool low_covariates, bool high_covariates) {
  StructuralParams sp;
  sp.n_class_high = static_cast<int>(omega0.size());
  sp.n_class_low = static_cast<int>(pi0.cols());

  if (high_covariates && sp.n_class_high > 1) {
    sp.alpha = Matrix::Zero(sp.n_class_high - 1, k_high);
    for (int g = 1; g < sp.n_class_high; ++g) {
      sp.alpha(g - 1, 0) = std::log(omega0[g] / omega0[0]);
    }
  } else {
    sp.omega = omega0;
  }

  if (low_covariates && sp.n_class_low > 1) {
    sp.gamma.assign(static_cast<size_t>(sp.n_class_high),
                    Matrix::Zero(sp.n_class_low - 1, k_low));
    for (int g = 0; g < sp.n_class_high; ++g) {
      for (int t = 1; t < sp.n_class_low; ++t) {
        sp.gamma[static_cast<size_t>(g)](t - 1, 0) = std::log(pi0(g, t) / pi0(g, 0));
      }
    }
  } else {
    sp.pi = pi0;
  }
  return sp;
}

std::vector<std::string> stage_plan_two_stage(int m, bool cross_level_interactions) {
  if (m <= 1) return {"1a", "2"};
  if (cross_level_interactions) return {"1a", "1b", "1c", "2"};
  return {"1a", "1b", "2"};
}

}  // namespace multilc
