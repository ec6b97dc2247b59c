#include "multilc/model.hpp"

#include "multilc/numerics.hpp"

#include <cmath>
#include <limits>

namespace multilc {

Matrix item_log_density(const IntMatrix& y, const ResponseProbs& phi) {
  const Index n = y.rows();
  const Index h_count = y.cols();
  if (static_cast<size_t>(h_count) != phi.size()) {
    throw InternalError("item_log_density: item count mismatch");
  }
  const Index t_count = phi.empty() ? 1 : phi[0].rows();

  // Log tables once per call; the gather loop is the hot path.
  std::vector<Matrix> log_phi(phi.size());
  for (size_t h = 0; h < phi.size(); ++h) log_phi[h] = phi[h].array().log();

  Matrix b = Matrix::Zero(n, t_count);
  for (Index h = 0; h < h_count; ++h) {
    const Matrix& lp = log_phi[static_cast<size_t>(h)];
    for (Index i = 0; i < n; ++i) {
      const int c = y(i, h);
      for (Index t = 0; t < t_count; ++t) b(i, t) += lp(t, c);
    }
  }
  return b;
}

Matrix multinomial_log_probs(const Matrix& design, const Matrix& coeffs) {
  const Index n = design.rows();
  const Index t_count = coeffs.rows() + 1;
  Matrix eta(n, t_count);
  eta.col(0).setZero();
  if (coeffs.rows() > 0) {
    if (coeffs.cols() != design.cols()) {
      throw InternalError("multinomial_log_probs: design/coefficient width mismatch");
    }
    eta.rightCols(t_count - 1) = design * coeffs.transpose();
  }
  for (Index i = 0; i < n; ++i) {
    const double lse = log_sum_exp(Vector(eta.row(i)));
    eta.row(i).array() -= lse;
  }
  return eta;
}

Matrix multinomial_probs(const Matrix& design, const Matrix& coeffs) {
  return multinomial_log_probs(design, coeffs).array().exp();
}

Vector logistic_probs(const Matrix& coeffs, const Vector& z_row) {
  Matrix design(1, z_row.size());
  design.row(0) = z_row.transpose();
  return multinomial_probs(design, coeffs).row(0).transpose();
}

namespace {

Vector safe_log(const Vector& v) {
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    out[i] = v[i] > 0.0 ? std::log(v[i]) : -std::numeric_limits<double>::infinity();
  }
  return out;
}

}  // namespace

MixingEval eval_mixing(const StructuralParams& sp, const Dataset& data) {
  const Index n = data.n();
  const int t_count = sp.n_class_low;
  const int m_count = sp.n_class_high;
  const Index j_count = data.grouped() ? data.n_groups() : n;

  MixingEval mix;

  if (m_count == 1) {
    mix.log_omega = Matrix::Zero(j_count, 1);
  } else if (sp.alpha.rows() > 0) {
    if (!data.grouped()) throw InputError("high-level classes require group ids");
    if (sp.alpha.rows() != m_count - 1) throw InternalError("eval_mixing: alpha row mismatch");
    mix.log_omega = multinomial_log_probs(data.z_high, sp.alpha);
  } else {
    if (static_cast<int>(sp.omega.size()) != m_count) {
      throw InternalError("eval_mixing: omega size mismatch");
    }
    mix.log_omega = safe_log(sp.omega).transpose().replicate(j_count, 1);
  }

  mix.log_pi.resize(static_cast<size_t>(m_count));
  const bool use_gamma = !sp.gamma.empty();
  if (use_gamma && static_cast<int>(sp.gamma.size()) != m_count) {
    throw InternalError("eval_mixing: gamma block count mismatch");
  }
  for (int m = 0; m < m_count; ++m) {
    if (t_count == 1) {
      mix.log_pi[static_cast<size_t>(m)] = Matrix::Zero(n, 1);
    } else if (use_gamma) {
      mix.log_pi[static_cast<size_t>(m)] =
          multinomial_log_probs(data.z_low, sp.gamma[static_cast<size_t>(m)]);
    } else {
      if (sp.pi.rows() != m_count || sp.pi.cols() != t_count) {
        throw InternalError("eval_mixing: pi shape mismatch");
      }
      mix.log_pi[static_cast<size_t>(m)] =
          safe_log(sp.pi.row(m).transpose()).transpose().replicate(n, 1);
    }
  }
  return mix;
}

Posteriors compute_posteriors(const Dataset& data, const ResponseProbs& phi,
                              const MixingEval& mix) {
  const Index n = data.n();
  const int m_count = static_cast<int>(mix.log_pi.size());
  const Index t_count = mix.log_pi.empty() ? 1 : mix.log_pi[0].cols();
  const bool grouped = data.grouped();
  const Index j_count = grouped ? data.n_groups() : n;
  if (mix.log_omega.rows() != j_count || mix.log_omega.cols() != m_count) {
    throw InternalError("compute_posteriors: mixing dimensions mismatch");
  }

  const Matrix b = item_log_density(data.y, phi);

  // s(i, m) = lse_t(log pi_m(i, t) + b(i, t)); a(j, m) accumulates group sums.
  Matrix s(n, m_count);
  std::vector<double> work(static_cast<size_t>(t_count));
  for (int m = 0; m < m_count; ++m) {
    const Matrix& lp = mix.log_pi[static_cast<size_t>(m)];
    for (Index i = 0; i < n; ++i) {
      for (Index t = 0; t < t_count; ++t) work[static_cast<size_t>(t)] = lp(i, t) + b(i, t);
      s(i, m) = log_sum_exp(std::span<const double>(work.data(), work.size()));
    }
  }

  Matrix a = mix.log_omega;
  if (grouped) {
    for (Index i = 0; i < n; ++i) a.row(data.group_of[static_cast<size_t>(i)]) += s.row(i);
  } else {
    a += s;
  }

  Posteriors post;
  post.pw.resize(j_count, m_count);
  Vector group_ll(j_count);
  for (Index j = 0; j < j_count; ++j) {
    const double lse = log_sum_exp(Vector(a.row(j)));
    group_ll[j] = lse;
    if (!std::isfinite(lse) && post.first_degenerate_group < 0) post.first_degenerate_group = j;
    post.pw.row(j) = (a.row(j).array() - lse).exp();
  }
  post.loglik =
      pairwise_sum(std::span<const double>(group_ll.data(), static_cast<size_t>(group_ll.size())));

  post.joint.resize(static_cast<size_t>(m_count));
  post.px_marginal = Matrix::Zero(n, t_count);
  for (int m = 0; m < m_count; ++m) {
    const Matrix& lp = mix.log_pi[static_cast<size_t>(m)];
    Matrix& jm = post.joint[static_cast<size_t>(m)];
    jm.resize(n, t_count);
    for (Index i = 0; i < n; ++i) {
      const Index j = grouped ? data.group_of[static_cast<size_t>(i)] : i;
      const double w = post.pw(j, m);
      for (Index t = 0; t < t_count; ++t) {
        jm(i, t) = w * std::exp(lp(i, t) + b(i, t) - s(i, m));
      }
    }
    post.px_marginal += jm;
  }
  return post;
}

Posteriors compute_posteriors(const Dataset& data, const ResponseProbs& phi,
                              const StructuralParams& sp) {
  return compute_posteriors(data, phi, eval_mixing(sp, data));
}

double multilevel_loglik(const Dataset& data, const ResponseProbs& phi,
                         const StructuralParams& sp) {
  return compute_posteriors(data, phi, sp).loglik;
}

double single_level_loglik(const Dataset& data, const ResponseProbs& phi,
                           const StructuralParams& sp) {
  if (sp.n_class_high != 1) throw InputError("single_level_loglik: M must be 1");
  // Grouping is irrelevant when M = 1; evaluate on an ungrouped view so the
  // result is identical whether or not group ids are attached.
  if (!data.grouped()) return multilevel_loglik(data, phi, sp);
  Dataset flat = data;
  flat.group_of.clear();
  flat.group_labels.clear();
  flat.rows_by_group.clear();
  return multilevel_loglik(flat, phi, sp);
}

void check_response_probs(const ResponseProbs& phi, double tol) {
  for (const auto& table : phi) {
    for (Index t = 0; t < table.rows(); ++t) {
      if (std::abs(table.row(t).sum() - 1.0) > tol) {
        throw InternalError("response probability row does not sum to 1");
      }
      if ((table.row(t).array() < 0.0).any()) {
        throw InternalError("negative response probability");
      }
    }
  }
}

void check_row_stochastic(const Matrix& m, double tol, const char* what) {
  for (Index r = 0; r < m.rows(); ++r) {
    if (std::abs(m.row(r).sum() - 1.0) > tol) {
      throw InternalError(std::string(what) + ": row does not sum to 1");
    }
    if ((m.row(r).array() < 0.0).any()) {
      throw InternalError(std::string(what) + ": negative entry");
    }
  }
}

}  // namespace multilc
