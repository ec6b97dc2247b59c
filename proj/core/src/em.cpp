#include "multilc/em.hpp"

#include "multilc/numerics.hpp"

#include <cmath>
#include <string>

namespace multilc {

namespace {

constexpr double kMonotoneSlack = 1e-8;

// Convergence bookkeeping shared by every engine: enforces monotonicity,
// records the trace, and reports convergence of the ll sequence.
class LlMonitor {
 public:
  explicit LlMonitor(const EmControl& ctrl, const char* engine)
      : ctrl_(ctrl), engine_(engine) {}

  // Returns true when the sequence has converged. Call once per E-step.
  bool observe(double ll) {
    if (!std::isfinite(ll)) {
      throw NumericalError(std::string(engine_) + ": log-likelihood is not finite "
                           "(zero-likelihood pattern; see degenerate-group diagnostic)");
    }
    ++trace_.iterations;
    if (ctrl_.on_iteration) ctrl_.on_iteration(engine_, trace_.iterations, ll);
    if (trace_.iterations == 1) {
      trace_.ll_first = ll;
    } else {
      if (ll < prev_ - kMonotoneSlack) {
        throw InternalError(std::string(engine_) + ": log-likelihood decreased from " +
                            std::to_string(prev_) + " to " + std::to_string(ll));
      }
      if (std::abs(ll - prev_) / (1.0 + std::abs(ll)) < ctrl_.tol) {
        trace_.converged = true;
      }
    }
    prev_ = ll;
    trace_.ll_last = ll;
    return trace_.converged;
  }

  EmTrace trace() const { return trace_; }

 private:
  const EmControl& ctrl_;
  const char* engine_;
  EmTrace trace_;
  double prev_ = 0.0;
};

}  // namespace

Vector floored_proportions(const Vector& raw, double floor) {
  Vector out = raw.cwiseMax(floor);
  const double total = out.sum();
  if (!(total > 0.0)) throw NumericalError("degenerate proportion vector");
  return out / total;
}

void mstep_response_probs(const IntMatrix& y, const Matrix& weights, ResponseProbs& phi,
                          double floor) {
  const Index n = y.rows();
  const Index t_count = weights.cols();
  for (Index h = 0; h < y.cols(); ++h) {
    Matrix& table = phi[static_cast<size_t>(h)];
    table.setZero();
    for (Index i = 0; i < n; ++i) {
      table.col(y(i, h)) += weights.row(i).transpose();
    }
    for (Index t = 0; t < t_count; ++t) {
      table.row(t) = floored_proportions(table.row(t).transpose(), floor).transpose();
    }
  }
}

double weighted_multinomial_loglik(const Matrix& z, const Matrix& w, const Matrix& coeffs) {
  const Matrix log_p = multinomial_log_probs(z, coeffs);
  return (w.array() * log_p.array()).sum();
}

Matrix weighted_multinomial_score(const Matrix& z, const Matrix& w, const Matrix& coeffs) {
  const Matrix p = multinomial_probs(z, coeffs);
  const Vector r = w.rowwise().sum();
  // residual(i, t) = w(i, t) - r_i p(i, t); score_t = sum_i residual(i, t) z_i
  const Matrix resid = w - (p.array().colwise() * r.array()).matrix();
  return resid.rightCols(coeffs.rows()).transpose() * z;
}

namespace {

// Negative Hessian (observed information) of the weighted multinomial
// log-likelihood; block (t, s) = sum_i r_i p_it (delta_ts - p_is) z_i z_i'.
Matrix weighted_multinomial_information(const Matrix& z, const Vector& r, const Matrix& p) {
  const Index k = z.cols();
  const Index tm1 = p.cols() - 1;
  Matrix info(tm1 * k, tm1 * k);
  for (Index a = 0; a < tm1; ++a) {
    for (Index b = a; b < tm1; ++b) {
      const Vector wts =
          (r.array() * p.col(a + 1).array() * ((a == b ? 1.0 : 0.0) - p.col(b + 1).array()))
              .matrix();
      const Matrix block = z.transpose() * wts.asDiagonal() * z;
      info.block(a * k, b * k, k, k) = block;
      if (b != a) info.block(b * k, a * k, k, k) = block.transpose();
    }
  }
  return info;
}

}  // namespace

Matrix mstep_logistic(const Matrix& z, const Matrix& w, Matrix coeffs, int newton_steps) {
  if (coeffs.rows() == 0) return coeffs;  // single class: nothing to estimate
  const Index k = z.cols();
  const Index tm1 = coeffs.rows();

  for (int step = 0; step < newton_steps; ++step) {
    const Matrix p = multinomial_probs(z, coeffs);
    const Vector r = w.rowwise().sum();
    const Matrix resid = w - (p.array().colwise() * r.array()).matrix();
    const Matrix score = resid.rightCols(tm1).transpose() * z;
    Matrix info = weighted_multinomial_information(z, r, p);

    Vector score_vec(tm1 * k);
    for (Index t = 0; t < tm1; ++t) score_vec.segment(t * k, k) = score.row(t).transpose();

    // Solve info * delta = score, escalating ridge regularization as needed.
    Vector delta;
    double ridge = 0.0;
    for (int attempt = 0;; ++attempt) {
      Matrix reg = info;
      if (ridge > 0.0) reg.diagonal().array() += ridge;
      Eigen::LDLT<Matrix> ldlt(reg);
      if (ldlt.info() == Eigen::Success) {
        delta = ldlt.solve(score_vec);
        if (delta.allFinite()) break;
      }
      if (attempt >= 8) {
        throw NumericalError("logistic M-step: information matrix is singular "
                             "beyond ridge repair (convergence error)");
      }
      ridge = ridge == 0.0 ? 1e-8 : ridge * 10.0;
    }

    // Step-halving: accept only if the objective does not decrease. Falling
    // back to the current point keeps the generalized-EM guarantee.
    const double q0 = weighted_multinomial_loglik(z, w, coeffs);
    Matrix direction(tm1, k);
    for (Index t = 0; t < tm1; ++t) direction.row(t) = delta.segment(t * k, k).transpose();
    bool accepted = false;
    double scale = 1.0;
    for (int half = 0; half < 40; ++half) {
      const Matrix candidate = coeffs + scale * direction;
      if (weighted_multinomial_loglik(z, w, candidate) >= q0) {
        coeffs = candidate;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) break;  // already at (numerical) optimum along this direction
  }
  return coeffs;
}

MeasurementFit em_single_measurement(const IntMatrix& y, const ResponseProbs& phi0,
                                     const Vector& class_probs0, const EmControl& ctrl) {
  const Index n = y.rows();
  const Index t_count = class_probs0.size();
  if (n == 0) throw InputError("em_single_measurement: empty data");

  MeasurementFit fit;
  fit.phi = phi0;
  fit.class_probs = class_probs0;

  if (t_count == 1) {
    // Closed form: phi = observed category frequencies; one evaluation.
    fit.posterior = Matrix::Ones(n, 1);
    mstep_response_probs(y, fit.posterior, fit.phi, ctrl.floor);
    const Matrix b = item_log_density(y, fit.phi);
    fit.loglik = pairwise_sum(std::span<const double>(b.data(), static_cast<size_t>(n)));
    fit.trace.iterations = 1;
    fit.trace.ll_first = fit.trace.ll_last = fit.loglik;
    fit.trace.converged = true;
    return fit;
  }

  LlMonitor monitor(ctrl, "em_single_measurement");
  Vector row_ll(n);
  for (int iter = 0; iter < ctrl.max_iter; ++iter) {
    // E-step in the log domain.
    Matrix lp = item_log_density(y, fit.phi);
    const Vector log_cp = fit.class_probs.array().log();
    lp.rowwise() += log_cp.transpose();
    for (Index i = 0; i < n; ++i) {
      const double lse = log_sum_exp(Vector(lp.row(i)));
      row_ll[i] = lse;
      lp.row(i) = (lp.row(i).array() - lse).exp();
    }
    fit.posterior = std::move(lp);
    fit.loglik =
        pairwise_sum(std::span<const double>(row_ll.data(), static_cast<size_t>(n)));
    if (monitor.observe(fit.loglik)) break;

    // M-step.
    fit.class_probs = floored_proportions(fit.posterior.colwise().mean(), ctrl.floor);
    mstep_response_probs(y, fit.posterior, fit.phi, ctrl.floor);
  }
  fit.trace = monitor.trace();
  return fit;
}

namespace {

// Core loop shared by the multilevel engines. The free parameters are chosen
// by representation: gamma/alpha blocks when present, omega/pi otherwise.
StructuralFit em_multilevel_impl(const Dataset& data, ResponseProbs phi, StructuralParams sp,
                                 const EmControl& ctrl, const EmFlags& flags,
                                 const char* engine) {
  const int t_count = sp.n_class_low;
  const int m_count = sp.n_class_high;
  const bool use_gamma = !sp.gamma.empty() && t_count > 1;
  const bool use_alpha = sp.alpha.rows() > 0 && m_count > 1;
  if (m_count > 1 && !data.grouped()) {
    throw InputError(std::string(engine) + ": M > 1 requires group ids");
  }

  StructuralFit fit;
  LlMonitor monitor(ctrl, engine);
  for (int iter = 0; iter < ctrl.max_iter; ++iter) {
    fit.post = compute_posteriors(data, phi, sp);
    if (!std::isfinite(fit.post.loglik) && fit.post.first_degenerate_group >= 0) {
      throw NumericalError(std::string(engine) + ": zero likelihood in group " +
                           std::to_string(fit.post.first_degenerate_group + 1));
    }
    if (monitor.observe(fit.post.loglik)) break;

    // M-step: high level.
    if (!flags.fix_omega && m_count > 1) {
      if (use_alpha) {
        sp.alpha = mstep_logistic(data.z_high, fit.post.pw, sp.alpha, ctrl.newton_steps);
      } else {
        sp.omega = floored_proportions(fit.post.pw.colwise().mean(), ctrl.floor);
      }
    }
    // M-step: low level.
    if (t_count > 1) {
      if (use_gamma) {
        for (int m = 0; m < m_count; ++m) {
          sp.gamma[static_cast<size_t>(m)] =
              mstep_logistic(data.z_low, fit.post.joint[static_cast<size_t>(m)],
                             sp.gamma[static_cast<size_t>(m)], ctrl.newton_steps);
        }
      } else {
        for (int m = 0; m < m_count; ++m) {
          const Matrix& jm = fit.post.joint[static_cast<size_t>(m)];
          sp.pi.row(m) =
              floored_proportions(jm.colwise().sum().transpose(), ctrl.floor).transpose();
        }
      }
    }
    // M-step: measurement.
    if (!flags.fix_phi) {
      mstep_response_probs(data.y, fit.post.px_marginal, phi, ctrl.floor);
    }
  }
  fit.trace = monitor.trace();
  fit.params = std::move(sp);
  fit.phi = std::move(phi);
  return fit;
}

}  // namespace

MultilevelMeasurementFit em_multilevel_measurement(const Dataset& data, const ResponseProbs& phi0,
                                                   const Vector& omega0, const Matrix& pi0,
                                                   const EmControl& ctrl, const EmFlags& flags) {
  StructuralParams sp;
  sp.n_class_high = static_cast<int>(omega0.size());
  sp.n_class_low = static_cast<int>(pi0.cols());
  sp.omega = omega0;
  sp.pi = pi0;
  if (pi0.rows() != sp.n_class_high) {
    throw InputError("em_multilevel_measurement: pi/omega dimensions disagree");
  }

  StructuralFit fit =
      em_multilevel_impl(data, phi0, std::move(sp), ctrl, flags, "em_multilevel_measurement");

  MultilevelMeasurementFit out;
  out.phi = std::move(fit.phi);
  out.omega = std::move(fit.params.omega);
  out.pi = std::move(fit.params.pi);
  out.post = std::move(fit.post);
  out.trace = fit.trace;
  return out;
}

StructuralFit em_structural(const Dataset& data, const ResponseProbs& phi_fixed,
                            const StructuralParams& init, const EmControl& ctrl,
                            const EmFlags& flags) {
  EmFlags f = flags;
  f.fix_phi = true;
  return em_multilevel_impl(data, phi_fixed, init, ctrl, f, "em_structural");
}

StructuralFit em_one_step(const Dataset& data, const ResponseProbs& phi0,
                          const StructuralParams& init, const EmControl& ctrl) {
  return em_multilevel_impl(data, phi0, init, ctrl, EmFlags{}, "em_one_step");
}

}  // namespace multilc
