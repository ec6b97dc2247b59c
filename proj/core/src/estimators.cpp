#include "multilc/estimators.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include <Eigen/Eigenvalues>

namespace multilc {
namespace {

// Two-sided normal tail probability for a Wald statistic.
double wald_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

std::string display_name(const std::string& raw) {
  if (raw.size() >= 2 && raw.front() == '(' && raw.back() == ')') {
    return raw.substr(1, raw.size() - 2);
  }
  return raw;
}

// Sample means of the model-implied mixing probabilities: omega_m(z*_j)
// averaged over groups and pi_{t|m}(z_ij) averaged over units.
void model_implied_means(const Dataset& data, const StructuralParams& sp, Vector& omega_avg,
                         Matrix& pi_avg) {
  const MixingEval mix = eval_mixing(sp, data);
  omega_avg = mix.log_omega.array().exp().matrix().colwise().mean().transpose();
  pi_avg.resize(sp.n_class_high, sp.n_class_low);
  for (int m = 0; m < sp.n_class_high; ++m) {
    pi_avg.row(m) = mix.log_pi[static_cast<std::size_t>(m)].array().exp().matrix().colwise().mean();
  }
}

void build_coefficients(FitResult& fr) {
  const StructuralParams rep = to_logistic(fr.structural);
  const Vector theta = pack_structural(rep);
  const Index d = theta.size();
  const bool have_vcov = fr.vcov.rows() == d && d > 0;

  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(d));
  for (Index r = 0; r < rep.alpha.rows(); ++r) {
    for (Index c = 0; c < rep.alpha.cols(); ++c) {
      names.push_back("alpha(" + display_name(fr.z_high_names[static_cast<std::size_t>(c)]) +
                      "|G" + std::to_string(r + 2) + ")");
    }
  }
  const Index n_alpha = rep.alpha.size();
  for (std::size_t m = 0; m < rep.gamma.size(); ++m) {
    const Matrix& block = rep.gamma[m];
    for (Index r = 0; r < block.rows(); ++r) {
      for (Index c = 0; c < block.cols(); ++c) {
        std::string tail = "|C" + std::to_string(r + 2);
        if (fr.m > 1) tail += ",G" + std::to_string(m + 1);
        names.push_back("gamma(" + display_name(fr.z_low_names[static_cast<std::size_t>(c)]) +
                        tail + ")");
      }
    }
  }

  fr.alpha_coefs.clear();
  fr.gamma_coefs.clear();
  for (Index i = 0; i < d; ++i) {
    Coefficient co;
    co.name = names[static_cast<std::size_t>(i)];
    co.estimate = theta[i];
    const double var = have_vcov ? fr.vcov(i, i) : std::numeric_limits<double>::quiet_NaN();
    co.se = var >= 0.0 ? std::sqrt(var) : std::numeric_limits<double>::quiet_NaN();
    co.z = co.se > 0.0 ? co.estimate / co.se : std::numeric_limits<double>::quiet_NaN();
    co.p = std::isfinite(co.z) ? wald_p(co.z) : std::numeric_limits<double>::quiet_NaN();
    (i < n_alpha ? fr.alpha_coefs : fr.gamma_coefs).push_back(std::move(co));
  }
}

// Fills everything downstream of the final EM pass: implied probability
// means, information criteria, classification stats, and Wald inference.
void finalize_fit(FitResult& fr, const Dataset& sdata, const FitOptions& opts) {
  model_implied_means(sdata, fr.structural, fr.omega_avg, fr.pi_avg);
  const Index k_low = fr.low_covariates ? sdata.z_low.cols() : 1;
  const Index k_high = fr.high_covariates ? sdata.z_high.cols() : 1;
  const Index npar = count_free_parameters(fr.items, fr.t, fr.m, k_low, k_high);
  fr.n_units = sdata.n();
  fr.n_groups = sdata.grouped() ? sdata.n_groups() : 0;
  fr.ic = information_criteria(fr.trace.ll_last, npar, fr.n_units, fr.n_groups, fr.post);
  fr.cls = classification_stats(fr.post);
  if (opts.compute_vcov && (fr.t > 1 || fr.m > 1)) {
    VcovResult v = structural_vcov(sdata, fr.phi, fr.structural);
    fr.vcov = std::move(v.vcov);
    fr.vcov_pseudo_inverse = v.pseudo_inverse;
    build_coefficients(fr);
  }
}

// Shared specification bookkeeping for all estimators.
FitResult make_shell(const IngestResult& data, const FitOptions& opts) {
  const Dataset& sdata = data.structural;
  FitResult fr;
  fr.t = opts.n_class_low;
  fr.m = opts.n_class_high;
  fr.estimator = opts.estimator;
  fr.items = data.measurement.items;
  fr.z_low_names = sdata.z_low_names;
  fr.z_high_names = sdata.z_high_names;
  fr.group_labels = sdata.group_labels;
  fr.grouped = sdata.grouped();
  fr.low_covariates = sdata.has_low_covariates();
  fr.high_covariates = sdata.has_high_covariates();
  return fr;
}

}  // namespace

std::string estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::two_step: return "two_step";
    case EstimatorKind::one_step: return "one_step";
    case EstimatorKind::two_stage: return "two_stage";
  }
  throw InternalError("estimator_name: unknown kind");
}

EstimatorKind parse_estimator(const std::string& name) {
  if (name == "two_step") return EstimatorKind::two_step;
  if (name == "one_step") return EstimatorKind::one_step;
  if (name == "two_stage") return EstimatorKind::two_stage;
  throw InputError("unknown estimator '" + name + "' (expected one_step, two_step, or two_stage)");
}

Vector pack_structural(const StructuralParams& sp) {
  Index d = sp.alpha.size();
  for (const Matrix& g : sp.gamma) d += g.size();
  Vector theta(d);
  Index at = 0;
  for (Index r = 0; r < sp.alpha.rows(); ++r) {
    for (Index c = 0; c < sp.alpha.cols(); ++c) theta[at++] = sp.alpha(r, c);
  }
  for (const Matrix& g : sp.gamma) {
    for (Index r = 0; r < g.rows(); ++r) {
      for (Index c = 0; c < g.cols(); ++c) theta[at++] = g(r, c);
    }
  }
  return theta;
}

void unpack_structural(const Vector& theta, StructuralParams& sp) {
  Index d = sp.alpha.size();
  for (const Matrix& g : sp.gamma) d += g.size();
  if (theta.size() != d) throw InternalError("unpack_structural: length mismatch");
  Index at = 0;
  for (Index r = 0; r < sp.alpha.rows(); ++r) {
    for (Index c = 0; c < sp.alpha.cols(); ++c) sp.alpha(r, c) = theta[at++];
  }
  for (Matrix& g : sp.gamma) {
    for (Index r = 0; r < g.rows(); ++r) {
      for (Index c = 0; c < g.cols(); ++c) g(r, c) = theta[at++];
    }
  }
}

StructuralParams to_logistic(const StructuralParams& sp) {
  StructuralParams out = sp;
  const int m_count = sp.n_class_high;
  const int t_count = sp.n_class_low;
  if (m_count > 1 && out.alpha.rows() == 0) {
    if (static_cast<int>(sp.omega.size()) != m_count) {
      throw InternalError("to_logistic: omega size mismatch");
    }
    out.alpha = Matrix::Zero(m_count - 1, 1);
    for (int m = 1; m < m_count; ++m) out.alpha(m - 1, 0) = std::log(sp.omega[m] / sp.omega[0]);
    out.omega.resize(0);
  }
  if (t_count > 1 && out.gamma.empty()) {
    if (sp.pi.rows() != m_count || sp.pi.cols() != t_count) {
      throw InternalError("to_logistic: pi shape mismatch");
    }
    out.gamma.resize(static_cast<std::size_t>(m_count));
    for (int m = 0; m < m_count; ++m) {
      Matrix block = Matrix::Zero(t_count - 1, 1);
      for (int t = 1; t < t_count; ++t) block(t - 1, 0) = std::log(sp.pi(m, t) / sp.pi(m, 0));
      out.gamma[static_cast<std::size_t>(m)] = std::move(block);
    }
    out.pi.resize(0, 0);
  }
  return out;
}

Vector structural_score(const Dataset& data, const ResponseProbs& phi,
                        const StructuralParams& sp) {
  const Posteriors post = compute_posteriors(data, phi, sp);
  StructuralParams grads = sp;  // reuse the shapes for packing
  if (sp.alpha.rows() > 0) {
    grads.alpha = weighted_multinomial_score(data.z_high, post.pw, sp.alpha);
  }
  for (std::size_t m = 0; m < sp.gamma.size(); ++m) {
    grads.gamma[m] = weighted_multinomial_score(data.z_low, post.joint[m], sp.gamma[m]);
  }
  return pack_structural(grads);
}

VcovResult structural_vcov(const Dataset& data, const ResponseProbs& phi,
                           const StructuralParams& sp_in) {
  const StructuralParams sp = to_logistic(sp_in);
  const Vector theta = pack_structural(sp);
  const Index d = theta.size();
  VcovResult out;
  if (d == 0) {
    out.vcov.resize(0, 0);
    return out;
  }

  // Central finite differences of the analytic score give the observed
  // information; per-coordinate steps scale with the coefficient size.
  Matrix hess(d, d);
  StructuralParams work = sp;
  for (Index i = 0; i < d; ++i) {
    const double h = 1e-5 * (1.0 + std::abs(theta[i]));
    Vector shifted = theta;
    shifted[i] = theta[i] + h;
    unpack_structural(shifted, work);
    const Vector up = structural_score(data, phi, work);
    shifted[i] = theta[i] - h;
    unpack_structural(shifted, work);
    const Vector down = structural_score(data, phi, work);
    hess.col(i) = (up - down) / (2.0 * h);
  }
  const Matrix info = -0.5 * (hess + hess.transpose());

  Eigen::SelfAdjointEigenSolver<Matrix> es(info);
  if (es.info() != Eigen::Success) throw NumericalError("information matrix eigensolve failed");
  const Vector& ev = es.eigenvalues();
  const double cutoff = std::max(1.0, ev.cwiseAbs().maxCoeff()) * 1e-10;
  Vector inv = Vector::Zero(d);
  for (Index i = 0; i < d; ++i) {
    if (ev[i] > cutoff) {
      inv[i] = 1.0 / ev[i];
    } else {
      out.pseudo_inverse = true;  // singular information: drop the direction
    }
  }
  out.vcov = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
  return out;
}

FitResult fit_two_step(const IngestResult& data, const FitOptions& opts) {
  const Dataset& meas = data.measurement;
  const Dataset& sdata = data.structural;
  FitResult fr = make_shell(data, opts);

  const InitBundle bundle = init_measurement(meas, fr.t, fr.m, opts.seed, opts.em, opts.init);
  Vector omega1 = bundle.omega0;
  Matrix pi1 = bundle.pi0;
  if (fr.m == 1) {
    fr.phi = bundle.phi0;
    fr.trace_step1 = bundle.step1.trace;
  } else {
    const MultilevelMeasurementFit step1 =
        em_multilevel_measurement(meas, bundle.phi0, bundle.omega0, bundle.pi0, opts.em);
    fr.phi = step1.phi;
    fr.trace_step1 = step1.trace;
    omega1 = step1.omega;
    pi1 = step1.pi;
  }

  const StructuralParams sp0 = init_structural(omega1, pi1, sdata.z_low.cols(),
                                               sdata.z_high.cols(), fr.low_covariates,
                                               fr.high_covariates);
  StructuralFit step2 = em_structural(sdata, fr.phi, sp0, opts.em);
  fr.structural = std::move(step2.params);
  fr.post = std::move(step2.post);
  fr.trace = step2.trace;
  finalize_fit(fr, sdata, opts);
  return fr;
}

FitResult fit_one_step(const IngestResult& data, const FitOptions& opts) {
  const Dataset& meas = data.measurement;
  const Dataset& sdata = data.structural;
  FitResult fr = make_shell(data, opts);

  // Same starting point as the stepwise estimator, then one joint EM pass
  // that re-estimates the response probabilities alongside the coefficients.
  const InitBundle bundle = init_measurement(meas, fr.t, fr.m, opts.seed, opts.em, opts.init);
  ResponseProbs phi1 = bundle.phi0;
  Vector omega1 = bundle.omega0;
  Matrix pi1 = bundle.pi0;
  fr.trace_step1 = bundle.step1.trace;
  if (fr.m > 1) {
    const MultilevelMeasurementFit step1 =
        em_multilevel_measurement(meas, bundle.phi0, bundle.omega0, bundle.pi0, opts.em);
    phi1 = step1.phi;
    fr.trace_step1 = step1.trace;
    omega1 = step1.omega;
    pi1 = step1.pi;
  }

  const StructuralParams sp0 = init_structural(omega1, pi1, sdata.z_low.cols(),
                                               sdata.z_high.cols(), fr.low_covariates,
                                               fr.high_covariates);
  StructuralFit joint = em_one_step(sdata, phi1, sp0, opts.em);
  fr.phi = std::move(joint.phi);
  fr.structural = std::move(joint.params);
  fr.post = std::move(joint.post);
  fr.trace = joint.trace;
  finalize_fit(fr, sdata, opts);
  return fr;
}

FitResult fit_two_stage(const IngestResult& data, const FitOptions& opts) {
  const Dataset& meas = data.measurement;
  const Dataset& sdata = data.structural;
  FitResult fr = make_shell(data, opts);

  // Stage 1a: single-level measurement fit; phi stays fixed from here on.
  const InitBundle bundle = init_measurement(meas, fr.t, fr.m, opts.seed, opts.em, opts.init);
  fr.phi = bundle.phi0;
  fr.trace_step1 = bundle.step1.trace;

  Vector omega_s = bundle.omega0;
  Matrix pi_s = bundle.pi0;
  if (fr.m > 1) {
    // Stage 1b: class-membership model with phi fixed.
    EmFlags fix;
    fix.fix_phi = true;
    const MultilevelMeasurementFit s1b =
        em_multilevel_measurement(meas, fr.phi, bundle.omega0, bundle.pi0, opts.em, fix);
    omega_s = s1b.omega;
    pi_s = s1b.pi;
    if (opts.cross_level_interactions) {
      // Stage 1c: refit the conditional class memberships with the group
      // proportions held at their stage-1b values.
      fix.fix_omega = true;
      const MultilevelMeasurementFit s1c =
          em_multilevel_measurement(meas, fr.phi, omega_s, pi_s, opts.em, fix);
      pi_s = s1c.pi;
    }
  }

  const StructuralParams sp0 = init_structural(omega_s, pi_s, sdata.z_low.cols(),
                                               sdata.z_high.cols(), fr.low_covariates,
                                               fr.high_covariates);
  StructuralFit stage2 = em_structural(sdata, fr.phi, sp0, opts.em);
  fr.structural = std::move(stage2.params);
  fr.post = std::move(stage2.post);
  fr.trace = stage2.trace;
  finalize_fit(fr, sdata, opts);
  return fr;
}

FitResult fit_model(const IngestResult& data, const FitOptions& opts) {
  if (opts.n_class_low < 1) throw InputError("number of low-level classes must be at least 1");
  if (opts.n_class_high < 1) throw InputError("number of high-level classes must be at least 1");
  switch (opts.estimator) {
    case EstimatorKind::two_step: return fit_two_step(data, opts);
    case EstimatorKind::one_step: return fit_one_step(data, opts);
    case EstimatorKind::two_stage: return fit_two_stage(data, opts);
  }
  throw InternalError("fit_model: unknown estimator");
}

MeasurementCellFit fit_measurement_cell(const Dataset& measurement, int t, int m,
                                        std::uint64_t seed, const EmControl& em,
                                        const InitControl& init) {
  const InitBundle bundle = init_measurement(measurement, t, m, seed, em, init);
  MeasurementCellFit cell;
  cell.params.n_class_low = t;
  cell.params.n_class_high = m;
  if (m == 1) {
    cell.phi = bundle.phi0;
    cell.params.omega = bundle.omega0;
    cell.params.pi = bundle.pi0;
    cell.trace = bundle.step1.trace;
  } else {
    const MultilevelMeasurementFit fit =
        em_multilevel_measurement(measurement, bundle.phi0, bundle.omega0, bundle.pi0, em);
    cell.phi = fit.phi;
    cell.params.omega = fit.omega;
    cell.params.pi = fit.pi;
    cell.trace = fit.trace;
  }
  cell.post = compute_posteriors(measurement, cell.phi, cell.params);
  return cell;
}

}  // namespace multilc
