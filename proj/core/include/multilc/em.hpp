#pragma once

#include "multilc/model.hpp"

#include <functional>
#include <limits>

namespace multilc {

struct EmControl {
  int max_iter = 1000;
  double tol = 1e-9;     // relative log-likelihood change |dll| / (1 + |ll|)
  int newton_steps = 1;  // damped Newton steps per logistic M-step
  double floor = 1e-6;   // probability floor applied after each M-step
  // Observer for progress reporting; called once per E-step with the
  // engine name, 1-based iteration, and the current log-likelihood.
  std::function<void(const char*, int, double)> on_iteration;
};

struct EmTrace {
  int iterations = 0;
  double ll_first = std::numeric_limits<double>::quiet_NaN();  // after first E-step
  double ll_last = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
};

struct EmFlags {
  bool fix_phi = false;    // hold response probabilities at their input values
  bool fix_omega = false;  // hold group-class proportions (or alpha) fixed
};

// Weighted multinomial logistic log-likelihood sum_i sum_t w(i,t) log p_t(z_i)
// and its analytic score with respect to the free coefficient rows t = 2..T.
double weighted_multinomial_loglik(const Matrix& z, const Matrix& w, const Matrix& coeffs);
Matrix weighted_multinomial_score(const Matrix& z, const Matrix& w, const Matrix& coeffs);

// Damped Newton ascent on the weighted multinomial log-likelihood: each step
// solves the full Newton system (ridge-regularized if singular) and halves the
// step until the objective does not decrease. With newton_steps = 1 this is a
// valid generalized-EM update: the objective never decreases.
Matrix mstep_logistic(const Matrix& z, const Matrix& w, Matrix coeffs, int newton_steps = 1);

// EM for the single-level measurement model (class proportions + phi);
// grouping, if any, is ignored. T = 1 is a closed form.
struct MeasurementFit {
  ResponseProbs phi;
  Vector class_probs;  // length T
  Matrix posterior;    // n x T
  double loglik = 0.0;
  EmTrace trace;
};
MeasurementFit em_single_measurement(const IntMatrix& y, const ResponseProbs& phi0,
                                     const Vector& class_probs0, const EmControl& ctrl);

// EM for the intercept-only multilevel measurement model (omega, pi, phi).
// M = 1 collapses to the single-level problem on grouped data.
struct MultilevelMeasurementFit {
  ResponseProbs phi;
  Vector omega;  // length M
  Matrix pi;     // M x T, rows sum to 1
  Posteriors post;
  EmTrace trace;
};
MultilevelMeasurementFit em_multilevel_measurement(const Dataset& data, const ResponseProbs& phi0,
                                                   const Vector& omega0, const Matrix& pi0,
                                                   const EmControl& ctrl,
                                                   const EmFlags& flags = {});

// EM over the structural parameters with the measurement model fixed.
// Covariate levels update by mstep_logistic; intercept-only levels update in
// closed form. The returned params carry whichever representation was free.
struct StructuralFit {
  StructuralParams params;
  ResponseProbs phi;  // input copy when fixed; re-estimated by em_one_step
  Posteriors post;
  EmTrace trace;
};
StructuralFit em_structural(const Dataset& data, const ResponseProbs& phi_fixed,
                            const StructuralParams& init, const EmControl& ctrl,
                            const EmFlags& flags = {});

// Joint EM over measurement and structural parameters (the one-step problem).
StructuralFit em_one_step(const Dataset& data, const ResponseProbs& phi0,
                          const StructuralParams& init, const EmControl& ctrl);

// Shared M-step pieces, exposed for tests.
void mstep_response_probs(const IntMatrix& y, const Matrix& weights, ResponseProbs& phi,
                          double floor);
Vector floored_proportions(const Vector& raw, double floor);

}  // namespace multilc
