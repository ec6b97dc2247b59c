#pragma once

#include "multilc/data.hpp"
#include "multilc/types.hpp"

#include <vector>

namespace multilc {

// Conditional response tables: phi[h] is T x C_h; row t is the category
// distribution of item h given low-level class t.
using ResponseProbs = std::vector<Matrix>;

// Structural parameters with class/group-class 1 as the fixed reference.
// Intercept-only levels carry omega/pi directly; covariate levels carry the
// logistic coefficients (alpha/gamma) from which probabilities are derived.
struct StructuralParams {
  int n_class_low = 1;        // T
  int n_class_high = 1;       // M
  Vector omega;               // M, intercept-only high level
  Matrix pi;                  // M x T rows summing to 1, intercept-only low level
  Matrix alpha;               // (M-1) x K*, row m-2 for group-class m
  std::vector<Matrix> gamma;  // M blocks of (T-1) x K, row t-2 for class t
};

struct Posteriors {
  double loglik = 0.0;
  Matrix pw;                  // J x M group memberships P(W=m | Y_j, Z)
  Matrix px_marginal;         // n x T unit memberships, marginal over W
  std::vector<Matrix> joint;  // M matrices of n x T: P(X=t, W=m | ...)
  Index first_degenerate_group = -1;  // group hitting zero likelihood, if any
};

// Per-unit log densities: b(i, t) = sum_h log phi[h](t, y(i, h)).
Matrix item_log_density(const IntMatrix& y, const ResponseProbs& phi);

// Multinomial logistic probabilities with implicit zero coefficients for the
// reference class: rows of the result are softmax([0, z_i'coeffs']).
// coeffs is (T-1) x K; an empty coeffs block means a single class.
Matrix multinomial_log_probs(const Matrix& design, const Matrix& coeffs);
Matrix multinomial_probs(const Matrix& design, const Matrix& coeffs);
// Single-row convenience used by tests and simulation.
Vector logistic_probs(const Matrix& coeffs, const Vector& z_row);

// Mixing probabilities evaluated over a dataset: group rows of log omega and,
// per group-class, unit rows of log pi. Intercept-only parameters broadcast.
struct MixingEval {
  Matrix log_omega;                // J x M (n x 1 ones pattern when ungrouped)
  std::vector<Matrix> log_pi;      // M matrices of n x T
};
MixingEval eval_mixing(const StructuralParams& sp, const Dataset& data);

// E-step posteriors and log-likelihood for the general multilevel model.
// Works for ungrouped data (each row its own group) and M = 1 alike.
Posteriors compute_posteriors(const Dataset& data, const ResponseProbs& phi,
                              const MixingEval& mix);
Posteriors compute_posteriors(const Dataset& data, const ResponseProbs& phi,
                              const StructuralParams& sp);

double multilevel_loglik(const Dataset& data, const ResponseProbs& phi,
                         const StructuralParams& sp);
double single_level_loglik(const Dataset& data, const ResponseProbs& phi,
                           const StructuralParams& sp);

// Validation helpers shared by engines and tests.
void check_response_probs(const ResponseProbs& phi, double tol = 1e-10);
void check_row_stochastic(const Matrix& m, double tol = 1e-10, const char* what = "matrix");

}  // namespace multilc
