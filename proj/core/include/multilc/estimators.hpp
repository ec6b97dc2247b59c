#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "multilc/aggregate.hpp"
#include "multilc/data.hpp"
#include "multilc/em.hpp"
#include "multilc/init.hpp"
#include "multilc/model.hpp"

namespace multilc {

enum class EstimatorKind { two_step, one_step, two_stage };

std::string estimator_name(EstimatorKind kind);
EstimatorKind parse_estimator(const std::string& name);

struct FitOptions {
  int n_class_low = 2;
  int n_class_high = 1;
  EstimatorKind estimator = EstimatorKind::two_step;
  std::uint64_t seed = 1;
  EmControl em;
  InitControl init;
  // Schedules the extra class-membership refit with fixed group proportions
  // before the structural step of the stagewise estimator.
  bool cross_level_interactions = false;
  bool compute_vcov = true;
};

// One estimated coefficient with its Wald inference.
struct Coefficient {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p = 1.0;
};

struct FitResult {
  // Specification.
  int t = 1;
  int m = 1;
  EstimatorKind estimator = EstimatorKind::two_step;
  std::vector<ItemSchema> items;
  std::vector<std::string> z_low_names;   // includes leading intercept name
  std::vector<std::string> z_high_names;  // includes leading intercept name
  std::vector<std::string> group_labels;
  bool grouped = false;
  bool low_covariates = false;
  bool high_covariates = false;
  Index n_units = 0;  // rows behind the reported log-likelihood
  Index n_groups = 0;

  // Parameters. `structural` holds the representation that was estimated;
  // `alpha` / `gamma` inside it are the logistic coefficients when the level
  // has covariates and empty otherwise (probabilities are then in omega/pi).
  ResponseProbs phi;
  StructuralParams structural;
  Vector omega_avg;  // length M: sample mean of model-implied group-class probs
  Matrix pi_avg;     // M x T: sample mean of model-implied class probs given W

  // Estimation traces. `trace` is the final (structural or joint) pass;
  // `trace_step1` is the measurement pass that produced phi.
  EmTrace trace;
  EmTrace trace_step1;

  // Posteriors on the estimation sample and derived statistics.
  Posteriors post;
  InformationCriteria ic;
  ClassificationStats cls;

  // Wald inference for the structural coefficients (log-odds scale, ordered
  // alpha block then gamma blocks). Empty when compute_vcov is off or the
  // model has no structural coefficients.
  Matrix vcov;
  bool vcov_pseudo_inverse = false;
  std::vector<Coefficient> alpha_coefs;
  std::vector<Coefficient> gamma_coefs;
};

// Flattened structural coefficient vector: alpha rows (class 2..M) first,
// then per-group-class gamma blocks (rows class 2..T), each row-major.
Vector pack_structural(const StructuralParams& sp);
void unpack_structural(const Vector& theta, StructuralParams& sp);

// Rewrites intercept-only levels into their logistic representation so every
// free structural parameter is a coefficient; probabilities are unchanged.
StructuralParams to_logistic(const StructuralParams& sp);

// Analytic score of the log-likelihood in theta (phi held fixed), evaluated
// via one posterior pass. Ordering matches pack_structural.
Vector structural_score(const Dataset& data, const ResponseProbs& phi,
                        const StructuralParams& sp);

struct VcovResult {
  Matrix vcov;
  bool pseudo_inverse = false;
};

// Observed-information variance of the structural coefficients: central
// finite differences of the analytic score, inverted (pseudo-inverse with a
// warning flag when the information matrix is singular).
VcovResult structural_vcov(const Dataset& data, const ResponseProbs& phi,
                           const StructuralParams& sp);

FitResult fit_two_step(const IngestResult& data, const FitOptions& opts);
FitResult fit_one_step(const IngestResult& data, const FitOptions& opts);
FitResult fit_two_stage(const IngestResult& data, const FitOptions& opts);
FitResult fit_model(const IngestResult& data, const FitOptions& opts);

// Measurement-only fit of one (T, M) cell, as used by model selection.
struct MeasurementCellFit {
  ResponseProbs phi;
  StructuralParams params;  // probability representation
  Posteriors post;
  EmTrace trace;
};
MeasurementCellFit fit_measurement_cell(const Dataset& measurement, int t, int m,
                                        std::uint64_t seed, const EmControl& em,
                                        const InitControl& init);

}  // namespace multilc
