#pragma once

#include "multilc/em.hpp"
#include "multilc/model.hpp"
#include "multilc/rng.hpp"

#include <string>
#include <vector>

namespace multilc {

enum class ClusterMethod { kmeans, kmodes };

struct InitControl {
  ClusterMethod method = ClusterMethod::kmeans;
  int restarts = 10;
  double floor = 0.01;          // floor for cluster-derived probabilities
  double pca_threshold = 0.85;  // explained-variance rule for retained scores
};

// Refined starting values: pooled clustering -> single-level EM -> modal
// assignments -> group-level clustering -> cross-tabulated class shares.
struct InitBundle {
  ResponseProbs phi0;        // fitted single-level response probabilities
  Vector class_probs0;       // length T, from the single-level fit
  Vector omega0;             // length M, high-level cluster shares
  Matrix pi0;                // M x T, cross-tab of modal assignments
  std::vector<int> x_tilde;  // modal low-level class per unit
  std::vector<int> w_tilde;  // high-level cluster per group (empty if M = 1)
  MeasurementFit step1;      // the full single-level fit
};

// One-hot expansion of encoded items: binary items contribute their code-1
// indicator column; items with more categories contribute one column each.
Matrix one_hot_items(const IntMatrix& y, const std::vector<ItemSchema>& items);

// The initialization pipeline. Clustering runs on PCA scores of the one-hot
// items for kmeans and on the raw encoded items for kmodes; the group step
// clusters per-group mean posteriors (continuous), always with kmeans.
InitBundle init_measurement(const Dataset& data, int t, int m, std::uint64_t seed,
                            const EmControl& ctrl, const InitControl& ictrl = {});

// Structural starting values: intercepts from the log-odds of the step-1
// proportions, covariate coefficients at zero. Levels without covariates use
// the probability representation directly (closed-form EM updates).
StructuralParams init_structural(const Vector& omega0, const Matrix& pi0, Index k_low,
                                 Index k_high, bool low_covariates, bool high_covariates);

// Ordered stage list for the two-stage estimator. Stage 1c (group proportions
// held fixed) is scheduled only when cross-level interactions are declared.
std::vector<std::string> stage_plan_two_stage(int m, bool cross_level_interactions);

}  // namespace multilc
