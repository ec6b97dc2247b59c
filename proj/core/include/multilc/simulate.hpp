#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "multilc/data.hpp"
#include "multilc/model.hpp"

namespace multilc {

// Covariate generator for simulation: an independent draw per observation.
struct CovariateGen {
  enum class Kind { bernoulli, normal, fixed };
  std::string name;
  Kind kind = Kind::bernoulli;
  double p = 0.5;      // bernoulli success probability
  double mean = 0.0;   // normal location
  double sd = 1.0;     // normal scale
  double value = 0.0;  // fixed value
};

// A fully specified generating model. Structural coefficients are on the
// log-odds scale with the first class as reference; intercept-only levels use
// single-column alpha / gamma blocks. Design order is intercept first, then
// the declared covariates.
struct TrueModel {
  int t = 1;
  int m = 1;
  std::vector<ItemSchema> items;              // category labels double as CSV codes
  ResponseProbs phi;                          // per item: T x C_h, rows sum to 1
  Matrix alpha;                               // (M-1) x (1 + #group covariates)
  std::vector<Matrix> gamma;                  // M blocks: (T-1) x (1 + #covariates)
  std::vector<CovariateGen> covariates;       // unit-level
  std::vector<CovariateGen> group_covariates; // group-level
  std::string group_column = "group";         // empty: no group column emitted
};

// Simulated dataset plus the latent records behind it. `data` matches the
// ingest contract (strings, one row per unit); `latent` holds 1-based row,
// group label, and the drawn class indices at both levels.
struct SimResult {
  RawTable data;
  RawTable latent;
};

void validate_true_model(const TrueModel& truth);

// Draws J groups of the given sizes (recycled when fewer sizes than groups
// are supplied). Each group uses its own substream derived from (seed, j);
// within a group the draw order is: group covariates, the group class, then
// per unit its covariates, its class, and the items in declared order.
SimResult simulate_dataset(const TrueModel& truth, int j_groups,
                           const std::vector<int>& group_sizes, std::uint64_t seed);

}  // namespace multilc
