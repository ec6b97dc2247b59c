#pragma once

#include "multilc/rng.hpp"
#include "multilc/types.hpp"

#include <span>
#include <vector>

namespace multilc {

// log(sum(exp(x))) with the max subtracted before exponentiating, so inputs
// around -1000 survive where a naive evaluation underflows to -inf.
double log_sum_exp(std::span<const double> x);
double log_sum_exp(const Vector& x);

// Pairwise (cascade) summation; error grows O(log n) instead of O(n).
double pairwise_sum(std::span<const double> x);

// Entropy -sum(p log p) in nats, with 0 log 0 = 0. Expects a probability
// vector (entries in [0,1], summing to 1 within 1e-8).
double shannon_entropy(std::span<const double> p);
double shannon_entropy(const Vector& p);

struct PcaResult {
  Matrix scores;       // n x q projections onto the top-q eigenvectors
  int q = 0;           // retained dimension
  Vector eigenvalues;  // all p eigenvalues, descending
};

// Principal component scores of the column-centered data. The retained
// dimension is the larger of (a) the smallest q whose eigenvalues explain at
// least var_threshold of the total variance and (b) ceil(p/2). A zero-variance
// matrix yields all-zero scores with q = ceil(p/2).
PcaResult pca_scores(const Matrix& x, double var_threshold = 0.85);

struct Partition {
  std::vector<int> assign;  // per-row cluster in [0, k)
  Matrix centroids;         // k x p (modes cast to double for kmodes)
  double objective = 0.0;   // within-cluster sum of squares / Hamming total
};

// Lloyd k-means with squared Euclidean distance, k-means++ seeding, and the
// best of `restarts` runs kept. Empty clusters are repaired by reseeding from
// the point farthest from its centroid, so every returned cluster is nonempty.
Partition kmeans(const Matrix& x, int k, Rng& rng, int restarts = 10, int max_iter = 100);

// k-modes analogue for integer-coded categorical rows: Hamming distance,
// per-column modal updates (ties to the smallest code), same repair rule.
Partition kmodes(const IntMatrix& x, int k, Rng& rng, int restarts = 10, int max_iter = 100);

}  // namespace multilc
