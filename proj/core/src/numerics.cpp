#include "multilc/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace multilc {

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(m)) return m;  // all -inf, or a stray +inf/nan propagates
  double acc = 0.0;
  for (double v : x) acc += std::exp(v - m);
  return m + std::log(acc);
}

double log_sum_exp(const Vector& x) {
  return log_sum_exp(std::span<const double>(x.data(), static_cast<size_t>(x.size())));
}

double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 8) {
    double acc = 0.0;
    for (double v : x) acc += v;
    return acc;
  }
  const size_t half = x.size() / 2;
  return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

double shannon_entropy(std::span<const double> p) {
  double total = 0.0;
  double h = 0.0;
  for (double v : p) {
    if (v < -1e-12 || v > 1.0 + 1e-12) {
      throw InternalError("shannon_entropy: entry outside [0, 1]");
    }
    total += v;
    if (v > 0.0) h -= v * std::log(v);
  }
  if (std::abs(total - 1.0) > 1e-8) {
    throw InternalError("shannon_entropy: probabilities do not sum to 1");
  }
  return h;
}

double shannon_entropy(const Vector& p) {
  return shannon_entropy(std::span<const double>(p.data(), static_cast<size_t>(p.size())));
}

PcaResult pca_scores(const Matrix& x, double var_threshold) {
  const Index n = x.rows();
  const Index p = x.cols();
  if (n < 2) throw InputError("pca_scores: need at least two rows");
  if (p < 1) throw InputError("pca_scores: need at least one column");
  if (!(var_threshold > 0.0 && var_threshold <= 1.0)) {
    throw InputError("pca_scores: variance threshold must be in (0, 1]");
  }

  const Matrix centered = x.rowwise() - x.colwise().mean();
  const Matrix cov = centered.adjoint() * centered / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  if (es.info() != Eigen::Success) throw NumericalError("pca_scores: eigendecomposition failed");

  // Eigen returns ascending order; flip to descending and clamp the tiny
  // negative eigenvalues that round-off can produce.
  Vector evals = es.eigenvalues().reverse();
  Matrix evecs = es.eigenvectors().rowwise().reverse();
  for (Index i = 0; i < evals.size(); ++i) evals[i] = std::max(evals[i], 0.0);

  // Fix the sign so each eigenvector's largest-magnitude entry is positive;
  // removes the solver's sign ambiguity from downstream clustering.
  for (Index j = 0; j < evecs.cols(); ++j) {
    Index imax = 0;
    evecs.col(j).cwiseAbs().maxCoeff(&imax);
    if (evecs(imax, j) < 0.0) evecs.col(j) = -evecs.col(j);
  }

  const int q_half = static_cast<int>((p + 1) / 2);
  const double total = evals.sum();

  PcaResult out;
  out.eigenvalues = evals;
  if (total <= p * 1e-14) {
    // No variance anywhere: projections are all zero in any basis.
    out.q = q_half;
    out.scores = Matrix::Zero(n, out.q);
    return out;
  }

  int q_var = static_cast<int>(p);
  double cum = 0.0;
  for (Index i = 0; i < p; ++i) {
    cum += evals[i];
    if (cum / total >= var_threshold - 1e-12) {
      q_var = static_cast<int>(i + 1);
      break;
    }
  }

  out.q = std::max(q_var, q_half);
  out.scores = centered * evecs.leftCols(out.q);
  return out;
}

namespace {

// Squared Euclidean distance from each row of x to the given centroid.
double sq_dist(const Matrix& x, Index row, const Matrix& centroids, Index c) {
  return (x.row(row) - centroids.row(c)).squaredNorm();
}

int hamming(const IntMatrix& x, Index row, const IntMatrix& modes, Index c) {
  int d = 0;
  for (Index j = 0; j < x.cols(); ++j) d += (x(row, j) != modes(c, j)) ? 1 : 0;
  return d;
}

// Moves the point farthest from its centroid into each empty cluster, never
// draining a cluster below one member. Returns true if anything moved.
template <typename DistFn>
bool repair_empty(std::vector<int>& assign, int k, std::vector<int>& sizes, DistFn&& dist) {
  bool moved = false;
  for (int c = 0; c < k; ++c) {
    if (sizes[c] > 0) continue;
    int best_row = -1;
    double best_d = -1.0;
    for (size_t i = 0; i < assign.size(); ++i) {
      if (sizes[assign[i]] < 2) continue;
      const double d = dist(static_cast<Index>(i));
      if (d > best_d) {
        best_d = d;
        best_row = static_cast<int>(i);
      }
    }
    if (best_row < 0) throw InternalError("cluster repair found no donor");
    --sizes[assign[best_row]];
    assign[best_row] = c;
    ++sizes[c];
    moved = true;
  }
  return moved;
}

}  // namespace

Partition kmeans(const Matrix& x, int k, Rng& rng, int restarts, int max_iter) {
  const Index n = x.rows();
  const Index p = x.cols();
  if (k < 1) throw InputError("kmeans: k must be positive");
  if (k > n) throw InputError("kmeans: more clusters than rows");
  if (restarts < 1) throw InputError("kmeans: need at least one restart");

  Partition best;
  best.objective = std::numeric_limits<double>::infinity();

  for (int r = 0; r < restarts; ++r) {
    // k-means++ seeding: first centroid uniform, then proportional to the
    // squared distance to the nearest chosen centroid.
    Matrix centroids(k, p);
    centroids.row(0) = x.row(rng.uniform_int(static_cast<int>(n)));
    Vector d2 = (x.rowwise() - centroids.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < k; ++c) {
      Index pick;
      if (d2.sum() > 0.0) {
        pick = rng.categorical(d2);
      } else {
        pick = rng.uniform_int(static_cast<int>(n));
      }
      centroids.row(c) = x.row(pick);
      d2 = d2.cwiseMin((x.rowwise() - centroids.row(c)).rowwise().squaredNorm());
    }

    std::vector<int> assign(n, -1);
    std::vector<int> sizes(k, 0);
    for (int iter = 0; iter < max_iter; ++iter) {
      bool changed = false;
      std::fill(sizes.begin(), sizes.end(), 0);
      for (Index i = 0; i < n; ++i) {
        int arg = 0;
        double dmin = sq_dist(x, i, centroids, 0);
        for (int c = 1; c < k; ++c) {
          const double d = sq_dist(x, i, centroids, c);
          if (d < dmin) {
            dmin = d;
            arg = c;
          }
        }
        if (assign[i] != arg) {
          assign[i] = arg;
          changed = true;
        }
        ++sizes[arg];
      }
      changed |= repair_empty(assign, k, sizes,
                              [&](Index i) { return sq_dist(x, i, centroids, assign[i]); });
      if (!changed && iter > 0) break;

      centroids.setZero();
      for (Index i = 0; i < n; ++i) centroids.row(assign[i]) += x.row(i);
      for (int c = 0; c < k; ++c) centroids.row(c) /= static_cast<double>(sizes[c]);
    }

    double obj = 0.0;
    for (Index i = 0; i < n; ++i) obj += sq_dist(x, i, centroids, assign[i]);
    if (obj < best.objective) {
      best.assign = assign;
      best.centroids = centroids;
      best.objective = obj;
    }
  }
  return best;
}

Partition kmodes(const IntMatrix& x, int k, Rng& rng, int restarts, int max_iter) {
  const Index n = x.rows();
  const Index p = x.cols();
  if (k < 1) throw InputError("kmodes: k must be positive");
  if (k > n) throw InputError("kmodes: more clusters than rows");
  if (restarts < 1) throw InputError("kmodes: need at least one restart");

  const int n_codes = x.size() > 0 ? x.maxCoeff() + 1 : 1;

  Partition best;
  best.objective = std::numeric_limits<double>::infinity();

  for (int r = 0; r < restarts; ++r) {
    // Seed with k distinct row indices (partial Fisher-Yates).
    std::vector<Index> idx(n);
    for (Index i = 0; i < n; ++i) idx[i] = i;
    for (int c = 0; c < k; ++c) {
      const Index j = c + rng.uniform_int(static_cast<int>(n - c));
      std::swap(idx[c], idx[j]);
    }
    IntMatrix modes(k, p);
    for (int c = 0; c < k; ++c) modes.row(c) = x.row(idx[c]);

    std::vector<int> assign(n, -1);
    std::vector<int> sizes(k, 0);
    std::vector<int> counts(static_cast<size_t>(n_codes), 0);
    for (int iter = 0; iter < max_iter; ++iter) {
      bool changed = false;
      std::fill(sizes.begin(), sizes.end(), 0);
      for (Index i = 0; i < n; ++i) {
        int arg = 0;
        int dmin = hamming(x, i, modes, 0);
        for (int c = 1; c < k; ++c) {
          const int d = hamming(x, i, modes, c);
          if (d < dmin) {
            dmin = d;
            arg = c;
          }
        }
        if (assign[i] != arg) {
          assign[i] = arg;
          changed = true;
        }
        ++sizes[arg];
      }
      changed |= repair_empty(assign, k, sizes, [&](Index i) {
        return static_cast<double>(hamming(x, i, modes, assign[i]));
      });
      if (!changed && iter > 0) break;

      for (int c = 0; c < k; ++c) {
        for (Index j = 0; j < p; ++j) {
          std::fill(counts.begin(), counts.end(), 0);
          for (Index i = 0; i < n; ++i) {
            if (assign[i] == c) ++counts[static_cast<size_t>(x(i, j))];
          }
          // Most frequent code wins; ties go to the smallest code.
          int mode = 0;
          for (int v = 1; v < n_codes; ++v) {
            if (counts[static_cast<size_t>(v)] > counts[static_cast<size_t>(mode)]) mode = v;
          }
          modes(c, j) = mode;
        }
      }
    }

    double obj = 0.0;
    for (Index i = 0; i < n; ++i) obj += hamming(x, i, modes, assign[i]);
    if (obj < best.objective) {
      best.assign = assign;
      best.centroids = modes.cast<double>();
      best.objective = obj;
    }
  }
  return best;
}

}  // namespace multilc
