// Helpers shared by the unit tests and the acceptance runner: in-memory
// tables, a brute-force likelihood/posterior oracle evaluated in extended
// precision, simulated scenario builders, label alignment, and a small
// well-formedness checker for the SVG output.

#pragma once

#include "multilc/aggregate.hpp"
#include "multilc/data.hpp"
#include "multilc/em.hpp"
#include "multilc/estimators.hpp"
#include "multilc/init.hpp"
#include "multilc/model.hpp"
#include "multilc/numerics.hpp"
#include "multilc/rng.hpp"
#include "multilc/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace testsupport {

using namespace multilc;

// Builds a table from (name, cells) pairs and round-trips it through the CSV
// writer/reader so column types are inferred exactly as they are for files.
inline RawTable make_table(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& cols) {
  RawTable t;
  for (const auto& [name, cells] : cols) {
    Column c;
    c.name = name;
    c.cells = cells;
    t.columns.push_back(std::move(c));
  }
  std::stringstream buf;
  write_csv(t, buf);
  return load_csv(buf);
}

inline std::string table_to_csv(const RawTable& t) {
  std::stringstream buf;
  write_csv(t, buf);
  return buf.str();
}

// ---------------------------------------------------------------------------
// Brute-force oracle: direct product-space evaluation of the mixture
// likelihood and Bayes-rule posteriors in long double, no log tricks.

struct OraclePosteriors {
  double loglik = 0.0;
  Matrix pw;                  // J x M
  Matrix px;                  // n x T
  std::vector<Matrix> joint;  // M blocks of n x T
};

// Naive softmax of [0, eta_2, ..., eta_T] in extended precision.
inline std::vector<long double> naive_softmax(const std::vector<long double>& free_eta) {
  std::vector<long double> p(free_eta.size() + 1);
  long double total = 1.0L;
  p[0] = 1.0L;
  for (size_t i = 0; i < free_eta.size(); ++i) {
    p[i + 1] = std::exp(free_eta[i]);
    total += p[i + 1];
  }
  for (auto& v : p) v /= total;
  return p;
}

inline OraclePosteriors enumerate_posteriors(const Dataset& data, const ResponseProbs& phi,
                                             const StructuralParams& sp) {
  const Index n = data.n();
  const int t_count = sp.n_class_low;
  const int m_count = sp.n_class_high;
  const bool grouped = data.grouped();
  const Index j_count = grouped ? data.n_groups() : n;

  // Mixing probabilities, representation-agnostic.
  auto omega_at = [&](Index j, int m) -> long double {
    if (m_count == 1) return 1.0L;
    if (sp.alpha.rows() > 0) {
      std::vector<long double> eta(static_cast<size_t>(m_count - 1));
      for (int r = 0; r < m_count - 1; ++r) {
        long double acc = 0.0L;
        for (Index c = 0; c < sp.alpha.cols(); ++c) {
          acc += static_cast<long double>(sp.alpha(r, c)) * data.z_high(j, c);
        }
        eta[static_cast<size_t>(r)] = acc;
      }
      return naive_softmax(eta)[static_cast<size_t>(m)];
    }
    return static_cast<long double>(sp.omega[m]);
  };
  auto pi_at = [&](Index i, int m, int t) -> long double {
    if (t_count == 1) return 1.0L;
    if (!sp.gamma.empty()) {
      const Matrix& block = sp.gamma[static_cast<size_t>(m)];
      std::vector<long double> eta(static_cast<size_t>(t_count - 1));
      for (int r = 0; r < t_count - 1; ++r) {
        long double acc = 0.0L;
        for (Index c = 0; c < block.cols(); ++c) {
          acc += static_cast<long double>(block(r, c)) * data.z_low(i, c);
        }
        eta[static_cast<size_t>(r)] = acc;
      }
      return naive_softmax(eta)[static_cast<size_t>(t)];
    }
    return static_cast<long double>(sp.pi(m, t));
  };
  auto item_prob = [&](Index i, int t) -> long double {
    long double p = 1.0L;
    for (Index h = 0; h < data.n_items(); ++h) {
      p *= static_cast<long double>(phi[static_cast<size_t>(h)](t, data.y(i, h)));
    }
    return p;
  };

  auto rows_of_group = [&](Index j) {
    if (grouped) return data.rows_by_group[static_cast<size_t>(j)];
    return std::vector<Index>{j};
  };

  OraclePosteriors out;
  out.pw = Matrix::Zero(j_count, m_count);
  out.px = Matrix::Zero(n, t_count);
  out.joint.assign(static_cast<size_t>(m_count), Matrix::Zero(n, t_count));

  long double total_ll = 0.0L;
  for (Index j = 0; j < j_count; ++j) {
    const auto rows = rows_of_group(j);
    // Per-unit class-mixture densities under each group class.
    std::vector<std::vector<long double>> unit_mix(rows.size(),
                                                   std::vector<long double>(m_count));
    std::vector<long double> group_term(static_cast<size_t>(m_count));
    long double lj = 0.0L;
    for (int m = 0; m < m_count; ++m) {
      long double prod = omega_at(j, m);
      for (size_t r = 0; r < rows.size(); ++r) {
        long double mix = 0.0L;
        for (int t = 0; t < t_count; ++t) mix += pi_at(rows[r], m, t) * item_prob(rows[r], t);
        unit_mix[r][static_cast<size_t>(m)] = mix;
        prod *= mix;
      }
      group_term[static_cast<size_t>(m)] = prod;
      lj += prod;
    }
    total_ll += std::log(lj);
    for (int m = 0; m < m_count; ++m) {
      const long double w = group_term[static_cast<size_t>(m)] / lj;
      out.pw(j, m) = static_cast<double>(w);
      for (size_t r = 0; r < rows.size(); ++r) {
        const Index i = rows[r];
        for (int t = 0; t < t_count; ++t) {
          const long double cond =
              pi_at(i, m, t) * item_prob(i, t) / unit_mix[r][static_cast<size_t>(m)];
          const double val = static_cast<double>(w * cond);
          out.joint[static_cast<size_t>(m)](i, t) = val;
          out.px(i, t) += val;
        }
      }
    }
  }
  out.loglik = static_cast<double>(total_ll);
  return out;
}

// ---------------------------------------------------------------------------
// Randomized tiny instances for the oracle-equivalence checks. Datasets are
// built directly (same invariants the ingest path produces).

struct TinyInstance {
  Dataset data;
  ResponseProbs phi;
  StructuralParams sp;
};

inline Vector random_simplex(Rng& rng, int k) {
  Vector v(k);
  for (int i = 0; i < k; ++i) v[i] = 0.05 + rng.uniform01();
  return v / v.sum();
}

inline TinyInstance random_tiny_instance(Rng& rng) {
  TinyInstance inst;
  const bool grouped = rng.bernoulli(0.7);
  const int j_count = grouped ? 1 + rng.uniform_int(3) : 0;
  const int t_count = 1 + rng.uniform_int(3);
  const int m_count = grouped ? 1 + rng.uniform_int(2) : 1;
  const int h_count = 1 + rng.uniform_int(3);

  Dataset& d = inst.data;
  std::vector<int> rows_per_group;
  int n = 0;
  if (grouped) {
    for (int j = 0; j < j_count; ++j) {
      const int nj = 1 + rng.uniform_int(3);
      rows_per_group.push_back(nj);
      n += nj;
    }
  } else {
    n = 1 + rng.uniform_int(6);
  }

  d.items.resize(static_cast<size_t>(h_count));
  for (int h = 0; h < h_count; ++h) {
    const int c_h = 2 + rng.uniform_int(2);
    d.items[static_cast<size_t>(h)].name = "y" + std::to_string(h + 1);
    for (int c = 0; c < c_h; ++c) {
      d.items[static_cast<size_t>(h)].categories.push_back(std::to_string(c));
    }
  }
  d.y.resize(n, h_count);
  for (Index i = 0; i < n; ++i) {
    for (int h = 0; h < h_count; ++h) {
      d.y(i, h) = rng.uniform_int(d.items[static_cast<size_t>(h)].n_categories());
    }
  }
  if (grouped) {
    Index at = 0;
    for (int j = 0; j < j_count; ++j) {
      d.group_labels.push_back(std::to_string(j + 1));
      d.rows_by_group.emplace_back();
      for (int r = 0; r < rows_per_group[static_cast<size_t>(j)]; ++r, ++at) {
        d.group_of.push_back(j);
        d.rows_by_group.back().push_back(at);
      }
    }
  }
  const bool low_cov = rng.bernoulli(0.5);
  d.z_low = Matrix::Ones(n, low_cov ? 2 : 1);
  d.z_low_names = {"(Intercept)"};
  if (low_cov) {
    for (Index i = 0; i < n; ++i) d.z_low(i, 1) = rng.normal();
    d.z_low_names.push_back("z1");
  }
  const bool high_cov = grouped && rng.bernoulli(0.5);
  d.z_high = Matrix::Ones(grouped ? j_count : 0, high_cov ? 2 : 1);
  d.z_high_names = {"(Intercept)"};
  if (high_cov) {
    for (Index j = 0; j < j_count; ++j) d.z_high(j, 1) = rng.normal();
    d.z_high_names.push_back("w1");
  }
  d.source_rows.resize(static_cast<size_t>(n));
  std::iota(d.source_rows.begin(), d.source_rows.end(), Index{0});

  inst.phi.resize(static_cast<size_t>(h_count));
  for (int h = 0; h < h_count; ++h) {
    const int c_h = d.items[static_cast<size_t>(h)].n_categories();
    Matrix& ph = inst.phi[static_cast<size_t>(h)];
    ph.resize(t_count, c_h);
    for (int t = 0; t < t_count; ++t) ph.row(t) = random_simplex(rng, c_h).transpose();
  }

  StructuralParams& sp = inst.sp;
  sp.n_class_low = t_count;
  sp.n_class_high = m_count;
  if (m_count > 1) {
    if (rng.bernoulli(0.5)) {
      sp.alpha.resize(m_count - 1, d.z_high.cols());
      for (Index r = 0; r < sp.alpha.rows(); ++r) {
        for (Index c = 0; c < sp.alpha.cols(); ++c) sp.alpha(r, c) = rng.normal();
      }
    } else {
      sp.omega = random_simplex(rng, m_count);
    }
  } else {
    sp.omega = Vector::Ones(1);
  }
  if (t_count > 1 && rng.bernoulli(0.5)) {
    sp.gamma.resize(static_cast<size_t>(m_count));
    for (int m = 0; m < m_count; ++m) {
      Matrix block(t_count - 1, d.z_low.cols());
      for (Index r = 0; r < block.rows(); ++r) {
        for (Index c = 0; c < block.cols(); ++c) block(r, c) = rng.normal();
      }
      sp.gamma[static_cast<size_t>(m)] = std::move(block);
    }
  } else {
    sp.pi.resize(m_count, t_count);
    for (int m = 0; m < m_count; ++m) sp.pi.row(m) = random_simplex(rng, t_count).transpose();
  }
  return inst;
}

// ---------------------------------------------------------------------------
// The baseline simulated scenario: 8 binary items, T = 3 / M = 2, response
// probabilities at 0.15 / 0.85 with a 4-item split between adjacent classes.

inline TrueModel separated_truth(bool low_cov, bool high_cov) {
  TrueModel truth;
  truth.t = 3;
  truth.m = 2;
  const int h_count = 8;
  const double hi = 0.85, lo = 0.15;
  for (int h = 0; h < h_count; ++h) {
    ItemSchema item;
    item.name = "y" + std::to_string(h + 1);
    item.categories = {"0", "1"};
    truth.items.push_back(item);
    Matrix phi(3, 2);
    const double p1 = hi;
    const double p2 = h < h_count / 2 ? hi : lo;
    const double p3 = lo;
    phi << 1 - p1, p1, 1 - p2, p2, 1 - p3, p3;
    truth.phi.push_back(phi);
  }
  if (high_cov) {
    CovariateGen g;
    g.name = "w1";
    g.kind = CovariateGen::Kind::normal;
    truth.group_covariates.push_back(g);
    truth.alpha = Matrix(1, 2);
    truth.alpha << -0.4, 0.9;
  } else {
    truth.alpha = Matrix(1, 1);
    truth.alpha << std::log(0.4 / 0.6);  // omega = (0.6, 0.4)
  }
  if (low_cov) {
    CovariateGen g;
    g.name = "z1";
    g.kind = CovariateGen::Kind::bernoulli;
    g.p = 0.5;
    truth.covariates.push_back(g);
    Matrix g1(2, 2), g2(2, 2);
    g1 << 0.6, 0.5, -0.4, -0.8;
    g2 << -0.5, 0.9, 0.4, -0.6;
    truth.gamma = {g1, g2};
  } else {
    Matrix g1(2, 1), g2(2, 1);
    g1 << 0.5, -0.6;
    g2 << -0.7, 0.3;
    truth.gamma = {g1, g2};
  }
  return truth;
}

inline IngestSpec spec_for_truth(const TrueModel& truth) {
  IngestSpec spec;
  for (const auto& item : truth.items) spec.items.push_back(item.name);
  spec.group = truth.group_column;
  for (const auto& c : truth.covariates) spec.covariates.push_back(c.name);
  for (const auto& c : truth.group_covariates) spec.group_covariates.push_back(c.name);
  return spec;
}

inline IngestResult simulate_ingested(const TrueModel& truth, int j_groups, int group_size,
                                      std::uint64_t seed) {
  const SimResult sim = simulate_dataset(truth, j_groups, {group_size}, seed);
  return ingest(sim.data, spec_for_truth(truth));
}

// ---------------------------------------------------------------------------
// Label alignment. The likelihood is invariant under class relabeling, so
// estimates are compared to the truth after choosing the permutation that
// minimizes the total variation distance between response profiles.

inline std::vector<std::vector<int>> all_permutations(int k) {
  std::vector<int> base(static_cast<size_t>(k));
  std::iota(base.begin(), base.end(), 0);
  std::vector<std::vector<int>> out;
  do {
    out.push_back(base);
  } while (std::next_permutation(base.begin(), base.end()));
  return out;
}

// perm[t] = estimated class playing the role of true class t.
inline std::vector<int> align_low_classes(const ResponseProbs& phi_hat,
                                          const ResponseProbs& phi_true) {
  const int t_count = static_cast<int>(phi_true[0].rows());
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_perm;
  for (const auto& perm : all_permutations(t_count)) {
    double tv = 0.0;
    for (size_t h = 0; h < phi_true.size(); ++h) {
      for (int t = 0; t < t_count; ++t) {
        tv += 0.5 * (phi_hat[h].row(perm[static_cast<size_t>(t)]) - phi_true[h].row(t))
                        .cwiseAbs()
                        .sum();
      }
    }
    if (tv < best) {
      best = tv;
      best_perm = perm;
    }
  }
  return best_perm;
}

// Logistic coefficients as a full T x K matrix including the zero base row.
inline Matrix with_base_row(const Matrix& coeffs) {
  Matrix full(coeffs.rows() + 1, coeffs.cols() == 0 ? 1 : coeffs.cols());
  full.setZero();
  if (coeffs.size() > 0) full.bottomRows(coeffs.rows()) = coeffs;
  return full;
}

// Applies a class permutation to logistic coefficients and re-bases on the
// new first class: row t of the result is beta_{perm[t]} - beta_{perm[0]}.
inline Matrix permute_and_rebase(const Matrix& coeffs, const std::vector<int>& perm) {
  const Matrix full = with_base_row(coeffs);
  Matrix out(full.rows() - 1, full.cols());
  for (Index t = 1; t < full.rows(); ++t) {
    out.row(t - 1) = full.row(perm[static_cast<size_t>(t)]) - full.row(perm[0]);
  }
  return out;
}

// Gamma blocks after aligning both levels: block m of the result corresponds
// to true group class m, rows to true low-level classes 2..T.
inline std::vector<Matrix> align_gamma(const std::vector<Matrix>& gamma_hat,
                                       const std::vector<int>& t_perm,
                                       const std::vector<int>& m_perm) {
  std::vector<Matrix> out(gamma_hat.size());
  for (size_t m = 0; m < gamma_hat.size(); ++m) {
    out[m] = permute_and_rebase(gamma_hat[m_perm[m]], t_perm);
  }
  return out;
}

// Picks the group-class permutation minimizing the aligned-gamma distance to
// the truth (the low-level permutation is already fixed by the profiles).
inline std::vector<int> align_high_classes(const std::vector<Matrix>& gamma_hat,
                                           const std::vector<Matrix>& gamma_true,
                                           const std::vector<int>& t_perm) {
  const int m_count = static_cast<int>(gamma_true.size());
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_perm;
  for (const auto& perm : all_permutations(m_count)) {
    const std::vector<Matrix> aligned = align_gamma(gamma_hat, t_perm, perm);
    double dist = 0.0;
    for (int m = 0; m < m_count; ++m) {
      dist += (aligned[static_cast<size_t>(m)] - gamma_true[static_cast<size_t>(m)])
                  .cwiseAbs()
                  .sum();
    }
    if (dist < best) {
      best = dist;
      best_perm = perm;
    }
  }
  return best_perm;
}

// ---------------------------------------------------------------------------
// Minimal XML well-formedness scan: declaration, balanced tags, quoted
// attributes. Enough to catch structural mistakes in the SVG writer.

inline bool xml_well_formed(const std::string& text) {
  std::vector<std::string> stack;
  size_t pos = 0;
  const size_t n = text.size();
  while (pos < n) {
    const size_t lt = text.find('<', pos);
    if (lt == std::string::npos) break;
    // No stray '>' or unescaped '&' between tags is checked loosely here;
    // the goal is tag balance and termination.
    const size_t gt = text.find('>', lt);
    if (gt == std::string::npos) return false;
    std::string tag = text.substr(lt + 1, gt - lt - 1);
    pos = gt + 1;
    if (tag.empty()) return false;
    if (tag[0] == '?' || tag[0] == '!') continue;  // declaration / comment
    if (tag[0] == '/') {
      const std::string name = tag.substr(1);
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
      continue;
    }
    const bool self_closing = tag.back() == '/';
    if (self_closing) tag.pop_back();
    // Quotes must pair up inside the tag.
    if (std::count(tag.begin(), tag.end(), '"') % 2 != 0) return false;
    const size_t name_end = tag.find_first_of(" \t\r\n");
    const std::string name = tag.substr(0, name_end);
    if (name.empty()) return false;
    if (!self_closing) stack.push_back(name);
  }
  return stack.empty();
}

inline int count_substr(const std::string& text, const std::string& needle) {
  int count = 0;
  size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

}  // namespace testsupport
