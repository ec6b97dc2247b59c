#include "multilc/simulate.hpp"

#include <cmath>
#include <cstdlib>
#include <set>

#include <fmt/format.h>

#include "multilc/rng.hpp"

namespace multilc {
namespace {

double draw_covariate(const CovariateGen& gen, Rng& rng) {
  switch (gen.kind) {
    case CovariateGen::Kind::bernoulli: return rng.bernoulli(gen.p) ? 1.0 : 0.0;
    case CovariateGen::Kind::normal: return gen.mean + gen.sd * rng.normal();
    case CovariateGen::Kind::fixed: return gen.value;
  }
  throw InternalError("draw_covariate: unknown kind");
}

bool all_integer(const std::vector<std::string>& values) {
  for (const auto& v : values) {
    char* end = nullptr;
    std::strtol(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size()) return false;
  }
  return true;
}

// Ingest re-derives category codes by sorting the observed values, so the
// generating schema must already be in that order for codes to line up.
void check_category_order(const ItemSchema& item) {
  const bool numeric = all_integer(item.categories);
  for (std::size_t c = 1; c < item.categories.size(); ++c) {
    const std::string& lo = item.categories[c - 1];
    const std::string& hi = item.categories[c];
    const bool ascending = numeric ? std::strtol(lo.c_str(), nullptr, 10) <
                                         std::strtol(hi.c_str(), nullptr, 10)
                                   : lo < hi;
    if (!ascending) {
      throw InputError("item '" + item.name + "': categories must be distinct and ascending");
    }
  }
}

void check_probability_rows(const Matrix& probs, const std::string& what) {
  for (Index r = 0; r < probs.rows(); ++r) {
    double total = 0.0;
    for (Index c = 0; c < probs.cols(); ++c) {
      const double v = probs(r, c);
      if (!(v >= 0.0 && v <= 1.0)) throw InputError(what + ": probabilities must be in [0, 1]");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-8) throw InputError(what + ": rows must sum to 1");
  }
}

}  // namespace

void validate_true_model(const TrueModel& truth) {
  if (truth.t < 1) throw InputError("generating model: T must be >= 1");
  if (truth.m < 1) throw InputError("generating model: M must be >= 1");
  if (truth.items.empty()) throw InputError("generating model: at least one item is required");
  if (truth.phi.size() != truth.items.size()) {
    throw InputError("generating model: one response matrix per item is required");
  }
  std::set<std::string> names;
  if (!truth.group_column.empty()) names.insert(truth.group_column);
  for (std::size_t h = 0; h < truth.items.size(); ++h) {
    const ItemSchema& item = truth.items[h];
    if (item.name.empty()) throw InputError("generating model: item names must be non-empty");
    if (!names.insert(item.name).second) {
      throw InputError("generating model: duplicate column name '" + item.name + "'");
    }
    if (item.n_categories() < 2) {
      throw InputError("item '" + item.name + "': at least two categories are required");
    }
    check_category_order(item);
    const Matrix& phi = truth.phi[h];
    if (phi.rows() != truth.t || phi.cols() != item.n_categories()) {
      throw InputError("item '" + item.name + "': response matrix must be T x #categories");
    }
    check_probability_rows(phi, "item '" + item.name + "'");
  }
  for (const auto& gen : truth.covariates) {
    if (gen.name.empty()) throw InputError("generating model: covariate names must be non-empty");
    if (!names.insert(gen.name).second) {
      throw InputError("generating model: duplicate column name '" + gen.name + "'");
    }
  }
  for (const auto& gen : truth.group_covariates) {
    if (gen.name.empty()) throw InputError("generating model: covariate names must be non-empty");
    if (!names.insert(gen.name).second) {
      throw InputError("generating model: duplicate column name '" + gen.name + "'");
    }
  }

  const Index k_low = 1 + static_cast<Index>(truth.covariates.size());
  const Index k_high = 1 + static_cast<Index>(truth.group_covariates.size());
  if (truth.m > 1) {
    if (truth.group_column.empty()) {
      throw InputError("generating model: M > 1 requires a group column");
    }
    if (truth.alpha.rows() != truth.m - 1 || truth.alpha.cols() != k_high) {
      throw InputError("generating model: alpha must be (M-1) x (1 + #group covariates)");
    }
  } else if (truth.alpha.size() != 0) {
    throw InputError("generating model: alpha must be empty when M = 1");
  }
  if (truth.t > 1) {
    if (static_cast<int>(truth.gamma.size()) != truth.m) {
      throw InputError("generating model: one gamma block per high-level class is required");
    }
    for (const Matrix& block : truth.gamma) {
      if (block.rows() != truth.t - 1 || block.cols() != k_low) {
        throw InputError("generating model: gamma blocks must be (T-1) x (1 + #covariates)");
      }
    }
  } else if (!truth.gamma.empty()) {
    throw InputError("generating model: gamma must be empty when T = 1");
  }
}

SimResult simulate_dataset(const TrueModel& truth, int j_groups,
                           const std::vector<int>& group_sizes, std::uint64_t seed) {
  validate_true_model(truth);
  if (j_groups < 1) throw InputError("number of groups must be >= 1");
  if (group_sizes.empty()) throw InputError("at least one group size is required");
  for (const int s : group_sizes) {
    if (s < 1) throw InputError("group sizes must be >= 1");
  }

  const std::size_t n_gc = truth.group_covariates.size();
  const std::size_t n_c = truth.covariates.size();
  const bool with_group = !truth.group_column.empty();

  SimResult out;
  auto add_column = [](RawTable& table, const std::string& name, ColumnType type) {
    Column col;
    col.name = name;
    col.type = type;
    table.columns.push_back(std::move(col));
    return table.columns.size() - 1;
  };

  // Data layout: group id, group covariates, unit covariates, items.
  std::size_t col_group = 0;
  if (with_group) col_group = add_column(out.data, truth.group_column, ColumnType::text);
  std::vector<std::size_t> col_gc, col_c, col_items;
  for (const auto& gen : truth.group_covariates) {
    col_gc.push_back(add_column(out.data, gen.name, ColumnType::real));
  }
  for (const auto& gen : truth.covariates) {
    col_c.push_back(add_column(out.data, gen.name, ColumnType::real));
  }
  for (const auto& item : truth.items) {
    col_items.push_back(add_column(out.data, item.name, ColumnType::text));
  }
  const std::size_t l_row = add_column(out.latent, "row", ColumnType::integer);
  const std::size_t l_group = add_column(out.latent, "group", ColumnType::text);
  const std::size_t l_high = add_column(out.latent, "class_high", ColumnType::integer);
  const std::size_t l_low = add_column(out.latent, "class_low", ColumnType::integer);

  Index row = 0;
  for (int g = 0; g < j_groups; ++g) {
    // One substream per group: adding or reordering groups elsewhere does not
    // disturb this group's draws.
    Rng rng = Rng::derive(seed, {static_cast<std::uint64_t>(g)});
    const std::string group_label = std::to_string(g + 1);

    Vector z_high = Vector::Ones(1 + static_cast<Index>(n_gc));
    std::vector<std::string> gc_cells(n_gc);
    for (std::size_t k = 0; k < n_gc; ++k) {
      const double v = draw_covariate(truth.group_covariates[k], rng);
      z_high[1 + static_cast<Index>(k)] = v;
      gc_cells[k] = fmt::format("{}", v);
    }
    int w = 0;
    if (truth.m > 1) w = static_cast<int>(rng.categorical(logistic_probs(truth.alpha, z_high)));

    const int n_g = group_sizes[static_cast<std::size_t>(g) % group_sizes.size()];
    for (int i = 0; i < n_g; ++i, ++row) {
      if (with_group) out.data.columns[col_group].cells.push_back(group_label);
      for (std::size_t k = 0; k < n_gc; ++k) {
        out.data.columns[col_gc[k]].cells.push_back(gc_cells[k]);
      }

      Vector z_low = Vector::Ones(1 + static_cast<Index>(n_c));
      for (std::size_t k = 0; k < n_c; ++k) {
        const double v = draw_covariate(truth.covariates[k], rng);
        z_low[1 + static_cast<Index>(k)] = v;
        out.data.columns[col_c[k]].cells.push_back(fmt::format("{}", v));
      }
      int x = 0;
      if (truth.t > 1) {
        x = static_cast<int>(
            rng.categorical(logistic_probs(truth.gamma[static_cast<std::size_t>(w)], z_low)));
      }
      for (std::size_t h = 0; h < truth.items.size(); ++h) {
        const Index c = rng.categorical(Vector(truth.phi[h].row(x).transpose()));
        out.data.columns[col_items[h]].cells.push_back(
            truth.items[h].categories[static_cast<std::size_t>(c)]);
      }

      out.latent.columns[l_row].cells.push_back(std::to_string(row + 1));
      out.latent.columns[l_group].cells.push_back(group_label);
      out.latent.columns[l_high].cells.push_back(std::to_string(w + 1));
      out.latent.columns[l_low].cells.push_back(std::to_string(x + 1));
    }
  }
  return out;
}

}  // namespace multilc
