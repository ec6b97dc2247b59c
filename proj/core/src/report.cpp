#include "multilc/report.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"
#include "multilc/types.hpp"

namespace multilc {
namespace {

using nlohmann::json;

constexpr const char* kSeparator = "---------------------------";
constexpr const char* kStarsLegend = " *** p < 0.01, ** p < 0.05, * p < 0.1";

std::string fixed(double v, int decimals) { return fmt::format("{:.{}f}", v, decimals); }

// Four decimals with trailing zeros trimmed, matching how the reference
// output prints scalar statistics ("1", "0.25", "885488.2917").
std::string format_stat(double v) {
  std::string s = fixed(v, 4);
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

std::string rjust(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string ljust(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::size_t width_of(const std::vector<std::string>& values) {
  std::size_t w = 0;
  for (const auto& v : values) w = std::max(w, v.size());
  return w;
}

// Character-matrix print: row labels left-justified, every cell column
// right-justified to its own width, single-space separators. The header row
// carries the column names over label-width padding.
void append_matrix(std::vector<std::string>& lines, const std::vector<std::string>& row_labels,
                   const std::vector<std::string>& headers,
                   const std::vector<std::vector<std::string>>& cells) {
  const std::size_t lw = width_of(row_labels);
  std::vector<std::size_t> cw(headers.size());
  for (std::size_t c = 0; c < headers.size(); ++c) {
    cw[c] = headers[c].size();
    for (const auto& row : cells) cw[c] = std::max(cw[c], row[c].size());
  }
  std::string head(lw, ' ');
  for (std::size_t c = 0; c < headers.size(); ++c) head += " " + rjust(headers[c], cw[c]);
  lines.push_back(std::move(head));
  for (std::size_t r = 0; r < cells.size(); ++r) {
    std::string line = ljust(row_labels[r], lw);
    for (std::size_t c = 0; c < headers.size(); ++c) line += " " + rjust(cells[r][c], cw[c]);
    lines.push_back(std::move(line));
  }
}

// Named-vector print: a spacer line as wide as the block, then label/value
// rows with values right-justified to a common width.
void append_vector(std::vector<std::string>& lines, const std::vector<std::string>& labels,
                   const std::vector<std::string>& values) {
  const std::size_t lw = width_of(labels);
  const std::size_t vw = width_of(values);
  lines.push_back(std::string(lw + 1 + vw, ' '));
  for (std::size_t r = 0; r < labels.size(); ++r) {
    lines.push_back(ljust(labels[r], lw) + " " + rjust(values[r], vw));
  }
}

double num_or_nan(const json& obj, const char* key) {
  if (obj.contains(key) && obj[key].is_number()) return obj[key].get<double>();
  return std::numeric_limits<double>::quiet_NaN();
}

Matrix matrix_of(const json& node, const std::string& what) {
  if (!node.is_object() || !node.contains("rows") || !node.contains("cols") ||
      !node.contains("data")) {
    throw InputError(what + ": expected a matrix object");
  }
  const Index rows = node["rows"].get<Index>();
  const Index cols = node["cols"].get<Index>();
  const json& data = node["data"];
  if (!data.is_array() || static_cast<Index>(data.size()) != rows * cols) {
    throw InputError(what + ": matrix data has the wrong length");
  }
  Matrix m(rows, cols);
  Index at = 0;
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(at++)].get<double>();
  }
  return m;
}

std::string significance_stars(double p) {
  if (p < 0.01) return "***";
  if (p < 0.05) return "** ";
  if (p < 0.1) return "*  ";
  return "   ";
}

struct CoefBlock {
  std::string label;
  std::vector<std::string> names;
  std::vector<std::vector<std::string>> cells;  // estimate, se, z, p+stars
};

std::vector<CoefBlock> chunk_coefficients(const json& entries, std::size_t per_block,
                                          const std::vector<std::string>& labels) {
  std::vector<CoefBlock> blocks;
  if (per_block == 0) return blocks;
  std::size_t at = 0;
  for (std::size_t b = 0; b < labels.size() && at < entries.size(); ++b) {
    CoefBlock block;
    block.label = labels[b];
    for (std::size_t k = 0; k < per_block && at < entries.size(); ++k, ++at) {
      const json& e = entries[at];
      block.names.push_back(e.value("name", std::string()));
      const double p = num_or_nan(e, "p");
      block.cells.push_back({fixed(num_or_nan(e, "estimate"), 4), fixed(num_or_nan(e, "se"), 4),
                             fixed(num_or_nan(e, "z"), 4), fixed(p, 4) + significance_stars(p)});
    }
    blocks.push_back(std::move(block));
  }
  return blocks;
}

void append_coef_section(std::vector<std::string>& lines, const std::string& title,
                         const std::string& value_header, const std::vector<CoefBlock>& blocks) {
  lines.push_back(title);
  lines.push_back("");
  lines.push_back("");
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (b > 0) lines.push_back("");
    lines.push_back(blocks[b].label);
    lines.push_back("");
    append_matrix(lines, blocks[b].names, {value_header, "S.E.", "Z-score", "p-value"},
                  blocks[b].cells);
    lines.push_back("");
    lines.push_back("");
    lines.push_back(kStarsLegend);
  }
}

}  // namespace

std::string render_summary(const std::string& fit_json) {
  json doc;
  try {
    doc = json::parse(fit_json);
  } catch (const json::exception& e) {
    throw InputError(std::string("invalid fit JSON: ") + e.what());
  }
  if (doc.value("schema_version", 0) != 1 || doc.value("kind", std::string()) != "fit") {
    throw InputError("invalid fit JSON: expected a schema_version 1 fit document");
  }

  const json& spec = doc.at("spec");
  const int t_count = spec.at("t").get<int>();
  const int m_count = spec.at("m").get<int>();
  const bool low_cov = !spec.at("covariates").empty();
  const bool high_cov = !spec.at("group_covariates").empty();
  const bool multilevel = m_count > 1;

  const json& params = doc.at("params");
  const json& stats = doc.at("stats");
  const json& trace = doc.at("trace");
  const Matrix pi_avg = matrix_of(params.at("pi_avg"), "pi_avg");

  std::vector<std::string> lines;
  lines.push_back("");
  lines.push_back("CALL:");
  lines.push_back(doc.value("call", std::string()));
  lines.push_back("");

  lines.push_back("SPECIFICATION:");
  std::string spec_text = multilevel ? "Multilevel LC model" : "Single-level LC model";
  if (multilevel && low_cov && high_cov) {
    spec_text += " with lower- and higher-level covariates";
  } else if (multilevel && low_cov) {
    spec_text += " with lower-level covariates";
  } else if (multilevel && high_cov) {
    spec_text += " with higher-level covariates";
  } else if (low_cov) {
    spec_text += " with covariates";
  }
  lines.push_back(std::string(spec_text.size() + 1, ' '));
  lines.push_back(" " + spec_text);
  lines.push_back("");

  lines.push_back("ESTIMATION DETAILS:");
  lines.push_back("");
  append_matrix(lines, {""}, {"EMiter", "LLfirst", "LLlast"},
                {{fmt::format("{}", trace.value("iterations", 0)),
                  fixed(num_or_nan(trace, "ll_first"), 1), fixed(num_or_nan(trace, "ll_last"), 1)}});
  lines.push_back("");
  lines.push_back(kSeparator);
  lines.push_back("");

  if (multilevel) {
    lines.push_back("GROUP PROPORTIONS (SAMPLE MEAN):");
    const json& omega = params.at("omega_avg");
    std::vector<std::string> labels, values;
    for (std::size_t g = 0; g < omega.size(); ++g) {
      labels.push_back(fmt::format("P(G{})", g + 1));
      values.push_back(format_stat(omega[g].get<double>()));
    }
    append_vector(lines, labels, values);
    lines.push_back("");

    lines.push_back("CLASS PROPORTIONS (SAMPLE MEAN):");
    lines.push_back("");
    std::vector<std::string> row_labels;
    std::vector<std::string> headers;
    std::vector<std::vector<std::string>> cells;
    for (int g = 0; g < m_count; ++g) headers.push_back(fmt::format("G{}", g + 1));
    for (int t = 0; t < t_count; ++t) {
      row_labels.push_back(fmt::format("P(C{}|G)", t + 1));
      std::vector<std::string> row;
      for (int g = 0; g < m_count; ++g) row.push_back(fixed(pi_avg(g, t), 4));
      cells.push_back(std::move(row));
    }
    append_matrix(lines, row_labels, headers, cells);
    lines.push_back("");
  } else {
    lines.push_back("CLASS PROPORTIONS:");
    std::vector<std::string> labels, values;
    for (int t = 0; t < t_count; ++t) {
      labels.push_back(fmt::format("P(C{})", t + 1));
      values.push_back(format_stat(pi_avg(0, t)));
    }
    append_vector(lines, labels, values);
    lines.push_back("");
  }

  lines.push_back("RESPONSE PROBABILITIES:");
  lines.push_back("");
  {
    const json& items = spec.at("items");
    const json& phi = params.at("phi");
    std::vector<std::string> row_labels;
    std::vector<std::string> headers;
    std::vector<std::vector<std::string>> cells;
    for (int t = 0; t < t_count; ++t) headers.push_back(fmt::format("C{}", t + 1));
    for (std::size_t h = 0; h < items.size(); ++h) {
      const std::string name = items[h].value("name", std::string());
      const Matrix probs = matrix_of(phi[h], "phi");
      if (probs.cols() == 2) {
        row_labels.push_back(fmt::format("P({}|C)", name));
        std::vector<std::string> row;
        for (int t = 0; t < t_count; ++t) row.push_back(fixed(probs(t, 1), 4));
        cells.push_back(std::move(row));
      } else {
        const json& cats = items[h].at("categories");
        for (Index c = 0; c < probs.cols(); ++c) {
          row_labels.push_back(
              fmt::format("P({}={}|C)", name, cats[static_cast<std::size_t>(c)].get<std::string>()));
          std::vector<std::string> row;
          for (int t = 0; t < t_count; ++t) row.push_back(fixed(probs(t, c), 4));
          cells.push_back(std::move(row));
        }
      }
    }
    append_matrix(lines, row_labels, headers, cells);
  }
  lines.push_back("");
  lines.push_back(kSeparator);
  lines.push_back("");

  lines.push_back("MODEL AND CLASSIFICATION STATISTICS:");
  {
    std::vector<std::string> labels, values;
    auto add = [&](const char* label, double value) {
      labels.push_back(label);
      values.push_back(format_stat(value));
    };
    if (multilevel) {
      add("R2entrlow", num_or_nan(stats, "entropy_r2_low"));
      add("R2entrhigh", num_or_nan(stats, "entropy_r2_high"));
      add("BIClow", num_or_nan(stats, "bic_low"));
      add("BIChigh", num_or_nan(stats, "bic_high"));
      add("ICLBIClow", num_or_nan(stats, "icl_bic_low"));
      add("ICLBIChigh", num_or_nan(stats, "icl_bic_high"));
      add("AIC", num_or_nan(stats, "aic"));
    } else {
      add("ClassErr", num_or_nan(stats, "class_err_low"));
      add("EntR-sqr", num_or_nan(stats, "entropy_r2_low"));
      add("BIC", num_or_nan(stats, "bic_low"));
      add("AIC", num_or_nan(stats, "aic"));
    }
    append_vector(lines, labels, values);
  }

  const bool show_alpha = high_cov && doc.contains("inference") &&
                          !doc["inference"].value("alpha", json::array()).empty();
  const bool show_gamma = low_cov && doc.contains("inference") &&
                          !doc["inference"].value("gamma", json::array()).empty();
  if (show_alpha || show_gamma) {
    lines.push_back("");
    lines.push_back("");
    lines.push_back(kSeparator);
    lines.push_back("");
    if (show_alpha) {
      const std::size_t k_high = spec.value("k_high", 1);
      std::vector<std::string> labels;
      for (int g = 2; g <= m_count; ++g) labels.push_back(fmt::format("MODEL FOR G{} (BASE G1)", g));
      append_coef_section(lines, "LOGISTIC MODEL FOR HIGHER-LEVEL CLASS MEMBERSHIP:", "Alpha",
                          chunk_coefficients(doc["inference"]["alpha"], k_high, labels));
      if (show_gamma) {
        lines.push_back("");
        lines.push_back(kSeparator);
        lines.push_back("");
      }
    }
    if (show_gamma) {
      const std::size_t k_low = spec.value("k_low", 1);
      std::vector<std::string> labels;
      for (int g = 1; g <= m_count; ++g) {
        for (int t = 2; t <= t_count; ++t) {
          labels.push_back(multilevel
                               ? fmt::format("MODEL FOR C{} (BASE C1) GIVEN G{} ", t, g)
                               : fmt::format("MODEL FOR C{} (BASE C1)", t));
        }
      }
      append_coef_section(lines, "LOGISTIC MODEL FOR LOWER-LEVEL CLASS MEMBERSHIP:", "Gamma",
                          chunk_coefficients(doc["inference"]["gamma"], k_low, labels));
    }
  }

  std::string out;
  for (const std::string& line : lines) {
    out += line;
    out += '\n';
  }
  return out;
}

}  // namespace multilc
