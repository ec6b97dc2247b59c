#include "multilc/json_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace multilc {
namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json data = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json trace_to_json(const EmTrace& trace) {
  return json{{"iterations", trace.iterations},
              {"ll_first", trace.ll_first},
              {"ll_last", trace.ll_last},
              {"converged", trace.converged}};
}

void put_finite(json& obj, const char* key, double value) {
  if (std::isfinite(value)) obj[key] = value;
}

json coefs_to_json(const std::vector<Coefficient>& coefs) {
  json out = json::array();
  for (const Coefficient& co : coefs) {
    json entry{{"name", co.name}, {"estimate", co.estimate}};
    put_finite(entry, "se", co.se);
    put_finite(entry, "z", co.z);
    put_finite(entry, "p", co.p);
    out.push_back(std::move(entry));
  }
  return out;
}

Matrix matrix_from_json(const json& node, const std::string& what) {
  if (!node.is_array()) throw InputError(what + ": expected an array of rows");
  const std::size_t rows = node.size();
  std::size_t cols = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!node[r].is_array()) throw InputError(what + ": expected an array of rows");
    if (r == 0) {
      cols = node[r].size();
    } else if (node[r].size() != cols) {
      throw InputError(what + ": rows must have equal length");
    }
  }
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const json& cell = node[r][c];
      if (!cell.is_number()) throw InputError(what + ": entries must be numbers");
      m(static_cast<Index>(r), static_cast<Index>(c)) = cell.get<double>();
    }
  }
  return m;
}

CovariateGen covariate_from_json(const json& node, const std::string& what) {
  if (!node.is_object()) throw InputError(what + ": expected an object");
  CovariateGen gen;
  gen.name = node.value("name", std::string());
  const std::string dist = node.value("dist", std::string());
  if (dist == "bernoulli") {
    gen.kind = CovariateGen::Kind::bernoulli;
    gen.p = node.value("p", 0.5);
    if (!(gen.p >= 0.0 && gen.p <= 1.0)) throw InputError(what + ": p must be in [0, 1]");
  } else if (dist == "normal") {
    gen.kind = CovariateGen::Kind::normal;
    gen.mean = node.value("mean", 0.0);
    gen.sd = node.value("sd", 1.0);
    if (!(gen.sd > 0.0)) throw InputError(what + ": sd must be positive");
  } else if (dist == "fixed") {
    gen.kind = CovariateGen::Kind::fixed;
    gen.value = node.value("value", 0.0);
  } else {
    throw InputError(what + ": dist must be bernoulli, normal, or fixed");
  }
  return gen;
}

}  // namespace

std::string fit_to_json(const FitResult& fit, const std::string& call, bool extended) {
  json doc;
  doc["schema_version"] = 1;
  doc["kind"] = "fit";
  doc["call"] = call;

  json spec;
  spec["t"] = fit.t;
  spec["m"] = fit.m;
  spec["estimator"] = estimator_name(fit.estimator);
  spec["grouped"] = fit.grouped;
  spec["n"] = fit.n_units;
  spec["j"] = fit.n_groups;
  spec["k_low"] = fit.low_covariates ? static_cast<Index>(fit.z_low_names.size()) : 1;
  spec["k_high"] = fit.high_covariates ? static_cast<Index>(fit.z_high_names.size()) : 1;
  json items = json::array();
  for (const ItemSchema& item : fit.items) {
    items.push_back(json{{"name", item.name}, {"categories", item.categories}});
  }
  spec["items"] = std::move(items);
  json covs = json::array();
  if (fit.low_covariates) {
    for (std::size_t k = 1; k < fit.z_low_names.size(); ++k) covs.push_back(fit.z_low_names[k]);
  }
  spec["covariates"] = std::move(covs);
  json gcovs = json::array();
  if (fit.high_covariates) {
    for (std::size_t k = 1; k < fit.z_high_names.size(); ++k) gcovs.push_back(fit.z_high_names[k]);
  }
  spec["group_covariates"] = std::move(gcovs);
  spec["groups"] = fit.group_labels;
  doc["spec"] = std::move(spec);

  doc["trace"] = trace_to_json(fit.trace);
  doc["trace_step1"] = trace_to_json(fit.trace_step1);

  json params;
  json phi = json::array();
  for (std::size_t h = 0; h < fit.phi.size(); ++h) phi.push_back(matrix_to_json(fit.phi[h]));
  params["phi"] = std::move(phi);
  params["omega_avg"] = vector_to_json(fit.omega_avg);
  params["pi_avg"] = matrix_to_json(fit.pi_avg);
  if (fit.structural.alpha.size() > 0) params["alpha"] = matrix_to_json(fit.structural.alpha);
  if (!fit.structural.gamma.empty()) {
    json gamma = json::array();
    for (const Matrix& block : fit.structural.gamma) gamma.push_back(matrix_to_json(block));
    params["gamma"] = std::move(gamma);
  }
  if (fit.structural.omega.size() > 0) params["omega"] = vector_to_json(fit.structural.omega);
  if (fit.structural.pi.size() > 0) params["pi"] = matrix_to_json(fit.structural.pi);
  doc["params"] = std::move(params);

  json stats;
  stats["ll"] = fit.ic.ll;
  stats["npar"] = fit.ic.npar;
  stats["n"] = fit.ic.n;
  stats["j"] = fit.ic.j;
  put_finite(stats, "bic_low", fit.ic.bic_low);
  put_finite(stats, "bic_high", fit.ic.bic_high);
  put_finite(stats, "aic", fit.ic.aic);
  put_finite(stats, "icl_bic_low", fit.ic.icl_bic_low);
  put_finite(stats, "icl_bic_high", fit.ic.icl_bic_high);
  stats["class_err_low"] = fit.cls.class_err_low;
  stats["class_err_high"] = fit.cls.class_err_high;
  stats["entropy_r2_low"] = fit.cls.entropy_r2_low;
  stats["entropy_r2_high"] = fit.cls.entropy_r2_high;
  stats["vcov_pseudo_inverse"] = fit.vcov_pseudo_inverse;
  doc["stats"] = std::move(stats);

  if (!fit.alpha_coefs.empty() || !fit.gamma_coefs.empty()) {
    doc["inference"] =
        json{{"alpha", coefs_to_json(fit.alpha_coefs)}, {"gamma", coefs_to_json(fit.gamma_coefs)}};
  }

  if (extended) {
    json ext;
    ext["posterior_low"] = matrix_to_json(fit.post.px_marginal);
    ext["posterior_high"] = matrix_to_json(fit.post.pw);
    ext["vcov"] = matrix_to_json(fit.vcov);
    json names = json::array();
    for (const Coefficient& co : fit.alpha_coefs) names.push_back(co.name);
    for (const Coefficient& co : fit.gamma_coefs) names.push_back(co.name);
    ext["coef_names"] = std::move(names);
    doc["extended"] = std::move(ext);
  }

  return doc.dump(2) + "\n";
}

TrueModel parse_true_model(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("invalid generating-model JSON: ") + e.what());
  }
  try {
    TrueModel truth;
    truth.t = doc.value("t", 1);
    truth.m = doc.value("m", 1);
    truth.group_column = doc.value("group_column", std::string("group"));

    if (!doc.contains("items") || !doc["items"].is_array() || doc["items"].empty()) {
      throw InputError("generating model: an items array is required");
    }
    for (const json& node : doc["items"]) {
      ItemSchema item;
      item.name = node.value("name", std::string());
      if (node.contains("categories")) {
        item.categories = node["categories"].get<std::vector<std::string>>();
      }
      truth.items.push_back(item);
      truth.phi.push_back(matrix_from_json(node.at("phi"), "item '" + item.name + "' phi"));
    }
    for (const json& node : doc.value("covariates", json::array())) {
      truth.covariates.push_back(covariate_from_json(node, "covariate"));
    }
    for (const json& node : doc.value("group_covariates", json::array())) {
      truth.group_covariates.push_back(covariate_from_json(node, "group covariate"));
    }
    if (doc.contains("alpha")) truth.alpha = matrix_from_json(doc["alpha"], "alpha");
    if (doc.contains("gamma")) {
      if (!doc["gamma"].is_array()) throw InputError("gamma: expected an array of blocks");
      for (std::size_t m = 0; m < doc["gamma"].size(); ++m) {
        truth.gamma.push_back(
            matrix_from_json(doc["gamma"][m], "gamma block " + std::to_string(m + 1)));
      }
    }
    validate_true_model(truth);
    return truth;
  } catch (const json::exception& e) {
    throw InputError(std::string("invalid generating-model JSON: ") + e.what());
  }
}

TrueModel load_true_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_true_model(buffer.str());
}

}  // namespace multilc
