#include "doctest.h"

#include "multilc/json_io.hpp"
#include "multilc/report.hpp"
#include "multilc/svg.hpp"

#include "json.hpp"
#include "support.hpp"

#include <string>

using namespace multilc;
using namespace testsupport;
using nlohmann::json;

namespace {

const FitResult& example_fit() {
  static const FitResult fit = [] {
    const TrueModel truth = separated_truth(true, true);
    const IngestResult data = simulate_ingested(truth, 15, 20, 88);
    FitOptions opts;
    opts.n_class_low = 3;
    opts.n_class_high = 2;
    opts.seed = 6;
    return fit_model(data, opts);
  }();
  return fit;
}

// A fully handcrafted document so the renderer's formatting can be pinned
// down byte for byte.
json handcrafted_doc() {
  json doc;
  doc["schema_version"] = 1;
  doc["kind"] = "fit";
  doc["call"] = "multilc fit demo.csv";
  doc["spec"] = json{{"t", 2},
                     {"m", 1},
                     {"estimator", "two_step"},
                     {"grouped", false},
                     {"n", 100},
                     {"j", 0},
                     {"k_low", 2},
                     {"k_high", 1},
                     {"items",
                      json::array({json{{"name", "y1"}, {"categories", {"0", "1"}}},
                                   json{{"name", "att"}, {"categories", {"a", "b", "c"}}}})},
                     {"covariates", json::array({"z1"})},
                     {"group_covariates", json::array()},
                     {"groups", json::array()}};
  doc["trace"] = json{{"iterations", 12},
                      {"ll_first", -130.5},
                      {"ll_last", -123.456},
                      {"converged", true}};
  json params;
  params["phi"] = json::array(
      {json{{"rows", 2}, {"cols", 2}, {"data", {0.8, 0.2, 0.3, 0.7}}},
       json{{"rows", 2}, {"cols", 3}, {"data", {0.5, 0.25, 0.25, 0.2, 0.3, 0.5}}}});
  params["omega_avg"] = json::array({1.0});
  params["pi_avg"] = json{{"rows", 1}, {"cols", 2}, {"data", {0.3774, 0.6226}}};
  params["gamma"] = json::array({json{{"rows", 1}, {"cols", 2}, {"data", {0.25, 0.5}}}});
  doc["params"] = std::move(params);
  doc["stats"] = json{{"ll", -123.456},
                      {"npar", 9},
                      {"n", 100},
                      {"j", 0},
                      {"bic_low", 200.0},
                      {"aic", 190.0},
                      {"icl_bic_low", 210.0},
                      {"class_err_low", 0.1448},
                      {"class_err_high", 0.0},
                      {"entropy_r2_low", 0.6472},
                      {"entropy_r2_high", 1.0},
                      {"vcov_pseudo_inverse", false}};
  doc["inference"] = json{
      {"alpha", json::array()},
      {"gamma", json::array({json{{"name", "gamma(Intercept|C2)"},
                                  {"estimate", 0.25},
                                  {"se", 0.1},
                                  {"z", 2.5},
                                  {"p", 0.0124}},
                             json{{"name", "gamma(z1|C2)"},
                                  {"estimate", 0.5},
                                  {"se", 0.2},
                                  {"z", -2.5},
                                  {"p", 0.0124}}})}};
  return doc;
}

}  // namespace

TEST_CASE("fit documents expose the full schema") {
  const FitResult& fit = example_fit();
  const json doc = json::parse(fit_to_json(fit, "multilc fit --input sim.csv", false));

  CHECK(doc.at("schema_version").get<int>() == 1);
  CHECK(doc.at("kind").get<std::string>() == "fit");
  CHECK(doc.at("call").get<std::string>() == "multilc fit --input sim.csv");

  const json& spec = doc.at("spec");
  CHECK(spec.at("t").get<int>() == 3);
  CHECK(spec.at("m").get<int>() == 2);
  CHECK(spec.at("estimator").get<std::string>() == "two_step");
  CHECK(spec.at("grouped").get<bool>());
  CHECK(spec.at("n").get<int>() == 300);
  CHECK(spec.at("j").get<int>() == 15);
  CHECK(spec.at("items").size() == 8);
  CHECK(spec.at("covariates") == json::array({"z1"}));
  CHECK(spec.at("group_covariates") == json::array({"w1"}));
  CHECK(spec.at("groups").size() == 15);

  const json& params = doc.at("params");
  CHECK(params.at("phi").size() == 8);
  CHECK(params.at("phi")[0].at("rows").get<int>() == 3);
  CHECK(params.at("omega_avg").size() == 2);
  CHECK(params.at("pi_avg").at("rows").get<int>() == 2);
  CHECK(params.at("pi_avg").at("cols").get<int>() == 3);
  CHECK(params.contains("alpha"));
  CHECK(params.at("gamma").size() == 2);
  CHECK_FALSE(params.contains("omega"));  // both levels are logistic here

  const json& stats = doc.at("stats");
  for (const char* key : {"ll", "bic_low", "bic_high", "aic", "icl_bic_low", "icl_bic_high",
                          "class_err_low", "entropy_r2_low"}) {
    CHECK(stats.contains(key));
  }
  CHECK(stats.at("npar").get<int>() ==
        8 * 3 + 2 * 2 * 2 + 1 * 2);  // responses + gamma blocks + alpha row

  CHECK(doc.at("inference").at("alpha").size() == 2);
  CHECK(doc.at("inference").at("gamma").size() == 8);
  CHECK_FALSE(doc.contains("extended"));
}

TEST_CASE("the extended document adds posteriors and the covariance matrix") {
  const FitResult& fit = example_fit();
  const json doc = json::parse(fit_to_json(fit, "call", true));
  const json& ext = doc.at("extended");
  CHECK(ext.at("posterior_low").at("rows").get<int>() == 300);
  CHECK(ext.at("posterior_low").at("cols").get<int>() == 3);
  CHECK(ext.at("posterior_high").at("rows").get<int>() == 15);
  CHECK(ext.at("vcov").at("rows").get<int>() == 10);
  CHECK(ext.at("coef_names").size() == 10);
  CHECK(ext.at("coef_names")[0].get<std::string>() == "alpha(Intercept|G2)");
}

TEST_CASE("ungrouped fits omit the group-level criteria from the document") {
  const RawTable t = make_table({{"y1", {"0", "1", "0", "1", "1", "0"}},
                                 {"y2", {"1", "0", "1", "0", "1", "0"}},
                                 {"y3", {"1", "1", "0", "0", "1", "0"}}});
  IngestSpec spec;
  spec.items = {"y1", "y2", "y3"};
  const IngestResult data = ingest(t, spec);
  FitOptions opts;
  opts.n_class_low = 2;
  opts.compute_vcov = false;
  const FitResult fit = fit_model(data, opts);
  const json doc = json::parse(fit_to_json(fit, "call", false));
  CHECK_FALSE(doc.at("spec").at("grouped").get<bool>());
  CHECK(doc.at("spec").at("j").get<int>() == 0);
  CHECK_FALSE(doc.at("stats").contains("bic_high"));
  CHECK_FALSE(doc.at("stats").contains("icl_bic_high"));
  CHECK(doc.at("params").contains("pi"));
  CHECK_FALSE(doc.contains("inference"));  // no vcov requested
}

TEST_CASE("the summary renderer reproduces the reference layout byte for byte") {
  const std::vector<std::string> expected_lines = {
      "",
      "CALL:",
      "multilc fit demo.csv",
      "",
      "SPECIFICATION:",
      std::string(38, ' '),
      " Single-level LC model with covariates",
      "",
      "ESTIMATION DETAILS:",
      "",
      " EMiter LLfirst LLlast",
      "     12  -130.5 -123.5",
      "",
      "---------------------------",
      "",
      "CLASS PROPORTIONS:",
      std::string(12, ' '),
      "P(C1) 0.3774",
      "P(C2) 0.6226",
      "",
      "RESPONSE PROBABILITIES:",
      "",
      "               C1     C2",
      "P(y1|C)    0.2000 0.7000",
      "P(att=a|C) 0.5000 0.2000",
      "P(att=b|C) 0.2500 0.3000",
      "P(att=c|C) 0.2500 0.5000",
      "",
      "---------------------------",
      "",
      "MODEL AND CLASSIFICATION STATISTICS:",
      std::string(15, ' '),
      "ClassErr 0.1448",
      "EntR-sqr 0.6472",
      "BIC         200",
      "AIC         190",
      "",
      "",
      "---------------------------",
      "",
      "LOGISTIC MODEL FOR LOWER-LEVEL CLASS MEMBERSHIP:",
      "",
      "",
      "MODEL FOR C2 (BASE C1)",
      "",
      "                     Gamma   S.E. Z-score   p-value",
      "gamma(Intercept|C2) 0.2500 0.1000  2.5000 0.0124** ",
      "gamma(z1|C2)        0.5000 0.2000 -2.5000 0.0124** ",
      "",
      "",
      " *** p < 0.01, ** p < 0.05, * p < 0.1",
  };
  std::string expected;
  for (const std::string& line : expected_lines) expected += line + "\n";
  const std::string rendered = render_summary(handcrafted_doc().dump(2));
  CHECK(rendered == expected);
}

TEST_CASE("rendering is a pure function of the document") {
  const FitResult& fit = example_fit();
  const std::string doc = fit_to_json(fit, "multilc fit --input sim.csv", false);
  const std::string once = render_summary(doc);
  // Reserialize through a JSON round trip (different whitespace, same values).
  const std::string compact = json::parse(doc).dump();
  CHECK(render_summary(compact) == once);
}

TEST_CASE("multilevel summaries carry both levels and all coefficient blocks") {
  const FitResult& fit = example_fit();
  const std::string out = render_summary(fit_to_json(fit, "call", false));

  CHECK(out.find(" Multilevel LC model with lower- and higher-level covariates\n") !=
        std::string::npos);
  CHECK(out.find("GROUP PROPORTIONS (SAMPLE MEAN):\n") != std::string::npos);
  CHECK(out.find("CLASS PROPORTIONS (SAMPLE MEAN):\n") != std::string::npos);
  CHECK(out.find("P(G1)") != std::string::npos);
  CHECK(out.find("P(C1|G)") != std::string::npos);
  CHECK(out.find("R2entrlow") != std::string::npos);
  CHECK(out.find("BIChigh") != std::string::npos);
  CHECK(out.find("LOGISTIC MODEL FOR HIGHER-LEVEL CLASS MEMBERSHIP:\n") != std::string::npos);
  CHECK(out.find("MODEL FOR G2 (BASE G1)\n") != std::string::npos);
  // The per-group blocks of the class-membership model, trailing space and all.
  CHECK(out.find("MODEL FOR C2 (BASE C1) GIVEN G1 \n") != std::string::npos);
  CHECK(out.find("MODEL FOR C3 (BASE C1) GIVEN G2 \n") != std::string::npos);
  CHECK(count_substr(out, "---------------------------") == 4);
  CHECK(count_substr(out, " *** p < 0.01, ** p < 0.05, * p < 0.1") > 0);
}

TEST_CASE("invalid fit documents are rejected with input errors") {
  CHECK_THROWS_AS(render_summary("not json"), InputError);
  CHECK_THROWS_AS(render_summary("{}"), InputError);
  json doc = handcrafted_doc();
  doc["schema_version"] = 2;
  CHECK_THROWS_AS(render_summary(doc.dump()), InputError);
  CHECK_THROWS_AS(render_svg("not json", true, {}), InputError);
  CHECK_THROWS_AS(render_svg("{}", true, {}), InputError);
}

TEST_CASE("the profile chart is well-formed SVG with one bar per item and class") {
  const FitResult& fit = example_fit();
  const std::string doc = fit_to_json(fit, "call", false);
  const std::string svg = render_svg(doc, false, {});
  CHECK(xml_well_formed(svg));
  CHECK(svg.find("width=\"960\" height=\"640\"") != std::string::npos);
  CHECK(count_substr(svg, "class=\"bar\"") == 8 * 3);
  CHECK(svg.find(">C1<") != std::string::npos);
  CHECK(svg.find(">C3<") != std::string::npos);
  CHECK(svg.find("rotate(-90") != std::string::npos);  // vertical item labels

  const std::string named = render_svg(doc, true, {"Max", "Mid", "Min"});
  CHECK(xml_well_formed(named));
  CHECK(named.find(">Max<") != std::string::npos);
  CHECK_THROWS_AS(render_svg(doc, true, {"only", "two"}), InputError);
}

TEST_CASE("item names are escaped in the chart") {
  json doc = handcrafted_doc();
  doc["spec"]["items"][0]["name"] = "a&b<c>";
  const std::string svg = render_svg(doc.dump(), true, {});
  CHECK(xml_well_formed(svg));
  CHECK(svg.find("a&amp;b&lt;c&gt;") != std::string::npos);
  CHECK(count_substr(svg, "class=\"bar\"") == 2 * 2);
}

TEST_CASE("generating models parse from JSON and round-trip into the simulator") {
  const std::string text = R"({
    "t": 2, "m": 2, "group_column": "cty",
    "items": [
      {"name": "y1", "categories": ["0", "1"], "phi": [[0.9, 0.1], [0.2, 0.8]]},
      {"name": "y2", "categories": ["0", "1"], "phi": [[0.8, 0.2], [0.3, 0.7]]}
    ],
    "covariates": [
      {"name": "z1", "dist": "bernoulli", "p": 0.4},
      {"name": "z2", "dist": "normal", "mean": 1.0, "sd": 2.0}
    ],
    "group_covariates": [{"name": "w1", "dist": "fixed", "value": 3.0}],
    "alpha": [[0.5, -0.25]],
    "gamma": [[[0.3, 0.1, -0.2]], [[-0.4, 0.2, 0.0]]]
  })";
  const TrueModel truth = parse_true_model(text);
  CHECK(truth.t == 2);
  CHECK(truth.m == 2);
  CHECK(truth.group_column == "cty");
  REQUIRE(truth.items.size() == 2);
  CHECK(truth.items[1].name == "y2");
  CHECK(truth.phi[0](1, 1) == 0.8);
  REQUIRE(truth.covariates.size() == 2);
  CHECK(truth.covariates[0].kind == CovariateGen::Kind::bernoulli);
  CHECK(truth.covariates[0].p == 0.4);
  CHECK(truth.covariates[1].kind == CovariateGen::Kind::normal);
  CHECK(truth.covariates[1].sd == 2.0);
  CHECK(truth.group_covariates[0].kind == CovariateGen::Kind::fixed);
  CHECK(truth.alpha(0, 1) == -0.25);
  REQUIRE(truth.gamma.size() == 2);
  CHECK(truth.gamma[1](0, 0) == -0.4);

  const SimResult sim = simulate_dataset(truth, 3, {4}, 5);
  CHECK(sim.data.n_rows() == 12);
  CHECK(sim.data.columns[0].name == "cty");
}

TEST_CASE("malformed generating models are rejected") {
  CHECK_THROWS_AS(parse_true_model("{"), InputError);
  CHECK_THROWS_AS(parse_true_model("{\"t\": 2}"), InputError);  // no items
  // phi rows must match T.
  CHECK_THROWS_AS(parse_true_model(R"({"t": 2, "items": [
    {"name": "y1", "categories": ["0", "1"], "phi": [[0.9, 0.1]]}]})"),
                  InputError);
  // Unknown covariate distribution.
  CHECK_THROWS_AS(parse_true_model(R"({"t": 1, "items": [
    {"name": "y1", "categories": ["0", "1"], "phi": [[0.9, 0.1]]}],
    "covariates": [{"name": "z", "dist": "poisson"}]})"),
                  InputError);
  // Out-of-range parameters.
  CHECK_THROWS_AS(parse_true_model(R"({"t": 1, "items": [
    {"name": "y1", "categories": ["0", "1"], "phi": [[0.9, 0.1]]}],
    "covariates": [{"name": "z", "dist": "bernoulli", "p": 1.5}]})"),
                  InputError);
  CHECK_THROWS_AS(parse_true_model(R"({"t": 1, "items": [
    {"name": "y1", "categories": ["0", "1"], "phi": [[0.9, 0.1]]}],
    "covariates": [{"name": "z", "dist": "normal", "sd": -1}]})"),
                  InputError);
}
