// Command-line front end: fit, select, simulate, plot.
//
// Exit codes: 0 success, 1 user/input error, 2 numerical or internal failure.
// The model summary goes to stdout; progress and file notes go to stderr.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "multilc/data.hpp"
#include "multilc/estimators.hpp"
#include "multilc/json_io.hpp"
#include "multilc/report.hpp"
#include "multilc/selection.hpp"
#include "multilc/simulate.hpp"
#include "multilc/svg.hpp"

namespace {

using namespace multilc;

struct FitArgs {
  std::string data;
  std::vector<std::string> items;
  std::string classes;
  std::string group;
  std::string group_classes = "1";
  std::vector<std::string> covariates;
  std::vector<std::string> group_covariates;
  std::string estimator = "two_step";
  bool simultaneous = false;
  bool extended = false;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out;
  std::string table_out = "multilc_selection.csv";
  bool verbose = false;
};

// Shared flags of `fit` and `select`, mirroring the estimation interface.
void add_fit_options(CLI::App* cmd, FitArgs& args, bool selecting) {
  cmd->add_option("--data", args.data, "CSV dataset")->required();
  cmd->add_option("--items", args.items, "item (indicator) columns")
      ->required()
      ->delimiter(',');
  cmd->add_option("--classes", args.classes,
                  selecting ? "low-level class counts, a single value or a range a:b"
                            : "number of low-level classes")
      ->required();
  cmd->add_option("--group", args.group, "group id column (enables the multilevel model)");
  cmd->add_option("--group-classes", args.group_classes,
                  selecting ? "high-level class counts, a single value or a range a:b"
                            : "number of high-level classes (default 1)");
  cmd->add_option("--covariates", args.covariates, "lower-level covariate columns")
      ->delimiter(',');
  cmd->add_option("--group-covariates", args.group_covariates,
                  "higher-level covariate columns (constant within groups)")
      ->delimiter(',');
  cmd->add_option("--estimator", args.estimator, "one_step, two_step, or two_stage")
      ->default_str("two_step");
  cmd->add_option("--seed", args.seed, "random seed for the refined initialization");
  cmd->add_option("--out", args.out, "output path for the fit JSON artifact");
  cmd->add_flag("--extended", args.extended, "include posteriors and vcov in the JSON");
  cmd->add_flag("--verbose", args.verbose, "print per-iteration log-likelihoods to stderr");
  if (selecting) {
    cmd->add_flag("--simultaneous", args.simultaneous,
                  "evaluate the full grid instead of the sequential strategy");
    cmd->add_option("--threads", args.threads, "worker threads for selection cells");
    cmd->add_option("--table-out", args.table_out, "output path for the selection table CSV");
  }
}

int parse_scalar_classes(const std::string& text, const char* what) {
  const std::vector<int> grid = parse_class_range(text);
  if (grid.size() != 1) {
    throw InputError(fmt::format("{} must be a single value here; use the select "
                                 "subcommand for ranges",
                                 what));
  }
  return grid.front();
}

IngestResult load_and_ingest(const FitArgs& args) {
  std::vector<std::string> required = args.items;
  if (!args.group.empty()) required.push_back(args.group);
  required.insert(required.end(), args.covariates.begin(), args.covariates.end());
  required.insert(required.end(), args.group_covariates.begin(), args.group_covariates.end());
  const RawTable table = load_csv_file(args.data, required);

  IngestSpec spec;
  spec.items = args.items;
  spec.group = args.group;
  spec.covariates = args.covariates;
  spec.group_covariates = args.group_covariates;
  return ingest(table, spec);
}

FitOptions make_fit_options(const FitArgs& args, int t, int m) {
  FitOptions opts;
  opts.n_class_low = t;
  opts.n_class_high = m;
  opts.estimator = parse_estimator(args.estimator);
  opts.seed = args.seed;
  if (args.verbose) {
    opts.em.on_iteration = [](const char* engine, int iteration, double ll) {
      fmt::print(stderr, "[{}] iter {:>4}  ll {:.6f}\n", engine, iteration, ll);
    };
  }
  return opts;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open file for writing: " + path);
  out << text;
  if (!out.good()) throw InputError("failed while writing: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Fixed program name so stored CALL lines do not depend on the invocation path.
std::string assemble_call(int argc, char** argv) {
  std::string call = "multilc";
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    call += ' ';
    if (arg.empty() || arg.find(' ') != std::string::npos) {
      call += '\'' + arg + '\'';
    } else {
      call += arg;
    }
  }
  return call;
}

// Fits one specification, writes the JSON artifact, prints the summary.
// The summary is rendered from the serialized JSON, so re-rendering the
// artifact reproduces stdout exactly.
int run_fit(const IngestResult& ingested, const FitArgs& args, int t, int m,
            const std::string& call) {
  const FitResult fit = fit_model(ingested, make_fit_options(args, t, m));
  const std::string doc = fit_to_json(fit, call, args.extended);
  const std::string out_path = args.out.empty() ? "multilc_fit.json" : args.out;
  write_text_file(out_path, doc);
  fmt::print(stderr, "wrote {}\n", out_path);
  fmt::print("{}", render_summary(doc));
  return 0;
}

int cmd_fit(const FitArgs& args, const std::string& call) {
  const int t = parse_scalar_classes(args.classes, "--classes");
  const int m = parse_scalar_classes(args.group_classes, "--group-classes");
  return run_fit(load_and_ingest(args), args, t, m, call);
}

int cmd_select(const FitArgs& args, const std::string& call) {
  const IngestResult ingested = load_and_ingest(args);

  SelectionOptions opts;
  opts.t_grid = parse_class_range(args.classes);
  opts.m_grid = parse_class_range(args.group_classes);
  opts.sequential = !args.simultaneous;
  opts.seed = args.seed;
  opts.threads = args.threads;
  const SelectionResult result = select_classes(ingested.measurement, opts);

  const std::string table = selection_table_csv(result);
  write_text_file(args.table_out, table);
  fmt::print(stderr, "wrote {}\n", args.table_out);
  fmt::print("{}", table);

  // Refit the winner with the full covariate specification, as if it had
  // been requested directly.
  return run_fit(ingested, args, result.best_t, result.best_m, call);
}

int cmd_simulate(const std::string& truth_path, int groups, int group_size,
                 const std::vector<int>& group_sizes, std::uint64_t seed,
                 const std::string& out) {
  const TrueModel truth = load_true_model(truth_path);
  const std::vector<int> sizes = group_sizes.empty() ? std::vector<int>{group_size} : group_sizes;
  const SimResult sim = simulate_dataset(truth, groups, sizes, seed);

  write_csv_file(sim.data, out);
  std::string latent_path = out;
  const std::string suffix = ".csv";
  if (latent_path.size() > suffix.size() &&
      latent_path.compare(latent_path.size() - suffix.size(), suffix.size(), suffix) == 0) {
    latent_path.resize(latent_path.size() - suffix.size());
  }
  latent_path += ".latent.csv";
  write_csv_file(sim.latent, latent_path);
  fmt::print(stderr, "wrote {} and {}\n", out, latent_path);
  return 0;
}

int cmd_plot(const std::string& fit_path, const std::string& out, bool horizontal,
             const std::vector<std::string>& class_labels) {
  const std::string svg = render_svg(read_text_file(fit_path), horizontal, class_labels);
  write_text_file(out, svg);
  fmt::print(stderr, "wrote {}\n", out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maximum-likelihood estimation of single-level and multilevel "
               "latent class models for categorical data"};
  app.require_subcommand(1);

  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand("fit", "estimate one model specification");
  add_fit_options(fit, fit_args, false);

  FitArgs select_args;
  CLI::App* select = app.add_subcommand("select", "choose class counts by BIC over a grid");
  add_fit_options(select, select_args, true);

  std::string truth_path, sim_out = "sim.csv";
  int sim_groups = 0, sim_group_size = 0;
  std::vector<int> sim_group_sizes;
  std::uint64_t sim_seed = 1;
  CLI::App* simulate = app.add_subcommand("simulate", "draw a dataset from a generating model");
  simulate->add_option("--truth", truth_path, "generating model JSON")->required();
  simulate->add_option("--groups", sim_groups, "number of groups")->required();
  simulate->add_option("--group-size", sim_group_size, "units per group");
  simulate->add_option("--group-sizes", sim_group_sizes,
                       "per-group unit counts (recycled over groups)")
      ->delimiter(',');
  simulate->add_option("--seed", sim_seed, "random seed");
  simulate->add_option("--out", sim_out, "output CSV path (latent sidecar alongside)");

  std::string plot_fit, plot_out = "plot.svg";
  bool plot_horizontal = true;
  std::vector<std::string> plot_clab;
  CLI::App* plot = app.add_subcommand("plot", "render response profiles from a fit JSON");
  plot->add_option("--fit", plot_fit, "fit JSON artifact")->required();
  plot->add_option("--out", plot_out, "output SVG path");
  plot->add_flag("--horiz,!--no-horiz", plot_horizontal,
                 "horizontal item labels (default); --no-horiz rotates them");
  plot->add_option("--clab", plot_clab, "class labels for the legend (must match T)")
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const std::string call = assemble_call(argc, argv);
  try {
    if (fit->parsed()) return cmd_fit(fit_args, call);
    if (select->parsed()) return cmd_select(select_args, call);
    if (simulate->parsed()) {
      if (sim_group_size <= 0 && sim_group_sizes.empty()) {
        throw InputError("either --group-size or --group-sizes is required");
      }
      return cmd_simulate(truth_path, sim_groups, sim_group_size, sim_group_sizes, sim_seed,
                          sim_out);
    }
    if (plot->parsed()) return cmd_plot(plot_fit, plot_out, plot_horizontal, plot_clab);
    throw InputError("no subcommand given");
  } catch (const InputError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  } catch (const NumericalError& e) {
    fmt::print(stderr, "numerical error: {}\n", e.what());
    return 2;
  } catch (const InternalError& e) {
    fmt::print(stderr, "internal error (please report): {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  }
}
