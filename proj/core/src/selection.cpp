#include "multilc/selection.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "multilc/aggregate.hpp"
#include "multilc/estimators.hpp"

namespace multilc {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Job {
  int t = 1;
  int m = 1;
  int step = 0;
};

// Evaluates the given cells with a fixed-size worker pool. Each cell derives
// its own RNG stream from (T, M) inside the init pipeline, so the result is
// identical for any worker count. Input errors and numerical failures are
// recorded on the cell; anything else is a bug and is rethrown.
std::vector<SelectionCell> run_cells(const Dataset& meas, const std::vector<Job>& jobs,
                                     const SelectionOptions& opts) {
  std::vector<SelectionCell> cells(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> fatal_seen{false};
  std::exception_ptr fatal;
  std::mutex fatal_mx;

  auto worker = [&] {
    for (;;) {
      const std::size_t at = next.fetch_add(1);
      if (at >= jobs.size() || fatal_seen.load()) return;
      const Job& job = jobs[at];
      SelectionCell cell;
      cell.t = job.t;
      cell.m = job.m;
      cell.step = job.step;
      cell.npar = count_free_parameters(meas.items, job.t, job.m, 1, 1);
      cell.ll = cell.bic_low = cell.bic_high = cell.aic = kNaN;
      cell.icl_bic_low = cell.icl_bic_high = kNaN;
      try {
        const MeasurementCellFit fit =
            fit_measurement_cell(meas, job.t, job.m, opts.seed, opts.em, opts.init);
        const Index j_count = meas.grouped() ? meas.n_groups() : 0;
        const InformationCriteria ic =
            information_criteria(fit.trace.ll_last, cell.npar, meas.n(), j_count, fit.post);
        cell.ll = ic.ll;
        cell.bic_low = ic.bic_low;
        cell.bic_high = ic.bic_high;
        cell.aic = ic.aic;
        cell.icl_bic_low = ic.icl_bic_low;
        cell.icl_bic_high = ic.icl_bic_high;
        cell.converged = fit.trace.converged;
        if (!cell.converged) cell.error = "EM did not converge within the iteration limit";
      } catch (const InputError& e) {
        cell.error = e.what();
      } catch (const NumericalError& e) {
        cell.error = e.what();
      } catch (...) {
        const std::lock_guard<std::mutex> lock(fatal_mx);
        if (!fatal) fatal = std::current_exception();
        fatal_seen.store(true);
        return;
      }
      cells[at] = std::move(cell);
    }
  };

  const int workers =
      std::max(1, std::min(opts.threads, static_cast<int>(jobs.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (fatal_seen.load()) std::rethrow_exception(fatal);
  return cells;
}

// First strict minimum in evaluation order, so earlier grid cells (smaller T,
// then smaller M) win ties. Returns -1 when no usable cell exists.
int best_index(const std::vector<SelectionCell>& cells, std::size_t from, std::size_t count,
               double SelectionCell::* field) {
  int best = -1;
  for (std::size_t i = from; i < from + count; ++i) {
    const SelectionCell& cell = cells[i];
    if (!cell.converged || !std::isfinite(cell.*field)) continue;
    if (best < 0 || cell.*field < cells[static_cast<std::size_t>(best)].*field) {
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::vector<int> checked_grid(std::vector<int> grid, const char* what) {
  if (grid.empty()) grid = {1};
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.front() < 1) {
    throw InputError(std::string(what) + " class counts must be >= 1");
  }
  return grid;
}

std::string csv_number(double v) {
  return std::isfinite(v) ? fmt::format("{:.6f}", v) : std::string();
}

}  // namespace

SelectionResult select_classes(const Dataset& measurement, const SelectionOptions& opts) {
  const std::vector<int> t_grid = checked_grid(opts.t_grid, "low-level");
  const std::vector<int> m_grid = checked_grid(opts.m_grid, "high-level");
  if (m_grid.back() > 1 && !measurement.grouped()) {
    throw InputError("high-level class counts above 1 require group ids");
  }

  SelectionResult result;
  result.sequential = opts.sequential;

  if (!opts.sequential) {
    std::vector<Job> jobs;
    for (const int t : t_grid) {
      for (const int m : m_grid) jobs.push_back(Job{t, m, 0});
    }
    result.cells = run_cells(measurement, jobs, opts);
    const int best = best_index(result.cells, 0, result.cells.size(), &SelectionCell::bic_low);
    if (best < 0) throw NumericalError("model selection failed: no candidate converged");
    result.best_t = result.cells[static_cast<std::size_t>(best)].t;
    result.best_m = result.cells[static_cast<std::size_t>(best)].m;
    return result;
  }

  // Stage 1: choose T among single-level fits by low-level BIC.
  std::vector<Job> jobs;
  for (const int t : t_grid) jobs.push_back(Job{t, 1, 1});
  result.cells = run_cells(measurement, jobs, opts);
  int best = best_index(result.cells, 0, result.cells.size(), &SelectionCell::bic_low);
  if (best < 0) throw NumericalError("model selection failed: no single-level candidate converged");
  int t_star = result.cells[static_cast<std::size_t>(best)].t;

  if (m_grid.back() == 1) {
    result.best_t = t_star;
    result.best_m = 1;
    return result;
  }

  // Stage 2: choose M at the stage-1 T by high-level BIC.
  jobs.clear();
  for (const int m : m_grid) jobs.push_back(Job{t_star, m, 2});
  std::vector<SelectionCell> stage2 = run_cells(measurement, jobs, opts);
  const std::size_t from2 = result.cells.size();
  result.cells.insert(result.cells.end(), stage2.begin(), stage2.end());
  best = best_index(result.cells, from2, stage2.size(), &SelectionCell::bic_high);
  if (best < 0) throw NumericalError("model selection failed: no multilevel candidate converged");
  const int m_star = result.cells[static_cast<std::size_t>(best)].m;

  // Stage 3: re-scan T at the chosen M by low-level BIC.
  jobs.clear();
  for (const int t : t_grid) jobs.push_back(Job{t, m_star, 3});
  std::vector<SelectionCell> stage3 = run_cells(measurement, jobs, opts);
  const std::size_t from3 = result.cells.size();
  result.cells.insert(result.cells.end(), stage3.begin(), stage3.end());
  best = best_index(result.cells, from3, stage3.size(), &SelectionCell::bic_low);
  if (best < 0) throw NumericalError("model selection failed: no candidate converged at chosen M");
  t_star = result.cells[static_cast<std::size_t>(best)].t;

  result.best_t = t_star;
  result.best_m = m_star;
  return result;
}

std::string selection_table_csv(const SelectionResult& result) {
  std::string out = "T,M,ll,npar,bic_low,bic_high,aic,icl_bic_low,icl_bic_high,converged\n";
  for (const SelectionCell& cell : result.cells) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", cell.t, cell.m, csv_number(cell.ll),
                       cell.npar, csv_number(cell.bic_low), csv_number(cell.bic_high),
                       csv_number(cell.aic), csv_number(cell.icl_bic_low),
                       csv_number(cell.icl_bic_high), cell.converged ? "true" : "false");
  }
  return out;
}

std::vector<int> parse_class_range(const std::string& text) {
  const auto parse_int = [&](const std::string& part) {
    if (part.empty()) throw InputError("invalid class count '" + text + "'");
    char* end = nullptr;
    const long v = std::strtol(part.c_str(), &end, 10);
    if (end != part.c_str() + part.size() || v < 1 || v > 1000) {
      throw InputError("invalid class count '" + part + "'");
    }
    return static_cast<int>(v);
  };
  const std::size_t colon = text.find(':');
  if (colon == std::string::npos) return {parse_int(text)};
  const int lo = parse_int(text.substr(0, colon));
  const int hi = parse_int(text.substr(colon + 1));
  if (hi < lo) throw InputError("class range '" + text + "' must be ascending");
  std::vector<int> grid;
  for (int v = lo; v <= hi; ++v) grid.push_back(v);
  return grid;
}

}  // namespace multilc
