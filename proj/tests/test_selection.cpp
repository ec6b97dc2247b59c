#include "doctest.h"

#include "multilc/selection.hpp"

#include "support.hpp"

#include <cmath>
#include <sstream>

using namespace multilc;
using namespace testsupport;

namespace {

const IngestResult& selection_data() {
  static const IngestResult data = [] {
    const TrueModel truth = separated_truth(false, false);
    return simulate_ingested(truth, 30, 30, 101);
  }();
  return data;
}

}  // namespace

TEST_CASE("class-range strings parse to inclusive grids") {
  CHECK(parse_class_range("3") == std::vector<int>{3});
  CHECK(parse_class_range("1:4") == std::vector<int>{1, 2, 3, 4});
  CHECK(parse_class_range("2:2") == std::vector<int>{2});
  CHECK_THROWS_AS(parse_class_range("4:1"), InputError);
  CHECK_THROWS_AS(parse_class_range("0"), InputError);
  CHECK_THROWS_AS(parse_class_range("a"), InputError);
  CHECK_THROWS_AS(parse_class_range("2:"), InputError);
  CHECK_THROWS_AS(parse_class_range(""), InputError);
}

TEST_CASE("singleton grids select the only candidate") {
  SelectionOptions opts;
  opts.t_grid = {1};
  opts.m_grid = {1};
  for (const bool sequential : {true, false}) {
    opts.sequential = sequential;
    const SelectionResult res = select_classes(selection_data().measurement, opts);
    CHECK(res.best_t == 1);
    CHECK(res.best_m == 1);
    REQUIRE(res.cells.size() == 1);
    CHECK(res.cells[0].converged);
  }
}

TEST_CASE("grid search recovers the generating class counts both ways") {
  SelectionOptions opts;
  opts.t_grid = {1, 2, 3};
  opts.m_grid = {1, 2};
  opts.seed = 5;

  opts.sequential = true;
  const SelectionResult seq = select_classes(selection_data().measurement, opts);
  CHECK(seq.best_t == 3);
  CHECK(seq.best_m == 2);
  // Stage layout: T grid at M = 1, then the M grid, then the T re-scan.
  REQUIRE(seq.cells.size() == 8);
  CHECK(seq.cells[0].step == 1);
  CHECK(seq.cells[3].step == 2);
  CHECK(seq.cells[3].t == 3);  // stage 2 runs at the stage-1 winner
  CHECK(seq.cells[5].step == 3);
  CHECK(seq.cells[5].m == 2);

  opts.sequential = false;
  const SelectionResult sim = select_classes(selection_data().measurement, opts);
  CHECK(sim.best_t == 3);
  CHECK(sim.best_m == 2);
  REQUIRE(sim.cells.size() == 6);
  // Grid order: T outer ascending, M inner ascending.
  CHECK(sim.cells[0].t == 1);
  CHECK(sim.cells[0].m == 1);
  CHECK(sim.cells[5].t == 3);
  CHECK(sim.cells[5].m == 2);

  // The winning cell must carry the smallest low-level BIC in the grid.
  double best_bic = std::numeric_limits<double>::infinity();
  for (const SelectionCell& cell : sim.cells) {
    if (cell.converged) best_bic = std::min(best_bic, cell.bic_low);
  }
  for (const SelectionCell& cell : sim.cells) {
    if (cell.t == sim.best_t && cell.m == sim.best_m) {
      CHECK(cell.bic_low == doctest::Approx(best_bic).epsilon(1e-12));
    }
  }
}

TEST_CASE("the selection table does not depend on the worker count") {
  SelectionOptions opts;
  opts.t_grid = {1, 2, 3};
  opts.m_grid = {1, 2};
  opts.sequential = false;
  opts.seed = 9;

  opts.threads = 1;
  const std::string csv1 = selection_table_csv(select_classes(selection_data().measurement, opts));
  opts.threads = 4;
  const std::string csv4 = selection_table_csv(select_classes(selection_data().measurement, opts));
  CHECK(csv1 == csv4);
  CHECK(csv1.substr(0, csv1.find('\n')) ==
        "T,M,ll,npar,bic_low,bic_high,aic,icl_bic_low,icl_bic_high,converged");
  CHECK(count_substr(csv1, "\n") == 7);  // header + six cells
}

TEST_CASE("infeasible cells are recorded and skipped rather than fatal") {
  // Two rows cannot support three clusters, so the T = 3 cell fails while the
  // smaller models still make the comparison.
  const RawTable t = make_table({{"y1", {"0", "1"}}, {"y2", {"1", "0"}}});
  IngestSpec spec;
  spec.items = {"y1", "y2"};
  const IngestResult data = ingest(t, spec);

  SelectionOptions opts;
  opts.t_grid = {1, 2, 3};
  opts.m_grid = {1};
  opts.sequential = false;
  const SelectionResult res = select_classes(data.measurement, opts);
  REQUIRE(res.cells.size() == 3);
  CHECK(res.cells[2].t == 3);
  CHECK_FALSE(res.cells[2].converged);
  CHECK_FALSE(res.cells[2].error.empty());
  CHECK(std::isnan(res.cells[2].ll));
  CHECK(res.best_t >= 1);
  CHECK(res.best_t <= 2);

  // Failed cells render as empty fields, not as "nan".
  const std::string csv = selection_table_csv(res);
  CHECK(csv.find("nan") == std::string::npos);
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);  // header
  std::getline(lines, line);
  std::getline(lines, line);
  std::getline(lines, line);  // T = 3 row
  CHECK(line == "3,1,,8,,,,,,false");
}

TEST_CASE("multilevel grids demand grouped data") {
  const RawTable t = make_table({{"y1", {"0", "1", "0", "1"}}, {"y2", {"1", "0", "1", "0"}}});
  IngestSpec spec;
  spec.items = {"y1", "y2"};
  const IngestResult data = ingest(t, spec);
  SelectionOptions opts;
  opts.t_grid = {1, 2};
  opts.m_grid = {1, 2};
  CHECK_THROWS_AS(select_classes(data.measurement, opts), InputError);
}

TEST_CASE("bad grids are rejected") {
  SelectionOptions opts;
  opts.t_grid = {0, 1};
  CHECK_THROWS_AS(select_classes(selection_data().measurement, opts), InputError);
}
