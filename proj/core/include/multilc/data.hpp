#pragma once

#include "multilc/types.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace multilc {

enum class ColumnType { integer, real, text };

struct Column {
  std::string name;
  ColumnType type = ColumnType::text;
  std::vector<std::string> cells;  // raw cell text, exactly as read
};

// Column-typed view of a CSV file; values are untouched strings, with type
// inferred per column from the non-missing cells.
struct RawTable {
  std::vector<Column> columns;

  Index n_rows() const { return columns.empty() ? 0 : static_cast<Index>(columns[0].cells.size()); }
  bool has_column(const std::string& name) const;
  const Column& column(const std::string& name) const;  // throws InputError
};

// A cell counts as missing when empty or the literal "NA" (after trimming).
bool is_missing_cell(const std::string& cell);

// RFC-4180 parser: quoted fields, escaped quotes, CR/LF line ends, header
// row required with unique nonempty names.
RawTable load_csv(std::istream& in);
RawTable load_csv_file(const std::string& path);
// Convenience: load and verify that all the named columns exist.
RawTable load_csv_file(const std::string& path, const std::vector<std::string>& required_cols);

// Writes the table back out as CSV, quoting fields only where required.
void write_csv(const RawTable& table, std::ostream& os);
void write_csv_file(const RawTable& table, const std::string& path);

struct ItemSchema {
  std::string name;
  std::vector<std::string> categories;  // observed codes in sorted order
  int n_categories() const { return static_cast<int>(categories.size()); }
};

// Encoded data for one estimation problem. Multilevel fields are empty for
// ungrouped data; design matrices default to a single intercept column.
struct Dataset {
  IntMatrix y;                          // n x H codes in [0, C_h)
  std::vector<ItemSchema> items;        // size H
  std::vector<int> group_of;            // per-row group in [0, J); empty if ungrouped
  std::vector<std::string> group_labels;          // size J, first-appearance order
  std::vector<std::vector<Index>> rows_by_group;  // size J
  Matrix z_low;                         // n x K, leading intercept column
  Matrix z_high;                        // J x K*, leading intercept column
  std::vector<std::string> z_low_names;   // size K, first "(Intercept)"
  std::vector<std::string> z_high_names;  // size K*
  std::vector<Index> source_rows;       // per-row index into the loaded table

  Index n() const { return y.rows(); }
  Index n_items() const { return y.cols(); }
  Index n_groups() const { return static_cast<Index>(group_labels.size()); }
  bool grouped() const { return !group_of.empty(); }
  bool has_low_covariates() const { return z_low.cols() > 1; }
  bool has_high_covariates() const { return z_high.cols() > 1; }
};

struct ItemEncoding {
  IntMatrix y;                    // rows with complete items only
  std::vector<ItemSchema> items;  // categories sorted (numeric or lexicographic)
  std::vector<Index> rows;        // surviving row indices into the table
};

// Encodes item columns to 0-based codes, dropping rows with any missing item.
// Category order is numeric for integer columns, lexicographic otherwise.
// A column with fewer than two observed categories is an error.
ItemEncoding encode_items(const RawTable& table, const std::vector<std::string>& item_cols);

// Re-encodes a row subset against fixed schemas (used for the structural
// subset so both datasets share one category space).
IntMatrix encode_items_with_schema(const RawTable& table, const std::vector<ItemSchema>& items,
                                   const std::vector<Index>& rows);

struct DesignMatrix {
  Matrix z;                        // leading intercept column of ones
  std::vector<std::string> names;  // "(Intercept)", then columns / dummies
};

// Builds a design matrix over the given rows: numeric columns pass through,
// text columns expand to one dummy per non-reference level named
// "<col>.<level>" (reference = first level in sorted order).
// All selected cells must be non-missing; filter rows first.
DesignMatrix encode_covariates(const RawTable& table, const std::vector<std::string>& cols,
                               const std::vector<Index>& rows);

// Subset of `rows` whose cells in all named columns are non-missing.
std::vector<Index> filter_complete(const RawTable& table, const std::vector<std::string>& cols,
                                   const std::vector<Index>& rows);

struct IngestSpec {
  std::vector<std::string> items;
  std::string group;                          // empty = single level
  std::vector<std::string> covariates;        // lower level
  std::vector<std::string> group_covariates;  // higher level
};

struct IngestResult {
  Dataset measurement;  // complete items (and group id, when grouped)
  Dataset structural;   // measurement rows that also have complete covariates
  std::vector<Index> structural_to_measurement;  // row map between the two
  Index dropped_item_rows = 0;
  Index dropped_covariate_rows = 0;
};

// Applies the missing-data policy: rows missing any item (or the group id)
// are dropped everywhere; rows missing covariates are dropped only from the
// structural dataset. Group-level covariates must be constant within group.
IngestResult ingest(const RawTable& table, const IngestSpec& spec);

}  // namespace multilc
