#include "multilc/data.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>

namespace multilc {

namespace {

std::string trimmed(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

bool parse_long(const std::string& s, long& out) {
  const std::string t = trimmed(s);
  if (t.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtol(t.c_str(), &end, 10);
  return errno == 0 && end == t.c_str() + t.size();
}

bool parse_double(const std::string& s, double& out) {
  const std::string t = trimmed(s);
  if (t.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(t.c_str(), &end);
  return errno == 0 && end == t.c_str() + t.size();
}

ColumnType infer_type(const std::vector<std::string>& cells) {
  bool any = false;
  bool all_int = true;
  bool all_real = true;
  for (const auto& c : cells) {
    if (is_missing_cell(c)) continue;
    any = true;
    long l;
    double d;
    if (!parse_long(c, l)) all_int = false;
    if (!parse_double(c, d)) all_real = false;
    if (!all_real) break;
  }
  if (!any) return ColumnType::text;
  if (all_int) return ColumnType::integer;
  if (all_real) return ColumnType::real;
  return ColumnType::text;
}

// Splits CSV content into records of fields per RFC 4180.
std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (content.size() >= 3 && content.compare(0, 3, "\xEF\xBB\xBF") == 0) {
    content.erase(0, 3);  // UTF-8 BOM
  }

  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  size_t line = 1;

  auto end_field = [&] {
    record.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record.clear();
  };

  for (size_t i = 0; i < content.size(); ++i) {
    const char c = content[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
          // Only a separator or end of record may follow a closing quote.
          if (i + 1 < content.size() && content[i + 1] != ',' && content[i + 1] != '\r' &&
              content[i + 1] != '\n') {
            throw InputError("malformed CSV: text after closing quote on line " +
                             std::to_string(line));
          }
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started && !field.empty()) {
          throw InputError("malformed CSV: quote inside unquoted field on line " +
                           std::to_string(line));
        }
        quoted = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < content.size() && content[i + 1] == '\n') ++i;
        end_record();
        ++line;
        break;
      case '\n':
        end_record();
        ++line;
        break;
      default:
        field += c;
        field_started = true;
        break;
    }
  }
  if (quoted) throw InputError("malformed CSV: unterminated quoted field");
  // Flush a final record not ended by a newline.
  if (field_started || !field.empty() || !record.empty()) end_record();
  return records;
}

}  // namespace

bool is_missing_cell(const std::string& cell) {
  const std::string t = trimmed(cell);
  return t.empty() || t == "NA";
}

bool RawTable::has_column(const std::string& name) const {
  for (const auto& c : columns) {
    if (c.name == name) return true;
  }
  return false;
}

const Column& RawTable::column(const std::string& name) const {
  for (const auto& c : columns) {
    if (c.name == name) return c;
  }
  throw InputError("column not found: " + name);
}

RawTable load_csv(std::istream& in) {
  const auto records = parse_csv(in);
  if (records.empty()) throw InputError("empty CSV: header row required");

  const auto& header = records[0];
  std::set<std::string> seen;
  RawTable table;
  table.columns.resize(header.size());
  for (size_t j = 0; j < header.size(); ++j) {
    const std::string name = trimmed(header[j]);
    if (name.empty()) throw InputError("empty column name in CSV header");
    if (!seen.insert(name).second) throw InputError("duplicate column name in CSV header: " + name);
    table.columns[j].name = name;
    table.columns[j].cells.reserve(records.size() - 1);
  }

  for (size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != header.size()) {
      throw InputError("CSV row " + std::to_string(r + 1) + " has " +
                       std::to_string(records[r].size()) + " fields, expected " +
                       std::to_string(header.size()));
    }
    for (size_t j = 0; j < header.size(); ++j) table.columns[j].cells.push_back(records[r][j]);
  }

  for (auto& c : table.columns) c.type = infer_type(c.cells);
  return table;
}

RawTable load_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path);
  return load_csv(in);
}

RawTable load_csv_file(const std::string& path, const std::vector<std::string>& required_cols) {
  RawTable table = load_csv_file(path);
  for (const auto& name : required_cols) {
    if (!table.has_column(name)) throw InputError("column not found in " + path + ": " + name);
  }
  return table;
}

namespace {

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (const char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

}  // namespace

void write_csv(const RawTable& table, std::ostream& os) {
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c > 0) os << ',';
    os << csv_escape(table.columns[c].name);
  }
  os << '\n';
  const Index rows = table.n_rows();
  for (Index r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      if (c > 0) os << ',';
      os << csv_escape(table.columns[c].cells[static_cast<std::size_t>(r)]);
    }
    os << '\n';
  }
}

void write_csv_file(const RawTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open file for writing: " + path);
  write_csv(table, out);
  if (!out.good()) throw InputError("failed while writing: " + path);
}

namespace {

// Sorted distinct non-missing values: numeric order for integer columns,
// lexicographic otherwise. Deterministic reference/category assignment.
std::vector<std::string> sorted_levels(const Column& col, const std::vector<Index>& rows) {
  std::set<std::string> distinct;
  for (Index r : rows) {
    const std::string& cell = col.cells[static_cast<size_t>(r)];
    if (!is_missing_cell(cell)) distinct.insert(trimmed(cell));
  }
  std::vector<std::string> levels(distinct.begin(), distinct.end());
  if (col.type == ColumnType::integer) {
    std::sort(levels.begin(), levels.end(), [](const std::string& a, const std::string& b) {
      long la = 0, lb = 0;
      parse_long(a, la);
      parse_long(b, lb);
      return la < lb;
    });
  }
  return levels;
}

int code_of(const ItemSchema& schema, const std::string& cell) {
  const std::string t = trimmed(cell);
  for (size_t c = 0; c < schema.categories.size(); ++c) {
    if (schema.categories[c] == t) return static_cast<int>(c);
  }
  throw InputError("value '" + t + "' not in the category set of item " + schema.name);
}

}  // namespace

ItemEncoding encode_items(const RawTable& table, const std::vector<std::string>& item_cols) {
  if (item_cols.empty()) throw InputError("no item columns given");

  std::vector<const Column*> cols;
  cols.reserve(item_cols.size());
  for (const auto& name : item_cols) cols.push_back(&table.column(name));

  ItemEncoding out;
  for (Index r = 0; r < table.n_rows(); ++r) {
    bool complete = true;
    for (const Column* c : cols) {
      if (is_missing_cell(c->cells[static_cast<size_t>(r)])) {
        complete = false;
        break;
      }
    }
    if (complete) out.rows.push_back(r);
  }

  for (size_t h = 0; h < cols.size(); ++h) {
    ItemSchema schema;
    schema.name = item_cols[h];
    schema.categories = sorted_levels(*cols[h], out.rows);
    if (schema.n_categories() < 2) {
      throw InputError("item " + schema.name +
                       " has fewer than two observed categories; response probabilities "
                       "are unidentifiable");
    }
    out.items.push_back(std::move(schema));
  }

  out.y = encode_items_with_schema(table, out.items, out.rows);
  return out;
}

IntMatrix encode_items_with_schema(const RawTable& table, const std::vector<ItemSchema>& items,
                                   const std::vector<Index>& rows) {
  IntMatrix y(static_cast<Index>(rows.size()), static_cast<Index>(items.size()));
  for (size_t h = 0; h < items.size(); ++h) {
    const Column& col = table.column(items[h].name);
    for (size_t i = 0; i < rows.size(); ++i) {
      y(static_cast<Index>(i), static_cast<Index>(h)) =
          code_of(items[h], col.cells[static_cast<size_t>(rows[i])]);
    }
  }
  return y;
}

DesignMatrix encode_covariates(const RawTable& table, const std::vector<std::string>& cols,
                               const std::vector<Index>& rows) {
  const Index n = static_cast<Index>(rows.size());
  DesignMatrix out;
  out.names.push_back("(Intercept)");
  std::vector<Vector> columns;
  columns.emplace_back(Vector::Ones(n));

  for (const auto& name : cols) {
    const Column& col = table.column(name);
    for (Index r : rows) {
      if (is_missing_cell(col.cells[static_cast<size_t>(r)])) {
        throw InputError("missing value in covariate " + name + "; filter rows first");
      }
    }
    if (col.type == ColumnType::text) {
      const auto levels = sorted_levels(col, rows);
      if (levels.size() < 2) {
        throw InputError("categorical covariate " + name + " is constant; cannot encode");
      }
      // One dummy per non-reference level; reference = first sorted level.
      for (size_t l = 1; l < levels.size(); ++l) {
        Vector v(n);
        for (Index i = 0; i < n; ++i) {
          v[i] = trimmed(col.cells[static_cast<size_t>(rows[static_cast<size_t>(i)])]) == levels[l]
                     ? 1.0
                     : 0.0;
        }
        out.names.push_back(name + "." + levels[l]);
        columns.push_back(std::move(v));
      }
    } else {
      Vector v(n);
      for (Index i = 0; i < n; ++i) {
        double d = 0.0;
        parse_double(col.cells[static_cast<size_t>(rows[static_cast<size_t>(i)])], d);
        v[i] = d;
      }
      out.names.push_back(name);
      columns.push_back(std::move(v));
    }
  }

  out.z.resize(n, static_cast<Index>(columns.size()));
  for (size_t j = 0; j < columns.size(); ++j) out.z.col(static_cast<Index>(j)) = columns[j];
  return out;
}

std::vector<Index> filter_complete(const RawTable& table, const std::vector<std::string>& cols,
                                   const std::vector<Index>& rows) {
  std::vector<const Column*> selected;
  selected.reserve(cols.size());
  for (const auto& name : cols) selected.push_back(&table.column(name));

  std::vector<Index> kept;
  kept.reserve(rows.size());
  for (Index r : rows) {
    bool complete = true;
    for (const Column* c : selected) {
      if (is_missing_cell(c->cells[static_cast<size_t>(r)])) {
        complete = false;
        break;
      }
    }
    if (complete) kept.push_back(r);
  }
  return kept;
}

namespace {

// Assigns group indices by first appearance and builds the per-group row
// lists and the group-level design matrix.
void attach_groups(Dataset& data, const RawTable& table, const std::string& group_col,
                   const std::vector<std::string>& zh_cols) {
  const Column& gcol = table.column(group_col);
  std::map<std::string, int> index_of;
  for (size_t i = 0; i < data.source_rows.size(); ++i) {
    const std::string label = trimmed(gcol.cells[static_cast<size_t>(data.source_rows[i])]);
    auto it = index_of.find(label);
    int g;
    if (it == index_of.end()) {
      g = static_cast<int>(data.group_labels.size());
      index_of.emplace(label, g);
      data.group_labels.push_back(label);
      data.rows_by_group.emplace_back();
    } else {
      g = it->second;
    }
    data.group_of.push_back(g);
    data.rows_by_group[static_cast<size_t>(g)].push_back(static_cast<Index>(i));
  }

  // Group-level covariates must be constant within each group; the design
  // row is built from one representative source row per group.
  const Index j_count = data.n_groups();
  for (const auto& name : zh_cols) {
    const Column& col = table.column(name);
    for (Index g = 0; g < j_count; ++g) {
      const auto& rows = data.rows_by_group[static_cast<size_t>(g)];
      const std::string first = trimmed(col.cells[static_cast<size_t>(data.source_rows[rows[0]])]);
      for (Index i : rows) {
        if (trimmed(col.cells[static_cast<size_t>(data.source_rows[i])]) != first) {
          throw InputError("group covariate " + name + " varies within group " +
                           data.group_labels[static_cast<size_t>(g)]);
        }
      }
    }
  }

  std::vector<Index> representative(static_cast<size_t>(j_count));
  for (Index g = 0; g < j_count; ++g) {
    representative[static_cast<size_t>(g)] =
        data.source_rows[data.rows_by_group[static_cast<size_t>(g)][0]];
  }
  DesignMatrix dm = encode_covariates(table, zh_cols, representative);
  data.z_high = std::move(dm.z);
  data.z_high_names = std::move(dm.names);
}

Dataset build_dataset(const RawTable& table, const IngestSpec& spec,
                      const std::vector<ItemSchema>& items, const std::vector<Index>& rows,
                      bool with_low_covariates) {
  Dataset data;
  data.items = items;
  data.source_rows = rows;
  data.y = encode_items_with_schema(table, items, rows);

  DesignMatrix low = encode_covariates(
      table, with_low_covariates ? spec.covariates : std::vector<std::string>{}, rows);
  data.z_low = std::move(low.z);
  data.z_low_names = std::move(low.names);

  if (!spec.group.empty()) {
    attach_groups(data, table, spec.group,
                  with_low_covariates ? spec.group_covariates : std::vector<std::string>{});
  } else {
    data.z_high.resize(0, 1);
    data.z_high_names = {"(Intercept)"};
  }
  return data;
}

}  // namespace

IngestResult ingest(const RawTable& table, const IngestSpec& spec) {
  ItemEncoding enc = encode_items(table, spec.items);
  std::vector<Index> meas_rows = enc.rows;

  // A row without a group id cannot enter multilevel estimation at all, so
  // the group column joins the item completeness filter.
  if (!spec.group.empty()) {
    meas_rows = filter_complete(table, {spec.group}, meas_rows);
  }
  if (meas_rows.empty()) throw InputError("no rows remain after item filtering");

  std::vector<std::string> covariate_cols = spec.covariates;
  covariate_cols.insert(covariate_cols.end(), spec.group_covariates.begin(),
                        spec.group_covariates.end());
  const std::vector<Index> struct_rows = filter_complete(table, covariate_cols, meas_rows);
  if (struct_rows.empty()) throw InputError("no rows remain after covariate filtering");

  IngestResult out;
  out.measurement = build_dataset(table, spec, enc.items, meas_rows, false);
  out.structural = build_dataset(table, spec, enc.items, struct_rows, true);
  out.dropped_item_rows = table.n_rows() - static_cast<Index>(meas_rows.size());
  out.dropped_covariate_rows =
      static_cast<Index>(meas_rows.size()) - static_cast<Index>(struct_rows.size());

  // Row map from the structural subset back into the measurement dataset.
  out.structural_to_measurement.reserve(struct_rows.size());
  size_t m = 0;
  for (Index r : struct_rows) {
    while (meas_rows[m] != r) ++m;
    out.structural_to_measurement.push_back(static_cast<Index>(m));
  }
  return out;
}

}  // namespace multilc
