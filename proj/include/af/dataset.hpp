#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "af/core.hpp"

namespace af {

enum class ColumnKind { numeric, categorical };

/// How one CSV column maps onto encoded feature columns.
struct SourceColumn {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  std::vector<std::string> categories;  // one-hot order = first appearance
  std::optional<double> fill;           // mean imputation value (numeric)
  std::optional<std::string> fill_category;

  friend bool operator==(const SourceColumn&, const SourceColumn&) = default;
};

/// Everything needed to encode new rows exactly like the training file.
struct FeatureSchema {
  std::vector<SourceColumn> columns;
  std::vector<std::string> feature_names;
  std::string target;
  std::vector<std::string> class_labels;

  friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;
};

struct Dataset {
  Matrix<double> features;
  std::vector<std::size_t> labels;
  std::vector<std::string> feature_names;
  std::size_t num_classes = 0;
  FeatureSchema schema;

  std::size_t n() const { return features.rows(); }
  std::size_t p() const { return features.cols(); }
};

struct IngestOptions {
  bool impute_mean = false;
  std::size_t max_categories = 20;
};

/// The four disjoint row sets used by training and evaluation.
struct DataSplit {
  IndexList single;  // base learner training
  IndexList opt;     // policy tree training
  IndexList val;     // configuration and iteration selection
  IndexList test;    // final evaluation only

  friend bool operator==(const DataSplit&, const DataSplit&) = default;
};

struct SplitSizes {
  std::size_t single = 0, opt = 0, val = 0, test = 0;
  friend bool operator==(const SplitSizes&, const SplitSizes&) = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        current.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        current.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back(trim(current));
      current.clear();
    } else {
      current.push_back(ch);
    }
  }
  fields.emplace_back(trim(current));
  return fields;
}

inline bool is_missing(std::string_view cell) { return cell.empty() || cell == "?" || cell == "NA"; }

inline std::optional<double> parse_number(std::string_view cell) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) return std::nullopt;
  return value;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open data file: " + path);
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (table.header.empty()) {
      if (line_no == 1 && fields.front().rfind("\xEF\xBB\xBF", 0) == 0) fields.front().erase(0, 3);
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size())
      throw Error(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(table.header.size()) +
                  " fields, found " + std::to_string(fields.size()));
    table.rows.push_back(std::move(fields));
  }
  if (table.header.empty()) throw Error("data file has no header row: " + path);
  return table;
}

inline std::optional<std::size_t> find_column(const std::vector<std::string>& header, std::string_view name) {
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == name) return c;
  return std::nullopt;
}

inline std::vector<std::string> sorted_class_labels(const std::vector<std::string>& values) {
  std::vector<std::string> distinct = values;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  const bool numeric = std::all_of(distinct.begin(), distinct.end(),
                                   [](const std::string& s) { return parse_number(s).has_value(); });
  if (numeric)
    std::stable_sort(distinct.begin(), distinct.end(), [](const std::string& a, const std::string& b) {
      return *parse_number(a) < *parse_number(b);
    });
  return distinct;
}

// Largest-remainder apportionment of `total` across strata of sizes `counts`
// (proportional to counts / sum). Ties go to the lower stratum index.
inline std::vector<std::size_t> apportion(const std::vector<std::size_t>& counts, std::size_t total) {
  const std::size_t sum = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  std::vector<std::size_t> quota(counts.size(), 0);
  if (sum == 0) return quota;
  std::vector<std::pair<std::size_t, std::size_t>> remainders;  // (remainder, stratum)
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    quota[c] = counts[c] * total / sum;
    assigned += quota[c];
    remainders.emplace_back(counts[c] * total % sum, c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < total && r < remainders.size(); ++r) {
    ++quota[remainders[r].second];
    ++assigned;
  }
  return quota;
}

}  // namespace detail

/// Reads a CSV with a header row. Numeric columns pass through; string
/// columns with at most `max_categories` distinct values are one-hot encoded;
/// the target column becomes labels indexed by sorted distinct value.
inline Dataset load_csv(const std::string& path, const std::string& target, const IngestOptions& options = {}) {
  const auto table = detail::read_csv(path);
  const auto target_col = detail::find_column(table.header, target);
  if (!target_col) throw Error("target column '" + target + "' not found in " + path);
  if (table.rows.empty()) throw Error("data file has no rows: " + path);

  Dataset ds;
  ds.schema.target = target;
  const std::size_t n = table.rows.size();

  std::vector<std::string> raw_labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    raw_labels[i] = table.rows[i][*target_col];
    if (detail::is_missing(raw_labels[i]))
      throw Error("missing target value at data row " + std::to_string(i + 1));
  }
  ds.schema.class_labels = detail::sorted_class_labels(raw_labels);
  ds.num_classes = ds.schema.class_labels.size();
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& cl = ds.schema.class_labels;
    ds.labels[i] = static_cast<std::size_t>(std::find(cl.begin(), cl.end(), raw_labels[i]) - cl.begin());
  }

  // Infer column kinds and encodings.
  std::vector<std::vector<double>> encoded_columns;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c == *target_col) continue;
    SourceColumn col;
    col.name = table.header[c];
    bool numeric = true;
    std::size_t missing = 0;
    for (const auto& row : table.rows) {
      if (detail::is_missing(row[c])) {
        ++missing;
        continue;
      }
      if (!detail::parse_number(row[c])) {
        numeric = false;
        break;
      }
    }
    if (missing > 0 && !options.impute_mean)
      throw Error("column '" + col.name + "' has missing values (enable mean imputation to fill them)");
    if (missing == n) throw Error("column '" + col.name + "' has no values");

    if (numeric) {
      std::vector<double> values(n);
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& cell = table.rows[i][c];
        if (detail::is_missing(cell)) {
          values[i] = std::nan("");
          continue;
        }
        values[i] = *detail::parse_number(cell);
        if (!std::isfinite(values[i]))
          throw Error("non-finite value '" + cell + "' in column '" + col.name + "' at data row " +
                      std::to_string(i + 1));
        sum += values[i];
        ++count;
      }
      if (options.impute_mean) {
        col.fill = sum / static_cast<double>(count);
        for (auto& v : values)
          if (std::isnan(v)) v = *col.fill;
      }
      ds.schema.feature_names.push_back(col.name);
      encoded_columns.push_back(std::move(values));
    } else {
      col.kind = ColumnKind::categorical;
      std::map<std::string, std::size_t> frequency;
      for (const auto& row : table.rows) {
        const auto& cell = row[c];
        if (detail::is_missing(cell)) continue;
        if (std::find(col.categories.begin(), col.categories.end(), cell) == col.categories.end())
          col.categories.push_back(cell);
        ++frequency[cell];
      }
      if (col.categories.size() > options.max_categories)
        throw Error("column '" + col.name + "' has " + std::to_string(col.categories.size()) +
                    " categories; at most " + std::to_string(options.max_categories) + " can be one-hot encoded");
      if (missing > 0) {
        // Mode imputation; first-appearance order breaks ties.
        std::size_t best = 0;
        for (std::size_t k = 1; k < col.categories.size(); ++k)
          if (frequency[col.categories[k]] > frequency[col.categories[best]]) best = k;
        col.fill_category = col.categories[best];
      }
      for (const auto& cat : col.categories) {
        std::vector<double> values(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          const auto& cell = table.rows[i][c];
          const std::string& v = detail::is_missing(cell) ? *col.fill_category : cell;
          values[i] = v == cat ? 1.0 : 0.0;
        }
        ds.schema.feature_names.push_back(col.name + "=" + cat);
        encoded_columns.push_back(std::move(values));
      }
    }
    ds.schema.columns.push_back(std::move(col));
  }

  if (encoded_columns.empty()) throw Error("data file has no feature columns: " + path);
  ds.features = Matrix<double>(n, encoded_columns.size());
  for (std::size_t j = 0; j < encoded_columns.size(); ++j)
    for (std::size_t i = 0; i < n; ++i) ds.features(i, j) = encoded_columns[j][i];
  ds.feature_names = ds.schema.feature_names;
  return ds;
}

/// Rows of a CSV encoded with a stored schema. `labels` is filled only when
/// the target column is present and every value is a known class.
struct EncodedRows {
  Matrix<double> features;
  std::optional<std::vector<std::size_t>> labels;
};

/// Encodes a CSV with a training-time schema. Extra columns are ignored; a
/// missing schema column is an error naming it. Unseen categories encode as
/// all-zero indicator columns.
inline EncodedRows encode_csv(const std::string& path, const FeatureSchema& schema) {
  const auto table = detail::read_csv(path);
  std::vector<std::size_t> positions;
  for (const auto& col : schema.columns) {
    const auto pos = detail::find_column(table.header, col.name);
    if (!pos) throw Error("column '" + col.name + "' required by the model is missing from " + path);
    positions.push_back(*pos);
  }
  EncodedRows out;
  out.features = Matrix<double>(table.rows.size(), schema.feature_names.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    std::size_t j = 0;
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
      const auto& col = schema.columns[c];
      const auto& cell = table.rows[i][positions[c]];
      const bool missing = detail::is_missing(cell);
      if (col.kind == ColumnKind::numeric) {
        double v = 0.0;
        if (missing) {
          if (!col.fill) throw Error("missing value in column '" + col.name + "' at data row " + std::to_string(i + 1));
          v = *col.fill;
        } else {
          const auto parsed = detail::parse_number(cell);
          if (!parsed || !std::isfinite(*parsed))
            throw Error("invalid numeric value '" + cell + "' in column '" + col.name + "'");
          v = *parsed;
        }
        out.features(i, j++) = v;
      } else {
        if (missing && !col.fill_category)
          throw Error("missing value in column '" + col.name + "' at data row " + std::to_string(i + 1));
        const std::string& v = missing ? *col.fill_category : cell;
        for (const auto& cat : col.categories) out.features(i, j++) = v == cat ? 1.0 : 0.0;
      }
    }
  }
  if (const auto t = detail::find_column(table.header, schema.target)) {
    std::vector<std::size_t> labels;
    for (const auto& row : table.rows) {
      const auto& cl = schema.class_labels;
      const auto it = std::find(cl.begin(), cl.end(), row[*t]);
      if (it == cl.end()) return out;
      labels.push_back(static_cast<std::size_t>(it - cl.begin()));
    }
    out.labels = std::move(labels);
  }
  return out;
}

/// Subset sizes for n rows: test 20%, validation 15% of the rest, and the
/// remainder split 60:40 between base-learner and policy training.
inline SplitSizes split_sizes(std::size_t n) {
  SplitSizes s;
  s.test = (2 * n + 5) / 10;     // round(0.2 n)
  s.val = (12 * n + 50) / 100;   // round(0.8 n * 0.15)
  const std::size_t rest = n - s.test - s.val;
  s.single = (6 * rest + 5) / 10;  // round(0.6 rest)
  s.opt = rest - s.single;
  return s;
}

/// Stratified, seeded four-way partition. Every class needs at least four rows.
inline DataSplit partition(const Dataset& ds, std::uint64_t seed) {
  const std::size_t k = ds.num_classes;
  std::vector<IndexList> strata(k);
  for (std::size_t i = 0; i < ds.n(); ++i) strata[ds.labels[i]].push_back(i);
  for (std::size_t c = 0; c < k; ++c)
    if (strata[c].size() < 4)
      throw Error("class '" + (c < ds.schema.class_labels.size() ? ds.schema.class_labels[c] : std::to_string(c)) +
                  "' has " + std::to_string(strata[c].size()) + " rows; partitioning needs at least 4");

  Rng rng(derive_seed(seed, 0x5eed5));
  for (auto& s : strata) rng.shuffle(s);

  const SplitSizes sizes = split_sizes(ds.n());
  std::vector<std::size_t> remaining(k);
  for (std::size_t c = 0; c < k; ++c) remaining[c] = strata[c].size();

  const auto test_q = detail::apportion(remaining, sizes.test);
  for (std::size_t c = 0; c < k; ++c) remaining[c] -= test_q[c];
  const auto val_q = detail::apportion(remaining, sizes.val);
  for (std::size_t c = 0; c < k; ++c) remaining[c] -= val_q[c];
  const auto single_q = detail::apportion(remaining, sizes.single);

  DataSplit split;
  for (std::size_t c = 0; c < k; ++c) {
    const auto& s = strata[c];
    std::size_t pos = 0;
    auto take = [&](IndexList& dst, std::size_t count) {
      dst.insert(dst.end(), s.begin() + static_cast<std::ptrdiff_t>(pos),
                 s.begin() + static_cast<std::ptrdiff_t>(pos + count));
      pos += count;
    };
    take(split.test, test_q[c]);
    take(split.val, val_q[c]);
    take(split.single, single_q[c]);
    take(split.opt, s.size() - pos);
  }
  for (auto* part : {&split.single, &split.opt, &split.val, &split.test}) std::sort(part->begin(), part->end());
  return split;
}

/// Builds an in-memory dataset (used by tests and synthetic benchmarks).
inline Dataset make_dataset(Matrix<double> features, std::vector<std::size_t> labels, std::size_t num_classes = 0) {
  Dataset ds;
  if (features.rows() != labels.size()) throw std::invalid_argument("make_dataset: row/label count mismatch");
  ds.features = std::move(features);
  ds.labels = std::move(labels);
  ds.num_classes = num_classes;
  for (auto y : ds.labels) ds.num_classes = std::max(ds.num_classes, y + 1);
  for (std::size_t j = 0; j < ds.p(); ++j) {
    SourceColumn col;
    col.name = "x" + std::to_string(j);
    ds.schema.columns.push_back(col);
    ds.schema.feature_names.push_back(col.name);
  }
  ds.schema.target = "y";
  for (std::size_t c = 0; c < ds.num_classes; ++c) ds.schema.class_labels.push_back(std::to_string(c));
  ds.feature_names = ds.schema.feature_names;
  return ds;
}

}  // namespace af
