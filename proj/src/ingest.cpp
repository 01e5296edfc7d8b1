#include "ffep/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "ffep/errors.hpp"

namespace ffep {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  s = s.substr(b, e - b);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    out.push_back(trim(std::string_view(line).substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_double(const std::string& token, double& out) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

std::size_t resolve_column(const std::string& ref, const std::vector<std::string>& header,
                           bool has_header, std::size_t n_cols) {
  if (has_header) {
    const auto it = std::find(header.begin(), header.end(), ref);
    if (it == header.end()) throw DataError("unknown column '" + ref + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
  std::size_t idx = 0;
  const auto [ptr, ec] = std::from_chars(ref.data(), ref.data() + ref.size(), idx);
  if (ec != std::errc() || ptr != ref.data() + ref.size() || idx >= n_cols) {
    throw DataError("invalid column reference '" + ref + "'");
  }
  return idx;
}

}  // namespace

RawTable load_csv(const std::filesystem::path& path, const ColumnSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path.string() + "'");
  return parse_csv(in, schema);
}

RawTable parse_csv(std::istream& in, const ColumnSchema& schema) {
  if (schema.label_map.empty()) throw DataError("schema has an empty label mapping");
  for (const auto& [token, value] : schema.label_map) {
    if (value != 1 && value != -1) {
      throw DataError("label mapping for '" + token + "' must be +1 or -1");
    }
  }

  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  std::vector<std::string> header;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split(line, schema.delimiter);
    if (schema.has_header && header.empty()) {
      header = std::move(fields);
      continue;
    }
    if (!rows.empty() && fields.size() != rows.front().size()) {
      throw DataError("row " + std::to_string(line_no) + ": expected " +
                      std::to_string(rows.front().size()) + " fields, found " +
                      std::to_string(fields.size()));
    }
    if (!header.empty() && fields.size() != header.size()) {
      throw DataError("row " + std::to_string(line_no) + ": field count does not match header");
    }
    rows.push_back(std::move(fields));
    line_numbers.push_back(line_no);
  }
  if (rows.empty()) throw DataError("data file contains no rows");
  const std::size_t n_cols = rows.front().size();

  const std::size_t label_col = resolve_column(schema.label_column, header, schema.has_header,
                                               n_cols);
  std::vector<std::size_t> numeric;
  std::vector<std::size_t> categorical;
  for (const auto& ref : schema.numeric_columns) {
    numeric.push_back(resolve_column(ref, header, schema.has_header, n_cols));
  }
  for (const auto& ref : schema.categorical_columns) {
    categorical.push_back(resolve_column(ref, header, schema.has_header, n_cols));
  }
  if (numeric.empty() && categorical.empty()) {
    for (std::size_t c = 0; c < n_cols; ++c) {
      if (c != label_col) numeric.push_back(c);
    }
  }

  // Rows with a missing numeric value are dropped; a missing categorical
  // value is a level of its own.
  std::vector<std::size_t> kept;
  std::vector<std::vector<double>> numeric_values;
  RawTable table;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& fields = rows[r];
    std::vector<double> values(numeric.size());
    bool missing = false;
    for (std::size_t j = 0; j < numeric.size(); ++j) {
      const std::string& token = fields[numeric[j]];
      if (token == schema.missing_token || token.empty()) {
        missing = true;
        break;
      }
      if (!parse_double(token, values[j])) {
        throw DataError("row " + std::to_string(line_numbers[r]) + ": non-numeric value '" +
                        token + "' in numeric column");
      }
    }
    if (missing) {
      ++table.dropped_rows;
      continue;
    }
    const auto it = schema.label_map.find(fields[label_col]);
    if (it == schema.label_map.end()) {
      throw DataError("row " + std::to_string(line_numbers[r]) + ": unknown label value '" +
                      fields[label_col] + "'");
    }
    table.labels.push_back(it->second);
    kept.push_back(r);
    numeric_values.push_back(std::move(values));
  }
  if (table.dropped_rows > 0) {
    std::clog << "ffep: dropped " << table.dropped_rows << " row(s) with missing numeric values\n";
  }

  auto column_name = [&](std::size_t c) {
    return header.empty() ? "col" + std::to_string(c) : header[c];
  };

  std::vector<std::vector<std::string>> levels(categorical.size());
  for (std::size_t g = 0; g < categorical.size(); ++g) {
    std::set<std::string> seen;
    for (const std::size_t r : kept) seen.insert(rows[r][categorical[g]]);
    levels[g].assign(seen.begin(), seen.end());  // lexicographic
  }

  Eigen::Index n_features = static_cast<Eigen::Index>(numeric.size());
  for (const auto& lv : levels) n_features += static_cast<Eigen::Index>(lv.size());
  table.features = RowMatrix::Zero(static_cast<Eigen::Index>(kept.size()), n_features);
  for (const std::size_t c : numeric) table.feature_names.push_back(column_name(c));
  for (std::size_t g = 0; g < categorical.size(); ++g) {
    std::vector<Eigen::Index> group;
    for (const auto& level : levels[g]) {
      group.push_back(static_cast<Eigen::Index>(table.feature_names.size()));
      table.feature_names.push_back(column_name(categorical[g]) + "=" + level);
    }
    table.categorical_groups.push_back(std::move(group));
  }

  for (std::size_t i = 0; i < kept.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < numeric.size(); ++j) {
      table.features(row, static_cast<Eigen::Index>(j)) = numeric_values[i][j];
    }
    for (std::size_t g = 0; g < categorical.size(); ++g) {
      const auto& lv = levels[g];
      const auto pos = std::lower_bound(lv.begin(), lv.end(), rows[kept[i]][categorical[g]]);
      table.features(row, table.categorical_groups[g][static_cast<std::size_t>(pos - lv.begin())]) =
          1.0;
    }
  }
  return table;
}

Dataset::Dataset(RowMatrix features, Eigen::VectorXd labels,
                 std::vector<std::string> feature_names)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      feature_names_(std::move(feature_names)) {
  if (features_.rows() != labels_.size()) {
    throw UsageError("Dataset: feature rows and labels differ in count");
  }
  for (Eigen::Index k = 0; k < labels_.size(); ++k) {
    if (labels_[k] != 1.0 && labels_[k] != -1.0) throw UsageError("Dataset: labels must be +/-1");
  }
}

Dataset preprocess(const RawTable& raw) {
  const Eigen::Index n = raw.features.rows();
  const Eigen::Index p = raw.features.cols();
  if (n < 2) throw DataError("preprocess: need at least 2 examples");
  if (p < 1) throw DataError("preprocess: need at least 1 feature");

  RowMatrix features(n, p + 1);
  for (Eigen::Index c = 0; c < p; ++c) {
    Eigen::VectorXd col = raw.features.col(c);
    col.array() -= col.mean();
    const double norm = col.norm();
    if (norm > 0.0) col /= norm;
    features.col(c) = col;
  }
  features.col(p).setOnes();

  Eigen::VectorXd labels(n);
  for (Eigen::Index k = 0; k < n; ++k) labels[k] = raw.labels[static_cast<std::size_t>(k)];
  std::vector<std::string> names = raw.feature_names;
  names.resize(static_cast<std::size_t>(p));
  names.emplace_back("baseline");
  return Dataset(std::move(features), std::move(labels), std::move(names));
}

MiniBatchPartition partition(std::size_t n_examples, std::size_t batch_size,
                             std::optional<std::uint64_t> shuffle_seed) {
  if (batch_size < 1 || batch_size > n_examples) {
    throw UsageError("partition: batch size " + std::to_string(batch_size) +
                     " outside [1, " + std::to_string(n_examples) + "]");
  }
  MiniBatchPartition out;
  out.batch_size = batch_size;
  out.order.resize(n_examples);
  std::iota(out.order.begin(), out.order.end(), std::size_t{0});
  if (shuffle_seed) {
    std::mt19937_64 rng(*shuffle_seed);
    std::shuffle(out.order.begin(), out.order.end(), rng);
  }
  for (std::size_t begin = 0; begin < n_examples; begin += batch_size) {
    out.batches.push_back({begin, std::min(begin + batch_size, n_examples)});
  }
  return out;
}

}  // namespace ffep
