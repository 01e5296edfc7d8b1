#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ffep {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// How to interpret the columns of a delimited file. Columns are referenced by
// header name when has_header is set, otherwise by 0-based position written
// as a decimal string. When both column lists are empty every non-label
// column is treated as numeric.
struct ColumnSchema {
  bool has_header = false;
  char delimiter = ',';
  std::string label_column;
  std::map<std::string, int> label_map;  // raw token -> +1 / -1
  std::vector<std::string> numeric_columns;
  std::vector<std::string> categorical_columns;
  std::string missing_token = "?";
};

struct RawTable {
  std::vector<std::string> feature_names;
  RowMatrix features;
  std::vector<int> labels;
  // Column indices (into features) of the indicator block of each categorical.
  std::vector<std::vector<Eigen::Index>> categorical_groups;
  std::size_t dropped_rows = 0;
};

RawTable load_csv(const std::filesystem::path& path, const ColumnSchema& schema);
RawTable parse_csv(std::istream& in, const ColumnSchema& schema);

// Preprocessed examples: non-baseline columns centered and scaled to unit
// Euclidean norm (constant columns stay zero), then a column of ones appended.
class Dataset {
 public:
  Dataset() = default;
  Dataset(RowMatrix features, Eigen::VectorXd labels, std::vector<std::string> feature_names = {});

  std::size_t n_examples() const { return static_cast<std::size_t>(features_.rows()); }
  Eigen::Index dim() const { return features_.cols(); }
  const RowMatrix& features() const { return features_; }
  const Eigen::VectorXd& labels() const { return labels_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }

  std::span<const double> row(std::size_t k) const {
    return {features_.data() + k * static_cast<std::size_t>(features_.cols()),
            static_cast<std::size_t>(features_.cols())};
  }
  double label(std::size_t k) const { return labels_[static_cast<Eigen::Index>(k)]; }

 private:
  RowMatrix features_;
  Eigen::VectorXd labels_;
  std::vector<std::string> feature_names_;
};

Dataset preprocess(const RawTable& raw);

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

// Mini-batches are contiguous ranges of `order`, which is the identity unless
// a shuffle seed was supplied.
struct MiniBatchPartition {
  std::size_t batch_size = 0;
  std::vector<std::size_t> order;
  std::vector<IndexRange> batches;

  std::size_t n_batches() const { return batches.size(); }
  std::span<const std::size_t> indices(std::size_t b) const {
    return std::span<const std::size_t>(order).subspan(batches[b].begin, batches[b].size());
  }
};

MiniBatchPartition partition(std::size_t n_examples, std::size_t batch_size,
                             std::optional<std::uint64_t> shuffle_seed = std::nullopt);

}  // namespace ffep
