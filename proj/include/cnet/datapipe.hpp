#pragma once

// Dataset ingestion and preparation: CSV loading, deduplication, range
// normalization, relevancy-based feature grouping, cumulative sub-datasets,
// time chunking, stratified splitting and SMOTE oversampling.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cnet/numerics.hpp"

namespace cnet {

struct Dataset {
  std::vector<std::string> feature_names;
  Matrix x;            // n x d
  std::vector<int> y;  // 0/1 labels
  std::string provenance;

  std::size_t rows() const noexcept { return y.size(); }
  std::size_t cols() const noexcept { return x.cols(); }
  bool empty() const noexcept { return y.empty(); }

  std::span<const double> row(std::size_t i) const noexcept { return x.row(i); }
  Vector labels() const;                          // y as reals
  std::array<std::size_t, 2> class_counts() const;  // {count(0), count(1)}

  std::size_t feature_index(std::string_view name) const;
  Vector column(std::size_t feature) const;

  Dataset select_rows(std::span<const std::size_t> rows) const;
  Dataset select_features(std::span<const std::size_t> features) const;
  Dataset drop_features(std::span<const std::string> names) const;

  // Throws DataError when shapes or labels are inconsistent.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

Dataset make_dataset(Matrix x, std::vector<int> y, std::vector<std::string> names = {},
                     std::string provenance = {});

// --- loading ----------------------------------------------------------------

// Comma-separated, header row first. Quoted fields are unquoted. Labels are
// coerced to 0/1 (any non-zero value is 1). Non-numeric cells raise a
// FormatError naming the 1-based data row and column.
Dataset load_csv(const std::filesystem::path& path, std::string_view label_column,
                 std::span<const std::string> drop_columns = {});
Dataset parse_csv(std::string_view text, std::string_view label_column,
                  std::span<const std::string> drop_columns = {},
                  std::string provenance = "inline");
void write_csv(const Dataset& ds, const std::filesystem::path& path,
               std::string_view label_column = "Class");

// --- cleaning and scaling ----------------------------------------------------

struct DedupResult {
  Dataset data;
  std::size_t removed = 0;
};

// Removes exact duplicate rows (features and label), keeping first occurrences.
DedupResult dedup(const Dataset& ds);

struct RangeRecord {
  double lo = -5.0;
  double hi = 5.0;
  Vector min;
  Vector max;
  std::vector<std::size_t> constant_features;  // mapped to the midpoint

  Dataset apply(const Dataset& ds) const;
  Dataset invert(const Dataset& ds) const;
  double apply_value(std::size_t feature, double v) const;
};

struct NormalizeResult {
  Dataset data;
  RangeRecord record;
  std::vector<std::string> warnings;
};

// Fits a per-feature affine map of observed [min, max] onto [lo, hi].
NormalizeResult normalize_range(const Dataset& ds, double lo = -5.0, double hi = 5.0);

// --- relevancy and grouping ---------------------------------------------------

enum class RelevancyMethod { pearson, mutual_information };
RelevancyMethod parse_relevancy(std::string_view name);
std::string_view to_string(RelevancyMethod m) noexcept;

struct RelevancyResult {
  Vector scores;  // one per feature, each in [0, 1]
  std::vector<std::string> warnings;
};

// |Pearson correlation| with the label, or histogram mutual information
// (16 equal-width bins) normalized by the label entropy.
RelevancyResult relevancy_scores(const Dataset& ds,
                                 RelevancyMethod method = RelevancyMethod::pearson);

enum class GroupOrder { descending, ascending, none };
GroupOrder parse_group_order(std::string_view name);
std::string_view to_string(GroupOrder o) noexcept;

struct FeatureGroup {
  std::vector<std::size_t> features;
  double mean_relevancy = 0.0;
  friend bool operator==(const FeatureGroup&, const FeatureGroup&) = default;
};

struct GroupPlan {
  std::vector<FeatureGroup> groups;
  GroupOrder order = GroupOrder::descending;

  // Throws InputError for overlapping or empty groups or out-of-range features.
  void validate(std::size_t feature_count) const;
};

// Sorts features by score and cuts them into k contiguous bins whose sizes
// differ by at most one. `none` keeps the original feature order.
GroupPlan make_groups(std::span<const double> scores, std::size_t k, GroupOrder order);

// The i-th sub-dataset holds the union of groups 1..i (features kept in
// their original column order) with all rows.
std::vector<Dataset> subdatasets(const Dataset& ds, const GroupPlan& plan);

// Sorted union of the features of groups [0, upto].
std::vector<std::size_t> cumulative_features(const GroupPlan& plan, std::size_t upto);

// --- chunking and splitting -------------------------------------------------------

// Rows with time < boundary go to the first chunk. Throws DataError if either
// side is empty.
std::pair<Dataset, Dataset> chunk_by_time(const Dataset& ds, std::span<const double> times,
                                          double boundary);

struct SplitSpec {
  std::vector<std::pair<std::string, double>> fractions;
  bool stratified = true;
  std::uint64_t seed = 0;

  void validate() const;
};

// Per-class proportional allocation (largest remainder, ties broken by a
// seeded permutation of the parts). Rows keep their original relative order.
std::map<std::string, Dataset> stratified_split(const Dataset& ds, const SplitSpec& spec);

// --- oversampling -------------------------------------------------------------

struct SmoteResult {
  Dataset data;
  std::size_t synthetic = 0;
  int minority_label = 1;
};

// Grows the minority class to round(target_ratio * majority) by interpolating
// between a minority sample and one of its k nearest minority neighbours.
// Original rows come first and are untouched.
SmoteResult smote(const Dataset& ds, double target_ratio, std::size_t k_neighbors = 5,
                  std::uint64_t seed = 0);

// --- cached chunk files ---------------------------------------------------------

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr const char* kDatasetFormatName = "cnet-dataset";

std::string serialize_dataset(const Dataset& ds);
Dataset deserialize_dataset(const std::string& text);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace cnet
