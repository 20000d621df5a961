#pragma once

// Classification metrics, multi-run averaging and the model comparison report.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cnet/numerics.hpp"

namespace cnet {

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

// prediction >= threshold counts as class 1.
Confusion confusion(std::span<const double> predictions, std::span<const int> labels,
                    double threshold = 0.5);

struct MetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double fnr = 0.0;
  double accuracy = 0.0;
  double wall_time = 0.0;  // seconds
  std::size_t runs = 1;
  Confusion counts;        // summed over runs
  // Names of metrics whose denominator was zero (reported as 0).
  std::vector<std::string> degenerate;
  std::vector<MetricsReport> per_run;
  std::vector<std::string> failures;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

MetricsReport metrics(const Confusion& c, double wall_time = 0.0);

// Runs evaluate(seed) for each seed and averages every metric. Failed runs
// are listed; averaging proceeds when at least half the runs completed.
MetricsReport multi_run(const std::function<MetricsReport(std::uint64_t seed)>& evaluate,
                        std::span<const std::uint64_t> seeds);
std::vector<std::uint64_t> default_seeds(std::size_t n_runs, std::uint64_t base = 0);

inline constexpr int kReportSchemaVersion = 1;

std::string serialize_report(const MetricsReport& r, const std::string& name = {});
MetricsReport deserialize_report(const std::string& text, std::string* name = nullptr);
void save_report(const MetricsReport& r, const std::filesystem::path& path,
                 const std::string& name = {});
MetricsReport load_report(const std::filesystem::path& path, std::string* name = nullptr);

struct ComparisonRow {
  std::string name;
  MetricsReport report;
  // Metric minus the first row's metric, in kComparisonColumns order.
  std::vector<double> deltas;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;

  std::string to_text() const;
  std::string to_json() const;
  static ComparisonTable from_json(const std::string& text);
};

inline const std::vector<std::string> kComparisonColumns{"precision", "recall", "f1", "fnr",
                                                         "accuracy", "time"};

double metric_by_name(const MetricsReport& r, const std::string& column);

ComparisonTable compare_report(const std::vector<std::pair<std::string, MetricsReport>>& models);

// "epoch,<name>" CSV series for external plotting.
std::string series_csv(const std::string& name, std::span<const double> values);

}  // namespace cnet
