#pragma once

// Experiment configuration: a JSON document layered as
// defaults <- config file <- --set overrides, validated against the
// default document's shape.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cnet/datapipe.hpp"
#include "cnet/growth.hpp"
#include "cnet/traincore.hpp"

namespace cnet::cli {

using json = nlohmann::json;

struct DataSection {
  std::string csv;
  std::string label_column = "Class";
  std::string time_column = "Time";
  std::vector<std::string> drop_columns{"Time"};
  double chunk_boundary = 86400.0;
  bool dedup = true;
};

struct SplitSection {
  std::vector<std::pair<std::string, double>> chunk1{{"train", 0.7}, {"test", 0.3}};
  std::vector<std::pair<std::string, double>> chunk2{{"train", 0.7}, {"valid", 0.15}, {"test", 0.15}};
  bool stratified = true;
};

struct SmoteSection {
  bool enabled = true;
  double ratio = 0.33;
  std::size_t k = 5;
};

struct GroupsSection {
  std::size_t count = 3;
  GroupOrder order = GroupOrder::descending;
  RelevancyMethod relevancy = RelevancyMethod::pearson;
  int chunk = 1;
};

struct NetworkSection {
  std::vector<std::size_t> initial_widths{500, 10};
  Activation hidden_activation = Activation::relu;
  Activation output_activation = Activation::sigmoid;
  InitPolicy hidden_init = InitPolicy::gaussian(0.01);
  InitPolicy output_init = InitPolicy::zeros();
  std::size_t initial_units = 2;
  std::size_t max_units = 256;
  Criterion initial_criterion = Criterion::train_loss;
};

struct ExperimentConfig {
  DataSection data;
  SplitSection split;
  SmoteSection smote;
  double normalize_lo = -5.0;
  double normalize_hi = 5.0;
  GroupsSection groups;
  NetworkSection network;
  TrainConfig train;
  std::size_t runs = 10;
  std::uint64_t seed = 0;
  std::string prepared_dir = "prepared";
  std::string output_dir = "out";

  GrowthConfig growth_config() const;
  TransferConfig transfer_config() const;
};

json default_config_json();
json to_json(const ExperimentConfig& cfg);

// Rejects unknown keys and mistyped values with InputError.
ExperimentConfig from_json(const json& j);

// "a.b.c=value"; value is parsed as JSON when possible, else taken as a string.
void apply_override(json& j, const std::string& assignment);

// Reads `path` (if non-empty), merges it over the defaults, applies the
// overrides in order and validates.
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides, json* effective = nullptr);

}  // namespace cnet::cli
