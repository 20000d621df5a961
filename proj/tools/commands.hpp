#pragma once

#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace cnet::cli {

// Each command returns the directory or file it wrote.
std::string cmd_prepare(const ExperimentConfig& cfg, const json& effective);
std::string cmd_train_initial(const ExperimentConfig& cfg, const json& effective, int chunk,
                              const std::string& eval_part);
std::string cmd_refit(const ExperimentConfig& cfg, const json& effective, const std::string& initial);
std::string cmd_grow_groups(const ExperimentConfig& cfg, const json& effective);
std::string cmd_grow_transfer(const ExperimentConfig& cfg, const json& effective,
                              const std::string& initial);
void cmd_evaluate(const ExperimentConfig& cfg, const std::string& model, const std::string& data,
                  const std::string& name, const std::string& out);
void cmd_compare(const std::vector<std::string>& reports, const std::string& out);
void cmd_synth(const std::string& kind, std::size_t rows, std::size_t features, std::uint64_t seed,
               const std::string& out);

}  // namespace cnet::cli
