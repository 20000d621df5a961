#pragma once

// Constructive growth procedures.
//
//  * grow_until_no_convergence: train the trainable part, compare the
//    criterion metric against the last accepted value, and keep adding
//    single hidden units (everything else frozen) while the gain clears the
//    threshold.
//  * ifl_feature_groups: one sub-network per feature group, each reading the
//    features of all groups seen so far.
//  * ifl_transfer: a network trained on a first chunk is decapitated; its
//    last hidden layer feeds a new grown sub-network, then a second grown
//    sub-network reads the raw inputs, both into one shared output unit.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cnet/datapipe.hpp"
#include "cnet/netgraph.hpp"
#include "cnet/traincore.hpp"

namespace cnet {

struct GrowthConfig {
  TrainConfig train;
  std::size_t initial_units = 2;
  std::size_t max_units = 256;  // per sub-network
  InitPolicy hidden_init = InitPolicy::gaussian(0.01);
  InitPolicy output_init = InitPolicy::zeros();
  Activation hidden_activation = Activation::relu;
  Activation output_activation = Activation::sigmoid;

  // Called after each training run inside a growth loop with the network as
  // it was just before and just after that run.
  std::function<void(const NetworkGraph& before, const NetworkGraph& after)> on_step;

  void validate() const;
};

enum class GrowthStop { threshold, unit_cap };
std::string_view to_string(GrowthStop s) noexcept;

struct GrowthStep {
  std::size_t units_total = 0;   // units in the sub-network during this step
  double metric_before = 0.0;    // criterion metric before the step's training
  double metric_after = 0.0;     // after training
  std::optional<double> previous_accepted;
  bool compared = false;         // a previous accepted value existed
  bool accepted = false;
  std::size_t epochs = 0;
  double wall_time = 0.0;
};

struct GrowthTrace {
  std::vector<GrowthStep> steps;
  GrowthStop stop_reason = GrowthStop::threshold;
  std::size_t final_units = 0;
  double final_metric = 0.0;
  double wall_time = 0.0;

  std::size_t comparisons() const noexcept;
};

// Sources shared by the sub-network whose newest block is `id`.
std::vector<Source> subnet_sources(const NetworkGraph& net, BlockId id);
std::size_t subnet_units(const NetworkGraph& net, const std::vector<Source>& sources);

// Appends a one-unit block reading `sources`, connected to the output with
// cfg.output_init weights, then leaves only that block and the output trainable.
BlockId add_hidden_unit(NetworkGraph& net, const std::vector<Source>& sources,
                        const GrowthConfig& cfg, Rng& rng);

// Grows the sub-network that owns the newest block. On a threshold stop the
// network is restored to its state before the last (unprofitable) unit.
GrowthTrace grow_until_no_convergence(NetworkGraph& net, const Dataset& train_data,
                                      const Dataset* valid, const GrowthConfig& cfg);

struct FeatureGroupResult {
  NetworkGraph net;
  std::vector<GrowthTrace> traces;  // one per group
};

FeatureGroupResult ifl_feature_groups(const Dataset& train_data, const Dataset* valid,
                                      const GroupPlan& plan, const GrowthConfig& cfg);

struct TransferConfig {
  GrowthConfig growth;
  std::vector<std::size_t> initial_widths{500, 10};
  // The first chunk has no validation part, so the initial model is trained
  // with early stopping on its training loss.
  Criterion initial_criterion = Criterion::train_loss;

  TrainConfig initial_train_config() const;
};

struct TransferState {
  NetworkGraph initial_model{1};
  NetworkGraph headless_model{1};
  Dataset t_subset;  // transformed second-chunk features
};

struct TransferResult {
  NetworkGraph net{1};
  std::vector<GrowthTrace> traces;  // transformed-feature phase, raw-input phase
  TransferState state;
  TrainResult initial_training;
  double incremental_time = 0.0;  // seconds spent after the initial model existed
};

// Builds and trains the initial model on chunk 1, then runs the transfer
// and growth phases on chunk 2.
TransferResult ifl_transfer(const Dataset& train_chunk1, const Dataset& train_chunk2,
                            const Dataset& valid_chunk2, const TransferConfig& cfg);

// Same, starting from an already trained initial model.
TransferResult ifl_transfer_from(const NetworkGraph& initial_model, const Dataset& train_chunk2,
                                 const Dataset& valid_chunk2, const TransferConfig& cfg);

NetworkGraph build_initial_model(std::size_t input_width, const TransferConfig& cfg);

struct RefitResult {
  NetworkGraph net{1};
  TrainResult training;
};

// Continued training of every weight of the initial model on the new chunk.
RefitResult refit(const NetworkGraph& initial_model, const Dataset& train_chunk2,
                  const Dataset* valid_chunk2, const TrainConfig& cfg);

}  // namespace cnet
