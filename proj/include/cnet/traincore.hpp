#pragma once

// Mini-batch training that honours freeze flags, patience-based early
// stopping, and the convergence test used to gate network growth.

#include <cstdint>
#include <string_view>
#include <vector>

#include "cnet/datapipe.hpp"
#include "cnet/netgraph.hpp"
#include "cnet/numerics.hpp"

namespace cnet {

enum class Criterion { train_loss, validation_accuracy };
enum class Optimizer { sgd, adam };
enum class StopReason { patience, max_epochs };

std::string_view to_string(Criterion c) noexcept;
std::string_view to_string(Optimizer o) noexcept;
std::string_view to_string(StopReason s) noexcept;
Criterion parse_criterion(std::string_view name);
Optimizer parse_optimizer(std::string_view name);

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 1024;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  double threshold = 0.01;  // gates growth, not early stopping
  Criterion criterion = Criterion::train_loss;
  Loss loss = Loss::binary_cross_entropy;
  Optimizer optimizer = Optimizer::adam;
  double momentum = 0.0;  // sgd only
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-7;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainResult {
  std::size_t epochs_run = 0;
  double initial_metric = 0.0;  // criterion metric before the first update
  double final_metric = 0.0;    // after the last epoch (initial_metric if none ran)
  std::vector<double> metric_history;
  StopReason stopped_by = StopReason::max_epochs;
  double wall_time = 0.0;  // seconds
};

// Updates trainable parameters only. `valid` may be null unless the
// criterion is validation_accuracy. Data order is reshuffled every epoch
// from cfg.seed; the last partial batch is used.
TrainResult train(NetworkGraph& net, const Dataset& train_data, const Dataset* valid,
                  const TrainConfig& cfg);

// For train_loss: previous - current >= threshold. For validation_accuracy:
// current - previous >= threshold.
bool converged(double previous_metric, double current_metric, double threshold,
               Criterion criterion) noexcept;

// Whether `candidate` improves on `best` for early stopping (strict).
bool improves(double candidate, double best, Criterion criterion) noexcept;

enum class EvalMetric { loss, accuracy };

// Accuracy counts prediction >= 0.5 as class 1.
double evaluate(const NetworkGraph& net, const Dataset& data, EvalMetric metric,
                Loss loss = Loss::binary_cross_entropy);

// The metric a criterion tracks: training-set loss or validation accuracy.
double criterion_metric(const NetworkGraph& net, const Dataset& train_data, const Dataset* valid,
                        const TrainConfig& cfg);

Vector predict(const NetworkGraph& net, const Dataset& data);
// Concatenated exposed/last-hidden activations for every row.
Matrix transform(const NetworkGraph& net, const Dataset& data);

// Mean loss over the dataset and its gradient with respect to every
// parameter (in NetworkGraph::parameters() order), ignoring freeze flags.
double dataset_loss(const NetworkGraph& net, const Dataset& data, Loss loss);
Vector parameter_gradient(const NetworkGraph& net, const Dataset& data, Loss loss);

}  // namespace cnet
