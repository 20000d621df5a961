#include "cnet/growth.hpp"

#include <chrono>

#include "cnet/error.hpp"

namespace cnet {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void check_same_width(const Dataset& a, const Dataset& b, const char* what) {
  if (a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": feature widths differ (" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.cols()) + ")");
  }
}

GrowthConfig with_seed(const GrowthConfig& cfg, std::uint64_t seed) {
  GrowthConfig out = cfg;
  out.train.seed = seed;
  return out;
}

}  // namespace

void GrowthConfig::validate() const {
  train.validate();
  if (initial_units < 1) throw InputError("initial_units must be at least 1");
  if (max_units < initial_units) throw InputError("max_units must be at least initial_units");
}

std::string_view to_string(GrowthStop s) noexcept {
  return s == GrowthStop::threshold ? "threshold" : "unit_cap";
}

std::size_t GrowthTrace::comparisons() const noexcept {
  std::size_t n = 0;
  for (const auto& s : steps) n += s.compared ? 1 : 0;
  return n;
}

std::vector<Source> subnet_sources(const NetworkGraph& net, BlockId id) {
  return net.block(id).sources;
}

std::size_t subnet_units(const NetworkGraph& net, const std::vector<Source>& sources) {
  if (!net.has_output()) return 0;
  std::size_t n = 0;
  for (BlockId id : net.output().sources) {
    const auto& b = net.block(id);
    if (b.sources == sources) n += b.n_units();
  }
  return n;
}

BlockId add_hidden_unit(NetworkGraph& net, const std::vector<Source>& sources,
                        const GrowthConfig& cfg, Rng& rng) {
  const BlockId id = net.add_unit_block(1, sources, cfg.hidden_activation, cfg.hidden_init,
                                        cfg.output_init, rng, /*connect_to_output=*/true);
  net.set_trainable(TrainableSelector::new_and_output(), true);
  return id;
}

GrowthTrace grow_until_no_convergence(NetworkGraph& net, const Dataset& train_data,
                                      const Dataset* valid, const GrowthConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  if (!net.has_output() || net.output().sources.empty()) {
    throw ContractError("growth needs a network whose output unit reads at least one block");
  }
  const BlockId newest = net.output().sources.back();
  if (!net.block(newest).trainable) {
    throw ContractError("growth needs the newest block feeding the output to be trainable");
  }
  const auto sources = subnet_sources(net, newest);
  const std::uint64_t seed = cfg.train.seed;
  Rng rng(derive_seed(seed, 0xA11CE));

  GrowthTrace trace;
  std::optional<double> accepted;
  std::optional<NetworkGraph> before_last_unit;
  for (std::size_t step = 0;; ++step) {
    const auto ts = std::chrono::steady_clock::now();
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(seed, step + 1);
    std::optional<NetworkGraph> before;
    if (cfg.on_step) before = net;
    const TrainResult r = train(net, train_data, valid, tc);
    if (cfg.on_step) cfg.on_step(*before, net);

    GrowthStep rec;
    rec.units_total = subnet_units(net, sources);
    rec.metric_before = r.initial_metric;
    rec.metric_after = r.final_metric;
    rec.previous_accepted = accepted;
    rec.compared = accepted.has_value();
    rec.epochs = r.epochs_run;
    rec.accepted =
        !accepted || converged(*accepted, r.final_metric, cfg.train.threshold, cfg.train.criterion);
    rec.wall_time = seconds_since(ts);
    trace.steps.push_back(rec);

    if (!rec.accepted) {
      net = std::move(*before_last_unit);
      trace.stop_reason = GrowthStop::threshold;
      break;
    }
    accepted = r.final_metric;
    if (rec.units_total >= cfg.max_units) {
      trace.stop_reason = GrowthStop::unit_cap;
      break;
    }
    before_last_unit = net;
    add_hidden_unit(net, sources, cfg, rng);
  }
  trace.final_units = subnet_units(net, sources);
  trace.final_metric = *accepted;
  trace.wall_time = seconds_since(t0);
  return trace;
}

FeatureGroupResult ifl_feature_groups(const Dataset& train_data, const Dataset* valid,
                                      const GroupPlan& plan, const GrowthConfig& cfg) {
  cfg.validate();
  if (plan.groups.empty()) throw InputError("feature plan has no groups");
  plan.validate(train_data.cols());
  if (valid != nullptr) check_same_width(train_data, *valid, "ifl_feature_groups");

  const std::size_t d = train_data.cols();
  NetworkSpec spec;
  spec.input_width = d;
  spec.layer_widths = {cfg.initial_units};
  spec.hidden_activation = cfg.hidden_activation;
  spec.output_activation = cfg.output_activation;
  spec.init = cfg.hidden_init;
  spec.seed = cfg.train.seed;
  spec.input_features = cumulative_features(plan, 0);
  if (spec.input_features == InputSource::all(d).features) spec.input_features.clear();

  FeatureGroupResult result{new_network(spec), {}};
  result.traces.push_back(grow_until_no_convergence(result.net, train_data, valid, cfg));

  for (std::size_t g = 1; g < plan.groups.size(); ++g) {
    const GrowthConfig gc = with_seed(cfg, derive_seed(cfg.train.seed, 100 + g));
    Rng rng(derive_seed(gc.train.seed, 0xB10C));
    const std::vector<Source> sources{InputSource{cumulative_features(plan, g)}};
    result.net.add_unit_block(cfg.initial_units, sources, cfg.hidden_activation, cfg.hidden_init,
                              cfg.output_init, rng, /*connect_to_output=*/true);
    result.net.set_trainable(TrainableSelector::new_and_output(), true);
    result.traces.push_back(grow_until_no_convergence(result.net, train_data, valid, gc));
  }
  return result;
}

TrainConfig TransferConfig::initial_train_config() const {
  TrainConfig tc = growth.train;
  tc.criterion = initial_criterion;
  return tc;
}

NetworkGraph build_initial_model(std::size_t input_width, const TransferConfig& cfg) {
  NetworkSpec spec;
  spec.input_width = input_width;
  spec.layer_widths = cfg.initial_widths;
  spec.hidden_activation = cfg.growth.hidden_activation;
  spec.output_activation = cfg.growth.output_activation;
  spec.init = cfg.growth.hidden_init;
  spec.seed = cfg.growth.train.seed;
  return new_network(spec);
}

TransferResult ifl_transfer(const Dataset& train_chunk1, const Dataset& train_chunk2,
                            const Dataset& valid_chunk2, const TransferConfig& cfg) {
  if (train_chunk1.empty()) throw DataError("first training chunk is empty");
  check_same_width(train_chunk1, train_chunk2, "ifl_transfer");
  NetworkGraph initial = build_initial_model(train_chunk1.cols(), cfg);
  const TrainResult tr = train(initial, train_chunk1, nullptr, cfg.initial_train_config());
  TransferResult result = ifl_transfer_from(initial, train_chunk2, valid_chunk2, cfg);
  result.initial_training = tr;
  return result;
}

TransferResult ifl_transfer_from(const NetworkGraph& initial_model, const Dataset& train_chunk2,
                                 const Dataset& valid_chunk2, const TransferConfig& cfg) {
  cfg.growth.validate();
  if (train_chunk2.empty()) throw DataError("second training chunk is empty");
  if (valid_chunk2.empty()) throw DataError("second validation chunk is empty");
  check_same_width(train_chunk2, valid_chunk2, "ifl_transfer");
  if (train_chunk2.cols() != initial_model.input_width()) {
    throw DimensionError("ifl_transfer: chunk width " + std::to_string(train_chunk2.cols()) +
                         " does not match the initial model input width " +
                         std::to_string(initial_model.input_width()));
  }
  const auto t0 = std::chrono::steady_clock::now();
  const GrowthConfig& gcfg = cfg.growth;

  TransferResult result;
  result.state.initial_model = initial_model;

  // Decapitate and transform the second chunk with the past weights.
  NetworkGraph net = initial_model;
  net.remove_output_unit();
  result.state.headless_model = net;
  {
    Dataset t;
    t.x = transform(net, train_chunk2);
    t.y = train_chunk2.y;
    for (std::size_t i = 0; i < t.x.cols(); ++i) t.feature_names.push_back("t" + std::to_string(i));
    t.provenance = "transformed features of " + train_chunk2.provenance;
    result.state.t_subset = std::move(t);
  }

  // Sub-network 1 reads the transformed features and feeds a fresh output unit.
  net.set_trainable(TrainableSelector::all(), false);
  std::vector<Source> transformed;
  for (BlockId id : net.exposed_blocks()) transformed.push_back(BlockSource{id});
  Rng rng(derive_seed(gcfg.train.seed, 0x7F1));
  const BlockId sub1 = net.add_unit_block(gcfg.initial_units, transformed, gcfg.hidden_activation,
                                          gcfg.hidden_init, gcfg.output_init, rng,
                                          /*connect_to_output=*/false);
  OutputUnit fresh;
  fresh.activation = gcfg.output_activation;
  net.attach_output_unit(std::move(fresh));
  net.connect_to_output(sub1, gcfg.output_init, rng);
  net.set_trainable(TrainableSelector::new_and_output(), true);
  result.traces.push_back(grow_until_no_convergence(
      net, train_chunk2, &valid_chunk2, with_seed(gcfg, derive_seed(gcfg.train.seed, 201))));

  // Sub-network 2 reads the raw inputs and joins the same output unit.
  net.set_trainable(TrainableSelector::all(), false);
  net.add_unit_block(gcfg.initial_units, {InputSource::all(net.input_width())},
                     gcfg.hidden_activation, gcfg.hidden_init, gcfg.output_init, rng,
                     /*connect_to_output=*/true);
  net.set_trainable(TrainableSelector::new_and_output(), true);
  result.traces.push_back(grow_until_no_convergence(
      net, train_chunk2, &valid_chunk2, with_seed(gcfg, derive_seed(gcfg.train.seed, 202))));

  result.net = std::move(net);
  result.incremental_time = seconds_since(t0);
  return result;
}

RefitResult refit(const NetworkGraph& initial_model, const Dataset& train_chunk2,
                  const Dataset* valid_chunk2, const TrainConfig& cfg) {
  RefitResult out{initial_model, {}};
  out.net.set_trainable(TrainableSelector::all(), true);
  out.training = train(out.net, train_chunk2, valid_chunk2, cfg);
  return out;
}

}  // namespace cnet
