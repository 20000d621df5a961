#pragma once

// Growable feed-forward topology.
//
// A network is an input layer, an ordered list of unit blocks and at most one
// output unit. Each block reads a concatenation of input features and/or the
// outputs of earlier blocks; the output unit reads a concatenation of block
// outputs. Concatenation is pure juxtaposition and owns no parameters.
// A single hidden unit that must be frozen independently of its siblings is
// simply a block with one unit.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cnet/numerics.hpp"
#include "cnet/random.hpp"

namespace cnet {

using BlockId = std::uint32_t;

struct InputSource {
  std::vector<std::size_t> features;  // indices into the input layer, in read order

  static InputSource all(std::size_t width);
  friend bool operator==(const InputSource&, const InputSource&) = default;
};

struct BlockSource {
  BlockId id = 0;
  friend bool operator==(const BlockSource&, const BlockSource&) = default;
};

using Source = std::variant<InputSource, BlockSource>;

struct InitPolicy {
  enum class Kind { gaussian, xavier, zeros };
  Kind kind = Kind::gaussian;
  double stddev = 0.01;

  static InitPolicy gaussian(double stddev = 0.01) { return {Kind::gaussian, stddev}; }
  static InitPolicy xavier() { return {Kind::xavier, 0.0}; }
  static InitPolicy zeros() { return {Kind::zeros, 0.0}; }

  // Draws one weight for a connection with the given fan-in / fan-out.
  double sample(Rng& rng, std::size_t fan_in, std::size_t fan_out) const;

  friend bool operator==(const InitPolicy&, const InitPolicy&) = default;
};

std::string to_string(const InitPolicy& p);
InitPolicy parse_init_policy(std::string_view text);  // "gaussian", "gaussian:0.05", "xavier", "zeros"

struct UnitBlock {
  BlockId id = 0;
  std::vector<Source> sources;
  Matrix weights;  // n_units x source width
  Vector bias;     // n_units
  Activation activation = Activation::relu;
  bool trainable = true;

  std::size_t n_units() const noexcept { return weights.rows(); }
  std::size_t parameter_count() const noexcept { return weights.size() + bias.size(); }
};

struct OutputUnit {
  std::vector<BlockId> sources;  // concatenated in this order
  Vector weights;
  double bias = 0.0;
  Activation activation = Activation::sigmoid;
  bool trainable = true;

  std::size_t parameter_count() const noexcept { return weights.size() + 1; }
};

// Which parameters set_trainable touches.
struct TrainableSelector {
  enum class Kind { all, blocks, new_and_output };
  Kind kind = Kind::all;
  std::vector<BlockId> ids;

  static TrainableSelector all() { return {Kind::all, {}}; }
  static TrainableSelector blocks(std::vector<BlockId> ids) { return {Kind::blocks, std::move(ids)}; }
  static TrainableSelector new_and_output() { return {Kind::new_and_output, {}}; }
};

struct ForwardTrace {
  std::vector<DenseTrace> blocks;  // parallel to NetworkGraph::blocks()
  Vector output_input;             // concatenated view feeding the output unit
  double output_pre = 0.0;
  double prediction = 0.0;
};

class NetworkGraph {
 public:
  explicit NetworkGraph(std::size_t input_width);

  std::size_t input_width() const noexcept { return input_width_; }
  const std::vector<UnitBlock>& blocks() const noexcept { return blocks_; }
  std::vector<UnitBlock>& blocks() noexcept { return blocks_; }
  const UnitBlock& block(BlockId id) const;
  UnitBlock& block(BlockId id);
  std::size_t block_index(BlockId id) const;
  bool has_block(BlockId id) const noexcept;

  bool has_output() const noexcept { return output_.has_value(); }
  const OutputUnit& output() const;
  OutputUnit& output();

  // Blocks whose activations a headless network emits.
  const std::vector<BlockId>& exposed_blocks() const noexcept { return exposed_; }
  std::size_t feature_width() const;

  BlockId next_block_id() const noexcept { return next_id_; }

  std::size_t source_width(const Source& s) const;
  std::size_t sources_width(std::span<const Source> sources) const;

  // Appends a block. Hidden weights come from hidden_init, biases are zero.
  // When connect_to_output is set the output unit gains one weight per new
  // unit, drawn from output_init. Existing parameters are untouched.
  BlockId add_unit_block(std::size_t n_units, std::vector<Source> sources, Activation activation,
                         const InitPolicy& hidden_init, const InitPolicy& output_init, Rng& rng,
                         bool connect_to_output = true);

  // Lower-level append used by deserialization and tests; validates shapes and sources.
  BlockId append_block(UnitBlock block);

  // Connects an existing block to the output unit with weights from init.
  void connect_to_output(BlockId id, const InitPolicy& init, Rng& rng);

  void set_trainable(const TrainableSelector& selector, bool flag);
  void set_output_trainable(bool flag);

  // Detaches the output unit; the network then exposes the activations of
  // the blocks that fed it.
  OutputUnit remove_output_unit();
  // Installs an output unit (fresh or previously detached).
  void attach_output_unit(OutputUnit unit);

  double predict(std::span<const double> x) const;
  // Concatenated activations of the exposed blocks (headless) or of the
  // blocks feeding the output unit.
  Vector features(std::span<const double> x) const;
  ForwardTrace trace(std::span<const double> x) const;

  // Flattened parameters: each block's weights (row-major) then bias, in
  // block order, then output weights and output bias.
  Vector parameters() const;
  void set_parameters(std::span<const double> values);
  // Parallel to parameters(): 1 where the owning block/output is trainable.
  std::vector<bool> trainable_mask() const;
  std::size_t parameter_count() const;
  std::size_t trainable_parameter_count() const;
  std::vector<bool> trainable_flags() const;  // per block, then output

  // Throws ContractError when a block reads a later block or a width is off.
  void validate() const;

  friend bool operator==(const NetworkGraph&, const NetworkGraph&);

 private:
  void check_sources(std::span<const Source> sources) const;
  void gather(std::span<const Source> sources, std::span<const double> x,
              const std::vector<Vector>& acts, Vector& into) const;
  std::vector<Vector> evaluate_blocks(std::span<const double> x) const;

  std::size_t input_width_ = 0;
  std::vector<UnitBlock> blocks_;
  std::optional<OutputUnit> output_;
  std::vector<BlockId> exposed_;
  BlockId next_id_ = 0;
};

bool operator==(const UnitBlock& a, const UnitBlock& b);
bool operator==(const OutputUnit& a, const OutputUnit& b);

struct NetworkSpec {
  std::size_t input_width = 0;
  std::vector<std::size_t> layer_widths;
  Activation hidden_activation = Activation::relu;
  Activation output_activation = Activation::sigmoid;
  InitPolicy init = InitPolicy::gaussian();
  std::uint64_t seed = 0;
  // First layer reads these features; empty means every input feature.
  std::vector<std::size_t> input_features;
};

// Fully connected chain input -> widths... -> one output unit.
NetworkGraph new_network(const NetworkSpec& spec);
NetworkGraph new_network(std::size_t input_width, const std::vector<std::size_t>& layer_widths,
                         Activation hidden, Activation output, const InitPolicy& init,
                         std::uint64_t seed);

inline constexpr int kModelFormatVersion = 1;
inline constexpr const char* kModelFormatName = "cnet-model";

std::string serialize_model(const NetworkGraph& net);
NetworkGraph deserialize_model(const std::string& text);
void save_model(const NetworkGraph& net, const std::filesystem::path& path);
NetworkGraph load_model(const std::filesystem::path& path);

}  // namespace cnet
