#include "cnet/netgraph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "cnet/error.hpp"
#include "codec.hpp"

namespace cnet {

using json = nlohmann::json;

InputSource InputSource::all(std::size_t width) {
  InputSource s;
  s.features.resize(width);
  std::iota(s.features.begin(), s.features.end(), std::size_t{0});
  return s;
}

double InitPolicy::sample(Rng& rng, std::size_t fan_in, std::size_t fan_out) const {
  switch (kind) {
    case Kind::gaussian: {
      std::normal_distribution<double> dist(0.0, stddev);
      return dist(rng);
    }
    case Kind::xavier: {
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-bound, bound);
      return dist(rng);
    }
    case Kind::zeros: return 0.0;
  }
  return 0.0;
}

std::string to_string(const InitPolicy& p) {
  switch (p.kind) {
    case InitPolicy::Kind::gaussian: {
      std::ostringstream os;
      os.precision(17);
      os << "gaussian:" << p.stddev;
      return os.str();
    }
    case InitPolicy::Kind::xavier: return "xavier";
    case InitPolicy::Kind::zeros: return "zeros";
  }
  return "zeros";
}

InitPolicy parse_init_policy(std::string_view text) {
  if (text == "xavier") return InitPolicy::xavier();
  if (text == "zeros") return InitPolicy::zeros();
  if (text == "gaussian") return InitPolicy::gaussian();
  if (text.starts_with("gaussian:")) {
    const std::string number(text.substr(9));
    try {
      std::size_t used = 0;
      const double sd = std::stod(number, &used);
      if (used == number.size() && sd > 0.0) return InitPolicy::gaussian(sd);
    } catch (const std::exception&) {
    }
  }
  throw InputError("unknown init policy '" + std::string(text) + "'");
}

NetworkGraph::NetworkGraph(std::size_t input_width) : input_width_(input_width) {
  if (input_width == 0) throw InputError("network input width must be at least 1");
}

std::size_t NetworkGraph::block_index(BlockId id) const {
  auto it = std::lower_bound(blocks_.begin(), blocks_.end(), id,
                             [](const UnitBlock& b, BlockId v) { return b.id < v; });
  if (it == blocks_.end() || it->id != id) {
    throw InputError("unknown block id " + std::to_string(id));
  }
  return static_cast<std::size_t>(it - blocks_.begin());
}

bool NetworkGraph::has_block(BlockId id) const noexcept {
  auto it = std::lower_bound(blocks_.begin(), blocks_.end(), id,
                             [](const UnitBlock& b, BlockId v) { return b.id < v; });
  return it != blocks_.end() && it->id == id;
}

const UnitBlock& NetworkGraph::block(BlockId id) const { return blocks_[block_index(id)]; }
UnitBlock& NetworkGraph::block(BlockId id) { return blocks_[block_index(id)]; }

const OutputUnit& NetworkGraph::output() const {
  if (!output_) throw ContractError("network has no output unit");
  return *output_;
}

OutputUnit& NetworkGraph::output() {
  if (!output_) throw ContractError("network has no output unit");
  return *output_;
}

std::size_t NetworkGraph::source_width(const Source& s) const {
  if (const auto* in = std::get_if<InputSource>(&s)) return in->features.size();
  return block(std::get<BlockSource>(s).id).n_units();
}

std::size_t NetworkGraph::sources_width(std::span<const Source> sources) const {
  std::size_t w = 0;
  for (const auto& s : sources) w += source_width(s);
  return w;
}

std::size_t NetworkGraph::feature_width() const {
  const auto& ids = output_ ? output_->sources : exposed_;
  std::size_t w = 0;
  for (BlockId id : ids) w += block(id).n_units();
  return w;
}

void NetworkGraph::check_sources(std::span<const Source> sources) const {
  if (sources.empty()) throw InputError("a block needs at least one source");
  for (const auto& s : sources) {
    if (const auto* in = std::get_if<InputSource>(&s)) {
      if (in->features.empty()) throw InputError("input source selects no features");
      for (std::size_t f : in->features) {
        if (f >= input_width_) {
          throw InputError("input source references feature " + std::to_string(f) +
                           " but the input layer has width " + std::to_string(input_width_));
        }
      }
    } else if (!has_block(std::get<BlockSource>(s).id)) {
      throw InputError("dangling source: block " + std::to_string(std::get<BlockSource>(s).id) +
                       " does not exist");
    }
  }
}

BlockId NetworkGraph::add_unit_block(std::size_t n_units, std::vector<Source> sources,
                                     Activation activation, const InitPolicy& hidden_init,
                                     const InitPolicy& output_init, Rng& rng,
                                     bool connect_to_output) {
  if (n_units == 0) throw InputError("a block needs at least one unit");
  check_sources(sources);
  if (connect_to_output && !output_) {
    throw ContractError("cannot connect a new block: network has no output unit");
  }
  const std::size_t width = sources_width(sources);
  UnitBlock b;
  b.id = next_id_;
  b.sources = std::move(sources);
  b.weights = Matrix(n_units, width);
  for (double& w : b.weights.data()) w = hidden_init.sample(rng, width, n_units);
  b.bias.assign(n_units, 0.0);
  b.activation = activation;
  b.trainable = true;
  const BlockId id = append_block(std::move(b));
  if (connect_to_output) this->connect_to_output(id, output_init, rng);
  return id;
}

BlockId NetworkGraph::append_block(UnitBlock b) {
  check_sources(b.sources);
  if (b.id < next_id_) {
    throw InputError("block id " + std::to_string(b.id) + " is not greater than existing ids");
  }
  if (b.weights.rows() == 0 || b.weights.cols() != sources_width(b.sources) ||
      b.bias.size() != b.weights.rows()) {
    throw DimensionError("block weights " + b.weights.shape_string() + " and bias [" +
                         std::to_string(b.bias.size()) + "] do not match source width " +
                         std::to_string(sources_width(b.sources)));
  }
  next_id_ = b.id + 1;
  blocks_.push_back(std::move(b));
  return blocks_.back().id;
}

void NetworkGraph::connect_to_output(BlockId id, const InitPolicy& init, Rng& rng) {
  auto& out = output();
  if (std::find(out.sources.begin(), out.sources.end(), id) != out.sources.end()) {
    throw InputError("block " + std::to_string(id) + " already feeds the output unit");
  }
  const std::size_t n = block(id).n_units();
  out.sources.push_back(id);
  const std::size_t fan_in = out.weights.size() + n;
  for (std::size_t i = 0; i < n; ++i) out.weights.push_back(init.sample(rng, fan_in, 1));
}

void NetworkGraph::set_trainable(const TrainableSelector& selector, bool flag) {
  switch (selector.kind) {
    case TrainableSelector::Kind::all:
      for (auto& b : blocks_) b.trainable = flag;
      if (output_) output_->trainable = flag;
      break;
    case TrainableSelector::Kind::blocks: {
      std::vector<std::size_t> idx;
      for (BlockId id : selector.ids) idx.push_back(block_index(id));  // validate first
      for (std::size_t i : idx) blocks_[i].trainable = flag;
      break;
    }
    case TrainableSelector::Kind::new_and_output:
      if (blocks_.empty()) throw InputError("network has no blocks");
      for (auto& b : blocks_) b.trainable = !flag;
      blocks_.back().trainable = flag;
      if (output_) output_->trainable = flag;
      break;
  }
}

void NetworkGraph::set_output_trainable(bool flag) { output().trainable = flag; }

OutputUnit NetworkGraph::remove_output_unit() {
  if (!output_) throw ContractError("output unit already removed");
  OutputUnit detached = std::move(*output_);
  output_.reset();
  exposed_ = detached.sources;
  return detached;
}

void NetworkGraph::attach_output_unit(OutputUnit unit) {
  if (output_) throw ContractError("network already has an output unit");
  std::size_t width = 0;
  for (BlockId id : unit.sources) width += block(id).n_units();
  if (unit.weights.size() != width) {
    throw DimensionError("output unit has " + std::to_string(unit.weights.size()) +
                         " weights but its sources have width " + std::to_string(width));
  }
  output_ = std::move(unit);
  exposed_.clear();
}

void NetworkGraph::gather(std::span<const Source> sources, std::span<const double> x,
                          const std::vector<Vector>& acts, Vector& into) const {
  into.clear();
  for (const auto& s : sources) {
    if (const auto* in = std::get_if<InputSource>(&s)) {
      for (std::size_t f : in->features) into.push_back(x[f]);
    } else {
      const auto& a = acts[block_index(std::get<BlockSource>(s).id)];
      into.insert(into.end(), a.begin(), a.end());
    }
  }
}

std::vector<Vector> NetworkGraph::evaluate_blocks(std::span<const double> x) const {
  if (x.size() != input_width_) {
    throw DimensionError("input has width " + std::to_string(x.size()) + " but the network expects " +
                         std::to_string(input_width_));
  }
  std::vector<Vector> acts(blocks_.size());
  Vector in;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    gather(b.sources, x, acts, in);
    acts[i] = activation_forward(b.activation, affine_forward(b.weights, b.bias, in));
  }
  return acts;
}

double NetworkGraph::predict(std::span<const double> x) const {
  return trace(x).prediction;
}

Vector NetworkGraph::features(std::span<const double> x) const {
  const auto acts = evaluate_blocks(x);
  Vector out;
  for (BlockId id : (output_ ? output_->sources : exposed_)) {
    const auto& a = acts[block_index(id)];
    out.insert(out.end(), a.begin(), a.end());
  }
  return out;
}

ForwardTrace NetworkGraph::trace(std::span<const double> x) const {
  const auto& out = output();
  if (x.size() != input_width_) {
    throw DimensionError("input has width " + std::to_string(x.size()) + " but the network expects " +
                         std::to_string(input_width_));
  }
  ForwardTrace t;
  t.blocks.resize(blocks_.size());
  std::vector<Vector> acts(blocks_.size());
  Vector in;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    gather(b.sources, x, acts, in);
    t.blocks[i] = dense_forward(b.weights, b.bias, b.activation, in);
    acts[i] = t.blocks[i].out;
  }
  for (BlockId id : out.sources) {
    const auto& a = acts[block_index(id)];
    t.output_input.insert(t.output_input.end(), a.begin(), a.end());
  }
  double z = out.bias;
  for (std::size_t i = 0; i < out.weights.size(); ++i) z += out.weights[i] * t.output_input[i];
  t.output_pre = z;
  t.prediction = activate(out.activation, z);
  return t;
}

Vector NetworkGraph::parameters() const {
  Vector p;
  p.reserve(parameter_count());
  for (const auto& b : blocks_) {
    p.insert(p.end(), b.weights.data().begin(), b.weights.data().end());
    p.insert(p.end(), b.bias.begin(), b.bias.end());
  }
  if (output_) {
    p.insert(p.end(), output_->weights.begin(), output_->weights.end());
    p.push_back(output_->bias);
  }
  return p;
}

void NetworkGraph::set_parameters(std::span<const double> values) {
  if (values.size() != parameter_count()) {
    throw DimensionError("expected " + std::to_string(parameter_count()) + " parameters, got " +
                         std::to_string(values.size()));
  }
  std::size_t k = 0;
  for (auto& b : blocks_) {
    for (double& w : b.weights.data()) w = values[k++];
    for (double& v : b.bias) v = values[k++];
  }
  if (output_) {
    for (double& w : output_->weights) w = values[k++];
    output_->bias = values[k++];
  }
}

std::vector<bool> NetworkGraph::trainable_mask() const {
  std::vector<bool> mask;
  mask.reserve(parameter_count());
  for (const auto& b : blocks_) mask.insert(mask.end(), b.parameter_count(), b.trainable);
  if (output_) mask.insert(mask.end(), output_->parameter_count(), output_->trainable);
  return mask;
}

std::size_t NetworkGraph::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += b.parameter_count();
  if (output_) n += output_->parameter_count();
  return n;
}

std::size_t NetworkGraph::trainable_parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) {
    if (b.trainable) n += b.parameter_count();
  }
  if (output_ && output_->trainable) n += output_->parameter_count();
  return n;
}

std::vector<bool> NetworkGraph::trainable_flags() const {
  std::vector<bool> flags;
  for (const auto& b : blocks_) flags.push_back(b.trainable);
  if (output_) flags.push_back(output_->trainable);
  return flags;
}

void NetworkGraph::validate() const {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    if (i > 0 && b.id <= blocks_[i - 1].id) throw ContractError("block ids are not increasing");
    for (const auto& s : b.sources) {
      if (const auto* bs = std::get_if<BlockSource>(&s)) {
        if (!has_block(bs->id) || block_index(bs->id) >= i) {
          throw ContractError("block " + std::to_string(b.id) + " reads block " +
                              std::to_string(bs->id) + " which is not evaluated before it");
        }
      } else {
        for (std::size_t f : std::get<InputSource>(s).features) {
          if (f >= input_width_) throw ContractError("input feature index out of range");
        }
      }
    }
    if (b.weights.cols() != sources_width(b.sources) || b.bias.size() != b.weights.rows()) {
      throw ContractError("block " + std::to_string(b.id) + " has inconsistent shapes");
    }
    if (!all_finite(b.weights.data()) || !all_finite(b.bias)) {
      throw ContractError("block " + std::to_string(b.id) + " has non-finite parameters");
    }
  }
  if (output_) {
    std::size_t w = 0;
    for (BlockId id : output_->sources) {
      if (!has_block(id)) throw ContractError("output unit reads missing block");
      w += block(id).n_units();
    }
    if (w != output_->weights.size()) throw ContractError("output unit width mismatch");
  }
}

bool operator==(const UnitBlock& a, const UnitBlock& b) {
  return a.id == b.id && a.sources == b.sources && a.weights == b.weights && a.bias == b.bias &&
         a.activation == b.activation && a.trainable == b.trainable;
}

bool operator==(const OutputUnit& a, const OutputUnit& b) {
  return a.sources == b.sources && a.weights == b.weights && a.bias == b.bias &&
         a.activation == b.activation && a.trainable == b.trainable;
}

bool operator==(const NetworkGraph& a, const NetworkGraph& b) {
  return a.input_width_ == b.input_width_ && a.blocks_ == b.blocks_ && a.output_ == b.output_ &&
         a.exposed_ == b.exposed_ && a.next_id_ == b.next_id_;
}

NetworkGraph new_network(const NetworkSpec& spec) {
  if (spec.input_width == 0) throw InputError("new_network: input width must be at least 1");
  if (spec.layer_widths.empty()) throw InputError("new_network: at least one hidden layer required");
  for (std::size_t w : spec.layer_widths) {
    if (w == 0) throw InputError("new_network: hidden layer widths must be at least 1");
  }
  NetworkGraph net(spec.input_width);
  Rng rng(spec.seed);
  const InputSource first = spec.input_features.empty() ? InputSource::all(spec.input_width)
                                                        : InputSource{spec.input_features};
  std::vector<Source> sources{first};
  BlockId last = 0;
  for (std::size_t w : spec.layer_widths) {
    last = net.add_unit_block(w, sources, spec.hidden_activation, spec.init, spec.init, rng,
                              /*connect_to_output=*/false);
    sources = {BlockSource{last}};
  }
  OutputUnit out;
  out.activation = spec.output_activation;
  net.attach_output_unit(std::move(out));
  net.connect_to_output(last, spec.init, rng);
  return net;
}

NetworkGraph new_network(std::size_t input_width, const std::vector<std::size_t>& layer_widths,
                         Activation hidden, Activation output, const InitPolicy& init,
                         std::uint64_t seed) {
  NetworkSpec spec;
  spec.input_width = input_width;
  spec.layer_widths = layer_widths;
  spec.hidden_activation = hidden;
  spec.output_activation = output;
  spec.init = init;
  spec.seed = seed;
  return new_network(spec);
}

// ---------------------------------------------------------------------------
// Model files

namespace {

json source_to_json(const Source& s) {
  if (const auto* in = std::get_if<InputSource>(&s)) return json{{"input", in->features}};
  return json{{"block", std::get<BlockSource>(s).id}};
}

Source source_from_json(const json& j) {
  if (j.contains("input")) return InputSource{j.at("input").get<std::vector<std::size_t>>()};
  if (j.contains("block")) return BlockSource{j.at("block").get<BlockId>()};
  throw FormatError("model source entry has neither 'input' nor 'block'");
}

}  // namespace

std::string serialize_model(const NetworkGraph& net) {
  json j;
  j["format"] = kModelFormatName;
  j["format_version"] = kModelFormatVersion;
  j["input_width"] = net.input_width();
  j["next_block_id"] = net.next_block_id();
  json blocks = json::array();
  for (const auto& b : net.blocks()) {
    json jb;
    jb["id"] = b.id;
    jb["n_units"] = b.n_units();
    jb["activation"] = std::string(to_string(b.activation));
    jb["trainable"] = b.trainable;
    jb["sources"] = json::array();
    for (const auto& s : b.sources) jb["sources"].push_back(source_to_json(s));
    jb["weights"] = {{"rows", b.weights.rows()},
                     {"cols", b.weights.cols()},
                     {"data", codec::encode_doubles(b.weights.data())}};
    jb["bias"] = codec::encode_doubles(b.bias);
    blocks.push_back(std::move(jb));
  }
  j["blocks"] = std::move(blocks);
  if (net.has_output()) {
    const auto& o = net.output();
    const double bias[] = {o.bias};
    j["output"] = {{"sources", o.sources},
                   {"weights", codec::encode_doubles(o.weights)},
                   {"bias", codec::encode_doubles(bias)},
                   {"activation", std::string(to_string(o.activation))},
                   {"trainable", o.trainable}};
  } else {
    j["output"] = nullptr;
  }
  j["exposed"] = net.exposed_blocks();
  return j.dump(1);
}

NetworkGraph deserialize_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("model file is not valid JSON: ") + e.what());
  }
  const std::string expected = std::string(kModelFormatName) + " version " +
                               std::to_string(kModelFormatVersion);
  if (!j.is_object() || j.value("format", std::string{}) != kModelFormatName) {
    throw FormatError("not a model file: expected format '" + expected + "'");
  }
  if (j.value("format_version", -1) != kModelFormatVersion) {
    throw FormatError("unsupported model format version; expected " + expected);
  }
  try {
    NetworkGraph net(j.at("input_width").get<std::size_t>());
    for (const auto& jb : j.at("blocks")) {
      UnitBlock b;
      b.id = jb.at("id").get<BlockId>();
      b.activation = parse_activation(jb.at("activation").get<std::string>());
      b.trainable = jb.at("trainable").get<bool>();
      for (const auto& js : jb.at("sources")) b.sources.push_back(source_from_json(js));
      const auto& jw = jb.at("weights");
      b.weights = Matrix(jw.at("rows").get<std::size_t>(), jw.at("cols").get<std::size_t>(),
                         codec::decode_doubles(jw.at("data").get<std::string>()));
      b.bias = codec::decode_doubles(jb.at("bias").get<std::string>());
      if (b.n_units() != jb.at("n_units").get<std::size_t>()) {
        throw FormatError("block " + std::to_string(b.id) + " unit count disagrees with weights");
      }
      net.append_block(std::move(b));
    }
    const auto& jo = j.at("output");
    if (!jo.is_null()) {
      OutputUnit o;
      o.sources = jo.at("sources").get<std::vector<BlockId>>();
      o.weights = codec::decode_doubles(jo.at("weights").get<std::string>());
      const auto bias = codec::decode_doubles(jo.at("bias").get<std::string>());
      if (bias.size() != 1) throw FormatError("output bias must hold one value");
      o.bias = bias[0];
      o.activation = parse_activation(jo.at("activation").get<std::string>());
      o.trainable = jo.at("trainable").get<bool>();
      net.attach_output_unit(std::move(o));
    } else {
      // Re-create the headless state: the exposed list survives removal.
      const auto exposed = j.at("exposed").get<std::vector<BlockId>>();
      if (!exposed.empty()) {
        OutputUnit placeholder;
        placeholder.sources = exposed;
        std::size_t width = 0;
        for (BlockId id : exposed) width += net.block(id).n_units();
        placeholder.weights.assign(width, 0.0);
        net.attach_output_unit(std::move(placeholder));
        net.remove_output_unit();
      }
    }
    if (j.at("next_block_id").get<BlockId>() != net.next_block_id()) {
      throw FormatError("next_block_id does not follow the stored block ids");
    }
    net.validate();
    return net;
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(std::string("malformed model file (") + expected + "): " + e.what());
  }
}

void save_model(const NetworkGraph& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write model file " + path.string());
  out << serialize_model(net) << '\n';
  if (!out) throw InputError("failed writing model file " + path.string());
}

NetworkGraph load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open model file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_model(buf.str());
}

}  // namespace cnet
