#pragma once

// Helpers shared by the unit and acceptance suites: a naive recursive
// evaluator that does not reuse NetworkGraph's forward pass, and a random
// topology generator.

#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "cnet/netgraph.hpp"

namespace cnet::testing {

// Evaluates the activations of block `id` by recursion over its sources.
inline Vector naive_block(const NetworkGraph& net, BlockId id, std::span<const double> x,
                          std::map<BlockId, Vector>& memo) {
  if (auto it = memo.find(id); it != memo.end()) return it->second;
  const UnitBlock& b = net.block(id);
  Vector in;
  for (const Source& s : b.sources) {
    if (const auto* is = std::get_if<InputSource>(&s)) {
      for (std::size_t f : is->features) in.push_back(x[f]);
    } else {
      const Vector v = naive_block(net, std::get<BlockSource>(s).id, x, memo);
      in.insert(in.end(), v.begin(), v.end());
    }
  }
  Vector out(b.n_units());
  for (std::size_t u = 0; u < b.n_units(); ++u) {
    double z = b.bias[u];
    for (std::size_t c = 0; c < in.size(); ++c) z += b.weights(u, c) * in[c];
    out[u] = activate(b.activation, z);
  }
  memo[id] = out;
  return out;
}

inline double naive_predict(const NetworkGraph& net, std::span<const double> x) {
  std::map<BlockId, Vector> memo;
  const OutputUnit& o = net.output();
  double z = o.bias;
  std::size_t k = 0;
  for (BlockId id : o.sources) {
    for (double v : naive_block(net, id, x, memo)) z += o.weights[k++] * v;
  }
  return activate(o.activation, z);
}

struct RandomNetOptions {
  std::size_t max_blocks = 3;
  std::size_t max_units = 10;  // total hidden units
  std::size_t max_inputs = 4;
  Activation output_activation = Activation::sigmoid;
  double weight_scale = 0.8;
};

// A random network with 1..max_blocks blocks whose sources mix input
// subsets and earlier blocks, with every block wired into the output.
inline NetworkGraph random_network(Rng& rng, const RandomNetOptions& opt = {}) {
  std::uniform_int_distribution<std::size_t> n_in(1, opt.max_inputs);
  const std::size_t d = n_in(rng);
  NetworkGraph net(d);
  OutputUnit out;
  out.activation = opt.output_activation;
  net.attach_output_unit(out);
  std::uniform_int_distribution<std::size_t> n_blocks(1, opt.max_blocks);
  const std::size_t blocks = n_blocks(rng);
  std::size_t units_left = opt.max_units;
  const Activation acts[] = {Activation::relu, Activation::sigmoid, Activation::tanh,
                             Activation::identity};
  std::uniform_int_distribution<int> pick_act(0, 3);
  std::bernoulli_distribution coin(0.5);
  const InitPolicy init = InitPolicy::gaussian(opt.weight_scale);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t remaining_blocks = blocks - b - 1;
    std::uniform_int_distribution<std::size_t> n_units(1, std::max<std::size_t>(1, std::min<std::size_t>(4, units_left - remaining_blocks)));
    const std::size_t n = n_units(rng);
    units_left -= n;
    std::vector<Source> sources;
    InputSource in;
    for (std::size_t f = 0; f < d; ++f) {
      if (coin(rng)) in.features.push_back(f);
    }
    for (const UnitBlock& prev : net.blocks()) {
      if (coin(rng)) sources.push_back(BlockSource{prev.id});
    }
    if (!in.features.empty() || sources.empty()) {
      if (in.features.empty()) in = InputSource::all(d);
      sources.insert(sources.begin(), in);
    }
    net.add_unit_block(n, std::move(sources), acts[pick_act(rng)], init, init, rng, true);
  }
  // Non-zero biases so every code path sees them.
  Vector p = net.parameters();
  std::normal_distribution<double> g(0.0, 0.3);
  std::size_t k = 0;
  for (const UnitBlock& b : net.blocks()) {
    k += b.weights.size();
    for (std::size_t u = 0; u < b.n_units(); ++u) p[k++] = g(rng);
  }
  p.back() = g(rng);
  net.set_parameters(p);
  return net;
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12});
}

}  // namespace cnet::testing
