#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "codec.hpp"
#include "cnet/error.hpp"
#include "cnet/netgraph.hpp"
#include "support.hpp"

using namespace cnet;

namespace {

Vector random_input(Rng& rng, std::size_t d) {
  std::normal_distribution<double> g(0.0, 2.0);
  Vector x(d);
  for (double& v : x) v = g(rng);
  return x;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("cnet_netgraph_" + name);
}

}  // namespace

TEST_CASE("500-10 initial topology parameter count") {
  const NetworkGraph net =
      new_network(29, {500, 10}, Activation::relu, Activation::sigmoid, InitPolicy::gaussian(), 7);
  CHECK(net.parameter_count() == 29 * 500 + 500 + 500 * 10 + 10 + 10 * 1 + 1);
  CHECK(net.blocks().size() == 2);
  CHECK(net.output().sources == std::vector<BlockId>{net.blocks()[1].id});
}

TEST_CASE("zero network computes the output bias") {
  NetworkGraph net =
      new_network(2, {1}, Activation::identity, Activation::identity, InitPolicy::zeros(), 99);
  Vector p = net.parameters();
  p.back() = 1.25;
  net.set_parameters(p);
  CHECK(net.predict(Vector{3, -7}) == 1.25);
  CHECK(net.predict(Vector{0, 0}) == 1.25);

  const NetworkGraph sig =
      new_network(3, {2}, Activation::relu, Activation::sigmoid, InitPolicy::zeros(), 1);
  CHECK(sig.predict(Vector{1, 2, 3}) == 0.5);
}

TEST_CASE("new_network is deterministic and validates widths") {
  const auto a = new_network(5, {4, 3}, Activation::relu, Activation::sigmoid, InitPolicy::gaussian(), 3);
  const auto b = new_network(5, {4, 3}, Activation::relu, Activation::sigmoid, InitPolicy::gaussian(), 3);
  const auto c = new_network(5, {4, 3}, Activation::relu, Activation::sigmoid, InitPolicy::gaussian(), 4);
  CHECK(a.parameters() == b.parameters());
  CHECK(a.parameters() != c.parameters());
  CHECK_THROWS_AS(new_network(0, {2}, Activation::relu, Activation::sigmoid, InitPolicy::zeros(), 0), InputError);
  CHECK_THROWS_AS(new_network(3, {2, 0}, Activation::relu, Activation::sigmoid, InitPolicy::zeros(), 0), InputError);
}

TEST_CASE("hand-built network: relu unit into identity output") {
  NetworkGraph net(2);
  UnitBlock b;
  b.id = 0;
  b.sources = {InputSource::all(2)};
  b.weights = Matrix::from_rows({{1, 1}});
  b.bias = {0};
  b.activation = Activation::relu;
  net.append_block(b);
  OutputUnit o;
  o.sources = {0};
  o.weights = {2};
  o.bias = 1;
  o.activation = Activation::identity;
  net.attach_output_unit(o);
  CHECK(net.predict(Vector{1, 2}) == 7.0);
}

TEST_CASE("forward agrees with a naive recursive evaluator") {
  Rng rng(2024);
  for (int n = 0; n < 20; ++n) {
    const NetworkGraph net = testing::random_network(rng);
    for (int i = 0; i < 50; ++i) {
      const Vector x = random_input(rng, net.input_width());
      CHECK(std::abs(net.predict(x) - testing::naive_predict(net, x)) <= 1e-12);
    }
  }
}

TEST_CASE("zero output init leaves predictions unchanged") {
  Rng rng(8);
  NetworkGraph net =
      new_network(4, {3}, Activation::relu, Activation::sigmoid, InitPolicy::gaussian(0.5), 8);
  std::vector<Vector> xs;
  std::vector<double> before;
  for (int i = 0; i < 100; ++i) {
    xs.push_back(random_input(rng, 4));
    before.push_back(net.predict(xs.back()));
  }
  net.add_unit_block(1, {InputSource::all(4)}, Activation::relu, InitPolicy::gaussian(1.0),
                     InitPolicy::zeros(), rng);
  for (int i = 0; i < 100; ++i) CHECK(net.predict(xs[i]) == before[i]);
}

TEST_CASE("adding two units grows the parameter count by 2 * width + 2 + 2") {
  NetworkGraph net =
      new_network(6, {3}, Activation::relu, Activation::sigmoid, InitPolicy::gaussian(), 1);
  Rng rng(1);
  const std::size_t before = net.parameter_count();
  net.add_unit_block(2, {InputSource::all(6)}, Activation::relu, InitPolicy::gaussian(),
                     InitPolicy::zeros(), rng);
  CHECK(net.parameter_count() == before + 2 * 6 + 2 + 2);
  // Reading an earlier block: width is that block's unit count.
  const std::size_t mid = net.parameter_count();
  net.add_unit_block(2, {BlockSource{0}}, Activation::relu, InitPolicy::gaussian(),
                     InitPolicy::zeros(), rng);
  CHECK(net.parameter_count() == mid + 2 * 3 + 2 + 2);
}

TEST_CASE("new block biases are zero and dangling sources are rejected") {
  NetworkGraph net =
      new_network(3, {2}, Activation::relu, Activation::sigmoid, InitPolicy::gaussian(), 1);
  Rng rng(2);
  const BlockId id = net.add_unit_block(3, {InputSource::all(3)}, Activation::tanh,
                                        InitPolicy::xavier(), InitPolicy::zeros(), rng);
  CHECK(net.block(id).bias == Vector{0, 0, 0});
  CHECK_THROWS_AS(net.add_unit_block(1, {BlockSource{42}}, Activation::relu, InitPolicy::gaussian(),
                                     InitPolicy::zeros(), rng),
                  InputError);
  CHECK_THROWS_AS(net.add_unit_block(1, {InputSource{{7}}}, Activation::relu, InitPolicy::gaussian(),
                                     InitPolicy::zeros(), rng),
                  InputError);
}

TEST_CASE("init policy samplers") {
  Rng rng(77);
  const InitPolicy g = InitPolicy::gaussian(0.01);
  double sum = 0, sq = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double v = g.sample(rng, 5, 1);
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  CHECK(sd >= 0.008);
  CHECK(sd <= 0.012);

  const double bound = std::sqrt(6.0 / (8 + 2));
  for (int i = 0; i < 1000; ++i) {
    const double v = InitPolicy::xavier().sample(rng, 8, 2);
    CHECK(std::abs(v) <= bound);
    CHECK(InitPolicy::zeros().sample(rng, 8, 2) == 0.0);
  }
  CHECK(parse_init_policy("gaussian:0.05") == InitPolicy::gaussian(0.05));
  CHECK(parse_init_policy("gaussian") == InitPolicy::gaussian(0.01));
  CHECK(parse_init_policy(to_string(InitPolicy::xavier())) == InitPolicy::xavier());
  CHECK_THROWS_AS(parse_init_policy("he"), InputError);
}

TEST_CASE("set_trainable selectors") {
  NetworkGraph net =
      new_network(3, {2, 2}, Activation::relu, Activation::sigmoid, InitPolicy::gaussian(), 1);
  Rng rng(3);
  const BlockId id = net.add_unit_block(1, {InputSource::all(3)}, Activation::relu,
                                        InitPolicy::gaussian(), InitPolicy::zeros(), rng);
  net.set_trainable(TrainableSelector::new_and_output(), true);
  CHECK(net.trainable_flags() == std::vector<bool>{false, false, true, true});
  CHECK(net.block(id).trainable);
  CHECK(net.trainable_parameter_count() == net.block(id).parameter_count() + net.output().parameter_count());

  net.set_trainable(TrainableSelector::all(), false);
  CHECK(net.trainable_parameter_count() == 0);
  net.set_trainable(TrainableSelector::blocks({0}), true);
  CHECK(net.trainable_flags() == std::vector<bool>{true, false, false, false});
  CHECK_THROWS_AS(net.set_trainable(TrainableSelector::blocks({99}), true), InputError);

  // Mask is parallel to parameters().
  const auto mask = net.trainable_mask();
  CHECK(mask.size() == net.parameter_count());
  CHECK(static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true)) ==
        net.block(0).parameter_count());
}

TEST_CASE("output unit surgery") {
  NetworkGraph net =
      new_network(29, {500, 10}, Activation::relu, Activation::sigmoid, InitPolicy::gaussian(0.05), 7);
  Rng rng(4);
  const Vector x = random_input(rng, 29);
  const ForwardTrace tr = net.trace(x);
  const Vector last_hidden = tr.blocks.back().out;

  NetworkGraph headless = net;
  const OutputUnit detached = headless.remove_output_unit();
  CHECK_FALSE(headless.has_output());
  CHECK(headless.feature_width() == 10);
  CHECK(headless.features(x) == last_hidden);
  CHECK_THROWS_AS(headless.remove_output_unit(), ContractError);
  CHECK_THROWS_AS(headless.predict(x), ContractError);

  headless.attach_output_unit(detached);
  CHECK(headless.predict(x) == net.predict(x));
  CHECK(headless == net);
}

TEST_CASE("parameter flattening round-trips") {
  Rng rng(5);
  NetworkGraph net = testing::random_network(rng);
  Vector p = net.parameters();
  CHECK(p.size() == net.parameter_count());
  for (double& v : p) v += 0.5;
  net.set_parameters(p);
  CHECK(net.parameters() == p);
  CHECK_THROWS_AS(net.set_parameters(Vector(p.size() + 1)), DimensionError);
}

TEST_CASE("parameter accounting: concatenation owns nothing") {
  Rng rng(6);
  for (int i = 0; i < 20; ++i) {
    const NetworkGraph net = testing::random_network(rng);
    std::size_t expected = 0;
    for (const UnitBlock& b : net.blocks()) {
      expected += b.n_units() * net.sources_width(b.sources) + b.n_units();
    }
    expected += net.output().weights.size() + 1;
    CHECK(net.parameter_count() == expected);
  }
}

TEST_CASE("codec round-trips arbitrary doubles bit-exactly") {
  Rng rng(9);
  std::normal_distribution<double> g(0.0, 1e3);
  for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 7u, 64u}) {
    Vector v(n);
    for (double& x : v) x = g(rng);
    if (n > 2) {
      v[0] = -0.0;
      v[1] = 5e-324;
    }
    const Vector back = codec::decode_doubles(codec::encode_doubles(v));
    REQUIRE(back.size() == v.size());
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::bit_cast<std::uint64_t>(back[i]) == std::bit_cast<std::uint64_t>(v[i]));
    }
  }
  // 1.0 little-endian is 00 00 00 00 00 00 F0 3F.
  CHECK(codec::encode_doubles(Vector{1.0}) == "AAAAAAAA8D8=");
}

TEST_CASE("model file round trip") {
  Rng rng(10);
  NetworkGraph net =
      new_network(4, {3}, Activation::relu, Activation::sigmoid, InitPolicy::gaussian(0.5), 10);
  net.add_unit_block(1, {InputSource::all(4)}, Activation::relu, InitPolicy::gaussian(0.5),
                     InitPolicy::gaussian(0.5), rng);
  net.add_unit_block(2, {BlockSource{0}, InputSource{{1, 3}}}, Activation::tanh,
                     InitPolicy::gaussian(0.5), InitPolicy::gaussian(0.5), rng);
  net.set_trainable(TrainableSelector::new_and_output(), true);

  const auto path = temp_path("roundtrip.cnet.json");
  save_model(net, path);
  const NetworkGraph back = load_model(path);
  CHECK(back == net);
  CHECK(back.trainable_flags() == net.trainable_flags());
  CHECK(back.next_block_id() == net.next_block_id());
  for (int i = 0; i < 100; ++i) {
    const Vector x = random_input(rng, 4);
    CHECK(back.predict(x) == net.predict(x));
  }
  CHECK(serialize_model(back) == serialize_model(net));

  SUBCASE("headless state survives") {
    NetworkGraph h = net;
    h.remove_output_unit();
    const NetworkGraph hb = deserialize_model(serialize_model(h));
    CHECK_FALSE(hb.has_output());
    CHECK(hb.exposed_blocks() == h.exposed_blocks());
    CHECK(hb == h);
  }
  std::filesystem::remove(path);
}

TEST_CASE("corrupt model files raise format errors") {
  const NetworkGraph net =
      new_network(2, {2}, Activation::relu, Activation::sigmoid, InitPolicy::gaussian(), 1);
  std::string text = serialize_model(net);

  std::string wrong_magic = text;
  wrong_magic.replace(wrong_magic.find("cnet-model"), 10, "cnet-modem");
  try {
    deserialize_model(wrong_magic);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("cnet-model") != std::string::npos);
  }

  std::string wrong_version = text;
  const auto pos = wrong_version.find("\"format_version\"");
  REQUIRE(pos != std::string::npos);
  wrong_version.replace(wrong_version.find('1', pos), 1, "9");
  try {
    deserialize_model(wrong_version);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("version 1") != std::string::npos);
  }

  CHECK_THROWS_AS(deserialize_model("{not json"), FormatError);
  CHECK_THROWS_AS(deserialize_model("{}"), FormatError);
  CHECK_THROWS_AS(load_model(temp_path("does-not-exist.cnet.json")), InputError);
}

TEST_CASE("validate catches a block reading a later block") {
  NetworkGraph net =
      new_network(2, {2}, Activation::relu, Activation::sigmoid, InitPolicy::gaussian(), 1);
  CHECK_NOTHROW(net.validate());
  net.blocks()[0].sources = {BlockSource{0}};
  CHECK_THROWS_AS(net.validate(), ContractError);
}
