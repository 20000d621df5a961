#include "config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "cnet/error.hpp"

namespace cnet::cli {

namespace {

const char* const kPartNames[] = {"train", "valid", "test"};

json parts_json(const std::vector<std::pair<std::string, double>>& parts) {
  json j = json::object();
  for (const auto& [name, f] : parts) j[name] = f;
  return j;
}

std::string kind_name(const json& v) {
  if (v.is_number()) return "number";
  return v.type_name();
}

bool same_kind(const json& want, const json& got) {
  if (want.is_number()) return got.is_number();
  return want.type() == got.type();
}

void check_shape(const json& schema, const json& given, const std::string& path) {
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!schema.contains(it.key())) throw InputError("unknown config key '" + key + "'");
    const json& want = schema.at(it.key());
    const json& got = it.value();
    if (!same_kind(want, got)) {
      throw InputError("config key '" + key + "' must be a " + kind_name(want) + ", got " +
                       kind_name(got));
    }
    if (key == "split.chunk1" || key == "split.chunk2") {
      for (auto p = got.begin(); p != got.end(); ++p) {
        if (std::find(std::begin(kPartNames), std::end(kPartNames), p.key()) == std::end(kPartNames)) {
          throw InputError("config key '" + key + "." + p.key() +
                           "': split parts must be train, valid or test");
        }
        if (!p.value().is_number()) throw InputError("config key '" + key + "." + p.key() + "' must be a number");
      }
    } else if (want.is_object()) {
      check_shape(want, got, key);
    }
  }
}

std::size_t count_of(const json& v, const std::string& key) {
  if (!v.is_number_integer() && !v.is_number_unsigned()) {
    throw InputError("config key '" + key + "' must be a non-negative integer");
  }
  if (v.get<long long>() < 0) throw InputError("config key '" + key + "' must be non-negative");
  return v.get<std::size_t>();
}

template <class F>
auto parse_named(const json& v, const std::string& key, F&& parse) {
  try {
    return parse(v.get<std::string>());
  } catch (const InputError& e) {
    throw InputError("config key '" + key + "': " + e.what());
  }
}

std::vector<std::pair<std::string, double>> parts_from(const json& j) {
  std::vector<std::pair<std::string, double>> parts;
  // Fixed order so the seeded split does not depend on key order in the file.
  for (const char* name : kPartNames) {
    if (j.contains(name)) parts.emplace_back(name, j.at(name).get<double>());
  }
  return parts;
}

}  // namespace

GrowthConfig ExperimentConfig::growth_config() const {
  GrowthConfig g;
  g.train = train;
  g.initial_units = network.initial_units;
  g.max_units = network.max_units;
  g.hidden_init = network.hidden_init;
  g.output_init = network.output_init;
  g.hidden_activation = network.hidden_activation;
  g.output_activation = network.output_activation;
  return g;
}

TransferConfig ExperimentConfig::transfer_config() const {
  TransferConfig t;
  t.growth = growth_config();
  t.initial_widths = network.initial_widths;
  t.initial_criterion = network.initial_criterion;
  return t;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["data"] = {{"csv", c.data.csv},
               {"label_column", c.data.label_column},
               {"time_column", c.data.time_column},
               {"drop_columns", c.data.drop_columns},
               {"chunk_boundary", c.data.chunk_boundary},
               {"dedup", c.data.dedup}};
  j["split"] = {{"chunk1", parts_json(c.split.chunk1)},
                {"chunk2", parts_json(c.split.chunk2)},
                {"stratified", c.split.stratified}};
  j["smote"] = {{"enabled", c.smote.enabled}, {"ratio", c.smote.ratio}, {"k", c.smote.k}};
  j["normalize"] = {{"lo", c.normalize_lo}, {"hi", c.normalize_hi}};
  j["groups"] = {{"count", c.groups.count},
                 {"order", std::string(to_string(c.groups.order))},
                 {"relevancy", std::string(to_string(c.groups.relevancy))},
                 {"chunk", c.groups.chunk}};
  j["network"] = {{"initial_widths", c.network.initial_widths},
                  {"hidden_activation", std::string(to_string(c.network.hidden_activation))},
                  {"output_activation", std::string(to_string(c.network.output_activation))},
                  {"hidden_init", to_string(c.network.hidden_init)},
                  {"output_init", to_string(c.network.output_init)},
                  {"initial_units", c.network.initial_units},
                  {"max_units", c.network.max_units},
                  {"initial_criterion", std::string(to_string(c.network.initial_criterion))}};
  const TrainConfig& t = c.train;
  j["train"] = {{"learning_rate", t.learning_rate},
                {"batch_size", t.batch_size},
                {"max_epochs", t.max_epochs},
                {"patience", t.patience},
                {"threshold", t.threshold},
                {"criterion", std::string(to_string(t.criterion))},
                {"loss", std::string(to_string(t.loss))},
                {"optimizer", std::string(to_string(t.optimizer))},
                {"momentum", t.momentum},
                {"adam_beta1", t.adam_beta1},
                {"adam_beta2", t.adam_beta2},
                {"adam_epsilon", t.adam_epsilon}};
  j["runs"] = c.runs;
  j["seed"] = c.seed;
  j["prepared_dir"] = c.prepared_dir;
  j["output_dir"] = c.output_dir;
  return j;
}

json default_config_json() { return to_json(ExperimentConfig{}); }

ExperimentConfig from_json(const json& j) {
  if (!j.is_object()) throw InputError("config must be a JSON object");
  const json schema = default_config_json();
  check_shape(schema, j, "");
  json full = schema;
  full.merge_patch(j);
  // merge_patch merges split parts key by key; a given split replaces the default one.
  for (const char* chunk : {"chunk1", "chunk2"}) {
    if (j.contains("split") && j["split"].contains(chunk)) full["split"][chunk] = j["split"][chunk];
  }

  ExperimentConfig c;
  const json& d = full["data"];
  c.data.csv = d["csv"].get<std::string>();
  c.data.label_column = d["label_column"].get<std::string>();
  c.data.time_column = d["time_column"].get<std::string>();
  c.data.drop_columns.clear();
  for (const auto& v : d["drop_columns"]) {
    if (!v.is_string()) throw InputError("config key 'data.drop_columns' must list strings");
    c.data.drop_columns.push_back(v.get<std::string>());
  }
  c.data.chunk_boundary = d["chunk_boundary"].get<double>();
  c.data.dedup = d["dedup"].get<bool>();

  c.split.chunk1 = parts_from(full["split"]["chunk1"]);
  c.split.chunk2 = parts_from(full["split"]["chunk2"]);
  c.split.stratified = full["split"]["stratified"].get<bool>();
  for (const auto* parts : {&c.split.chunk1, &c.split.chunk2}) {
    SplitSpec{*parts, c.split.stratified, 0}.validate();
    bool has_train = false;
    for (const auto& p : *parts) has_train |= p.first == "train";
    if (!has_train) throw InputError("config: every chunk split needs a train part");
  }

  c.smote.enabled = full["smote"]["enabled"].get<bool>();
  c.smote.ratio = full["smote"]["ratio"].get<double>();
  c.smote.k = count_of(full["smote"]["k"], "smote.k");
  if (c.smote.enabled && !(c.smote.ratio > 0)) throw InputError("config key 'smote.ratio' must be positive");

  c.normalize_lo = full["normalize"]["lo"].get<double>();
  c.normalize_hi = full["normalize"]["hi"].get<double>();
  if (!(c.normalize_lo < c.normalize_hi)) throw InputError("config: normalize.lo must be below normalize.hi");

  const json& g = full["groups"];
  c.groups.count = count_of(g["count"], "groups.count");
  if (c.groups.count == 0) throw InputError("config key 'groups.count' must be at least 1");
  c.groups.order = parse_named(g["order"], "groups.order", parse_group_order);
  c.groups.relevancy = parse_named(g["relevancy"], "groups.relevancy", parse_relevancy);
  c.groups.chunk = g["chunk"].get<int>();
  if (c.groups.chunk != 1 && c.groups.chunk != 2) throw InputError("config key 'groups.chunk' must be 1 or 2");

  const json& n = full["network"];
  c.network.initial_widths.clear();
  for (const auto& w : n["initial_widths"]) {
    const std::size_t width = count_of(w, "network.initial_widths");
    if (width == 0) throw InputError("config key 'network.initial_widths' entries must be positive");
    c.network.initial_widths.push_back(width);
  }
  if (c.network.initial_widths.empty()) throw InputError("config key 'network.initial_widths' is empty");
  c.network.hidden_activation = parse_named(n["hidden_activation"], "network.hidden_activation", parse_activation);
  c.network.output_activation = parse_named(n["output_activation"], "network.output_activation", parse_activation);
  c.network.hidden_init = parse_named(n["hidden_init"], "network.hidden_init", parse_init_policy);
  c.network.output_init = parse_named(n["output_init"], "network.output_init", parse_init_policy);
  c.network.initial_units = count_of(n["initial_units"], "network.initial_units");
  c.network.max_units = count_of(n["max_units"], "network.max_units");
  c.network.initial_criterion = parse_named(n["initial_criterion"], "network.initial_criterion", parse_criterion);

  const json& t = full["train"];
  c.train.learning_rate = t["learning_rate"].get<double>();
  c.train.batch_size = count_of(t["batch_size"], "train.batch_size");
  c.train.max_epochs = count_of(t["max_epochs"], "train.max_epochs");
  c.train.patience = count_of(t["patience"], "train.patience");
  c.train.threshold = t["threshold"].get<double>();
  c.train.criterion = parse_named(t["criterion"], "train.criterion", parse_criterion);
  c.train.loss = parse_named(t["loss"], "train.loss", parse_loss);
  c.train.optimizer = parse_named(t["optimizer"], "train.optimizer", parse_optimizer);
  c.train.momentum = t["momentum"].get<double>();
  c.train.adam_beta1 = t["adam_beta1"].get<double>();
  c.train.adam_beta2 = t["adam_beta2"].get<double>();
  c.train.adam_epsilon = t["adam_epsilon"].get<double>();

  c.runs = count_of(full["runs"], "runs");
  if (c.runs == 0) throw InputError("config key 'runs' must be at least 1");
  c.seed = count_of(full["seed"], "seed");
  c.prepared_dir = full["prepared_dir"].get<std::string>();
  c.output_dir = full["output_dir"].get<std::string>();

  c.growth_config().validate();
  return c;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw InputError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw InputError("override key '" + path + "' is malformed");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    if (!node->contains(key) || !(*node)[key].is_object()) (*node)[key] = json::object();
    node = &(*node)[key];
    start = dot + 1;
  }
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides, json* effective) {
  json j = json::object();
  if (!path.empty()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    j = json::parse(buf.str(), nullptr, false);
    if (j.is_discarded()) throw InputError("config file " + path.string() + " is not valid JSON");
    if (!j.is_object()) throw InputError("config file " + path.string() + " must hold a JSON object");
  }
  for (const auto& o : overrides) apply_override(j, o);
  ExperimentConfig cfg;
  try {
    cfg = from_json(j);
  } catch (const InputError& e) {
    throw InputError(path.empty() ? std::string(e.what()) : path.string() + ": " + e.what());
  }
  if (effective != nullptr) *effective = to_json(cfg);
  return cfg;
}

}  // namespace cnet::cli
