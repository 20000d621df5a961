// cnet: data preparation, incremental training and reporting from the command line.
//
// Exit codes: 0 success, 2 input error, 3 data or format error, 4 contract
// violation during training.

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "cnet/error.hpp"
#include "commands.hpp"

namespace {

constexpr int kExitInput = 2;
constexpr int kExitData = 3;
constexpr int kExitContract = 4;

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::size_t> runs;
  std::optional<std::uint64_t> seed;
  std::string prepared;
  std::string output;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "experiment config (JSON); defaults to $CNET_CONFIG");
  cmd->add_option("--set", c.overrides, "override a config value, e.g. --set train.max_epochs=20")
      ->take_all();
  cmd->add_option("--runs", c.runs, "number of runs");
  cmd->add_option("--seed", c.seed, "base seed");
  cmd->add_option("--prepared", c.prepared, "directory of prepared chunk files");
  cmd->add_option("-o,--out-dir", c.output, "output directory");
}

cnet::cli::ExperimentConfig resolve(const Common& c, cnet::cli::json& effective) {
  std::string path = c.config;
  if (path.empty()) {
    if (const char* env = std::getenv("CNET_CONFIG"); env != nullptr) path = env;
  }
  std::vector<std::string> sets = c.overrides;
  if (c.runs) sets.push_back("runs=" + std::to_string(*c.runs));
  if (c.seed) sets.push_back("seed=" + std::to_string(*c.seed));
  if (!c.prepared.empty()) sets.push_back("prepared_dir=" + cnet::cli::json(c.prepared).dump());
  if (!c.output.empty()) sets.push_back("output_dir=" + cnet::cli::json(c.output).dump());
  return cnet::cli::load_config(path, sets, &effective);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constructive networks with incremental feature learning"};
  app.require_subcommand(1);

  Common common;
  cnet::cli::json effective;

  auto* prepare = app.add_subcommand("prepare", "load, dedup, chunk, split, normalize and oversample a CSV");
  std::string csv;
  add_common(prepare, common);
  prepare->add_option("--csv", csv, "input CSV (overrides data.csv)");

  auto* initial = app.add_subcommand("train-initial", "train a fresh initial network on one chunk");
  int chunk = 1;
  std::string eval_part;
  add_common(initial, common);
  initial->add_option("--chunk", chunk, "chunk to train on")->check(CLI::Range(1, 2));
  initial->add_option("--eval", eval_part, "evaluation data: chunkN.part or a dataset file");

  auto* refit = app.add_subcommand("refit", "continue training an initial model on chunk 2");
  std::string initial_path;
  add_common(refit, common);
  refit->add_option("--initial", initial_path, "model file or train-initial output directory")->required();

  auto* groups = app.add_subcommand("grow-groups", "grow one sub-network per relevancy-ordered feature group");
  std::string order;
  add_common(groups, common);
  groups->add_option("--order", order, "descending, ascending or none");

  auto* transfer = app.add_subcommand("grow-transfer", "transfer from chunk 1 and grow on chunk 2");
  std::string transfer_initial;
  add_common(transfer, common);
  transfer->add_option("--initial", transfer_initial,
                       "reuse a trained initial model (file or directory) instead of training one");

  auto* evaluate = app.add_subcommand("evaluate", "score a model file on a dataset");
  std::string model;
  std::string data;
  std::string name;
  std::string report_out;
  add_common(evaluate, common);
  evaluate->add_option("--model", model, "model file")->required();
  evaluate->add_option("--data", data, "chunkN.part, a dataset file or a CSV")->required();
  evaluate->add_option("--name", name, "model name in the report");
  evaluate->add_option("--report", report_out, "write the report here");

  auto* compare = app.add_subcommand("compare", "tabulate metrics reports against the first one");
  std::vector<std::string> reports;
  std::string compare_out;
  compare->add_option("reports", reports, "report files")->required()->expected(2, -1);
  compare->add_option("--out", compare_out, "write the comparison as JSON");

  auto* synth = app.add_subcommand("synth", "write a seeded synthetic CSV");
  std::string kind = "fraud";
  std::size_t rows = 1000;
  std::size_t features = 0;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  synth->add_option("--kind", kind, "fraud, drift or xor")->check(CLI::IsMember({"fraud", "drift", "xor"}));
  synth->add_option("--rows", rows, "row count");
  synth->add_option("--features", features, "feature count (default 28 for fraud, 8 for drift)");
  synth->add_option("--seed", synth_seed, "seed");
  synth->add_option("--out", synth_out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (cmd == "prepare") {
      if (!csv.empty()) common.overrides.push_back("data.csv=" + cnet::cli::json(csv).dump());
      cnet::cli::cmd_prepare(resolve(common, effective), effective);
    } else if (cmd == "train-initial") {
      cnet::cli::cmd_train_initial(resolve(common, effective), effective, chunk, eval_part);
    } else if (cmd == "refit") {
      cnet::cli::cmd_refit(resolve(common, effective), effective, initial_path);
    } else if (cmd == "grow-groups") {
      if (!order.empty()) common.overrides.push_back("groups.order=" + cnet::cli::json(order).dump());
      cnet::cli::cmd_grow_groups(resolve(common, effective), effective);
    } else if (cmd == "grow-transfer") {
      cnet::cli::cmd_grow_transfer(resolve(common, effective), effective, transfer_initial);
    } else if (cmd == "evaluate") {
      cnet::cli::cmd_evaluate(resolve(common, effective), model, data, name, report_out);
    } else if (cmd == "compare") {
      cnet::cli::cmd_compare(reports, compare_out);
    } else if (cmd == "synth") {
      if (features == 0) features = kind == "fraud" ? 28 : 8;
      cnet::cli::cmd_synth(kind, rows, features, synth_seed, synth_out);
    }
  } catch (const cnet::InputError& e) {
    std::cerr << "cnet " << cmd << ": input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const cnet::FormatError& e) {
    std::cerr << "cnet " << cmd << ": format error: " << e.what() << '\n';
    return kExitData;
  } catch (const cnet::DataError& e) {
    std::cerr << "cnet " << cmd << ": data error: " << e.what() << '\n';
    return kExitData;
  } catch (const cnet::ContractError& e) {
    std::cerr << "cnet " << cmd << ": contract violation: " << e.what() << '\n';
    return kExitContract;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "cnet " << cmd << ": input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "cnet " << cmd << ": error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
