#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "cnet/error.hpp"
#include "cnet/evalkit.hpp"
#include "cnet/growth.hpp"
#include "cnet/random.hpp"
#include "cnet/synthetic.hpp"

namespace fs = std::filesystem;

namespace cnet::cli {

namespace {

// Re-throws library errors with the pipeline stage prefixed, keeping the type.
template <class F>
auto stage(const std::string& name, F&& f) {
  auto tag = [&](const std::exception& e) { return name + ": " + e.what(); };
  try {
    return f();
  } catch (const DimensionError& e) {
    throw DimensionError(tag(e));
  } catch (const InputError& e) {
    throw InputError(tag(e));
  } catch (const FormatError& e) {
    throw FormatError(tag(e));
  } catch (const DataError& e) {
    throw DataError(tag(e));
  } catch (const ContractError& e) {
    throw ContractError(tag(e));
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create directory " + dir.string() + ": " + ec.message());
}

fs::path part_path(const ExperimentConfig& cfg, int chunk, const std::string& part) {
  return fs::path(cfg.prepared_dir) / ("chunk" + std::to_string(chunk) + "-" + part + ".json");
}

bool has_part(const ExperimentConfig& cfg, int chunk, const std::string& part) {
  const auto& parts = chunk == 1 ? cfg.split.chunk1 : cfg.split.chunk2;
  for (const auto& p : parts) {
    if (p.first == part) return true;
  }
  return false;
}

Dataset load_part(const ExperimentConfig& cfg, int chunk, const std::string& part) {
  if (!has_part(cfg, chunk, part)) {
    throw InputError("chunk " + std::to_string(chunk) + " has no '" + part + "' part in the split config");
  }
  const fs::path p = part_path(cfg, chunk, part);
  if (!fs::exists(p)) throw InputError("prepared file " + p.string() + " is missing; run `cnet prepare` first");
  return load_dataset(p);
}

std::optional<Dataset> maybe_part(const ExperimentConfig& cfg, int chunk, const std::string& part) {
  if (!has_part(cfg, chunk, part)) return std::nullopt;
  return load_part(cfg, chunk, part);
}

// "chunk2.test" names a prepared part; anything else is a dataset file.
Dataset load_named_data(const ExperimentConfig& cfg, const std::string& spec) {
  if (spec.size() > 7 && spec.rfind("chunk", 0) == 0 && spec[6] == '.' && (spec[5] == '1' || spec[5] == '2')) {
    return load_part(cfg, spec[5] - '0', spec.substr(7));
  }
  const fs::path p(spec);
  if (p.extension() == ".csv") return load_csv(p, cfg.data.label_column, cfg.data.drop_columns);
  return load_dataset(p);
}

json counts_json(const Dataset& ds) {
  const auto c = ds.class_counts();
  return {{"rows", ds.rows()}, {"class0", c[0]}, {"class1", c[1]}};
}

json train_json(const TrainResult& t) {
  return {{"epochs_run", t.epochs_run},
          {"initial_metric", t.initial_metric},
          {"final_metric", t.final_metric},
          {"metric_history", t.metric_history},
          {"stopped_by", std::string(to_string(t.stopped_by))},
          {"wall_time", t.wall_time}};
}

json growth_json(const GrowthTrace& g) {
  json steps = json::array();
  for (const auto& s : g.steps) {
    steps.push_back({{"units_total", s.units_total},
                     {"metric_before", s.metric_before},
                     {"metric_after", s.metric_after},
                     {"previous_accepted", s.previous_accepted ? json(*s.previous_accepted) : json(nullptr)},
                     {"compared", s.compared},
                     {"accepted", s.accepted},
                     {"epochs", s.epochs},
                     {"wall_time", s.wall_time}});
  }
  return {{"steps", steps},
          {"stop_reason", std::string(to_string(g.stop_reason))},
          {"final_units", g.final_units},
          {"final_metric", g.final_metric},
          {"comparisons", g.comparisons()},
          {"wall_time", g.wall_time}};
}

MetricsReport score(const NetworkGraph& net, const Dataset& test, double wall_time) {
  return metrics(confusion(predict(net, test), test.y), wall_time);
}

struct RunOutput {
  NetworkGraph model{1};
  MetricsReport report;
  json trace;
  std::string series_name;
  std::vector<double> series;
  std::vector<std::pair<std::string, NetworkGraph>> extra_models;
};

// Writes run-k files, trace.json, metrics.json and effective-config.json.
std::string finish(const ExperimentConfig& cfg, const json& effective, const std::string& dir_name,
                   const std::string& report_name, std::vector<RunOutput>& runs) {
  const fs::path dir = fs::path(cfg.output_dir) / dir_name;
  make_dir(dir);
  json traces = json::array();
  std::vector<std::uint64_t> index;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const std::string stem = "run-" + std::to_string(k);
    save_model(runs[k].model, dir / (stem + ".cnet.json"));
    for (const auto& [suffix, m] : runs[k].extra_models) save_model(m, dir / (stem + "." + suffix + ".cnet.json"));
    write_text(dir / (stem + ".series.csv"), series_csv(runs[k].series_name, runs[k].series));
    json t = runs[k].trace;
    t["run"] = k;
    traces.push_back(std::move(t));
    index.push_back(k);
  }
  const MetricsReport avg = multi_run([&](std::uint64_t k) { return runs[k].report; }, index);
  save_report(avg, dir / "metrics.json", report_name);
  write_text(dir / "trace.json", json{{"name", report_name}, {"runs", traces}}.dump(1));
  write_text(dir / "effective-config.json", effective.dump(2));
  std::cout << report_name << ": runs " << avg.runs << "  precision " << avg.precision << "  recall "
            << avg.recall << "  f1 " << avg.f1 << "  fnr " << avg.fnr << "  accuracy " << avg.accuracy
            << "  time " << avg.wall_time << "s\n"
            << "wrote " << dir.string() << '\n';
  return dir.string();
}

// A directory supplies run-k.cnet.json per run; a file serves every run.
NetworkGraph initial_for_run(const std::string& initial, std::size_t k) {
  const fs::path p(initial);
  if (fs::is_directory(p)) {
    const fs::path f = p / ("run-" + std::to_string(k) + ".cnet.json");
    if (!fs::exists(f)) throw InputError("initial model " + f.string() + " is missing");
    return load_model(f);
  }
  if (!fs::exists(p)) throw InputError("initial model " + p.string() + " does not exist");
  return load_model(p);
}

json range_json(const RangeRecord& r, const std::vector<std::string>& names) {
  json constant = json::array();
  for (auto f : r.constant_features) constant.push_back(names.at(f));
  return {{"lo", r.lo}, {"hi", r.hi}, {"features", names}, {"min", r.min}, {"max", r.max},
          {"constant_features", constant}};
}

}  // namespace

std::string cmd_prepare(const ExperimentConfig& cfg, const json& effective) {
  if (cfg.data.csv.empty()) throw InputError("prepare: data.csv is not set");
  const fs::path csv(cfg.data.csv);
  if (!fs::exists(csv)) throw InputError("prepare: CSV file " + csv.string() + " does not exist");

  const Dataset raw = stage("prepare[load]", [&] { return load_csv(csv, cfg.data.label_column); });
  json summary;
  summary["source"] = csv.filename().string();
  summary["loaded"] = counts_json(raw);

  Dataset clean = raw;
  std::size_t removed = 0;
  if (cfg.data.dedup) {
    auto d = stage("prepare[dedup]", [&] { return cnet::dedup(raw); });
    clean = std::move(d.data);
    removed = d.removed;
  }
  summary["duplicates_removed"] = removed;
  summary["after_dedup"] = counts_json(clean);

  auto [c1, c2] = stage("prepare[chunk]", [&] {
    const Vector times = clean.column(clean.feature_index(cfg.data.time_column));
    return chunk_by_time(clean, times, cfg.data.chunk_boundary);
  });
  c1 = stage("prepare[drop]", [&] { return c1.drop_features(cfg.data.drop_columns); });
  c2 = stage("prepare[drop]", [&] { return c2.drop_features(cfg.data.drop_columns); });
  summary["chunk_boundary"] = cfg.data.chunk_boundary;
  summary["features"] = c1.feature_names;

  std::map<std::string, Dataset> parts1 = stage("prepare[split]", [&] {
    return stratified_split(c1, SplitSpec{cfg.split.chunk1, cfg.split.stratified, derive_seed(cfg.seed, 1)});
  });
  std::map<std::string, Dataset> parts2 = stage("prepare[split]", [&] {
    return stratified_split(c2, SplitSpec{cfg.split.chunk2, cfg.split.stratified, derive_seed(cfg.seed, 2)});
  });

  const NormalizeResult norm =
      stage("prepare[normalize]", [&] { return normalize_range(parts1.at("train"), cfg.normalize_lo, cfg.normalize_hi); });
  json warnings = norm.warnings;

  const fs::path dir(cfg.prepared_dir);
  make_dir(dir);
  json chunks;
  for (int chunk : {1, 2}) {
    auto& parts = chunk == 1 ? parts1 : parts2;
    const Dataset& whole = chunk == 1 ? c1 : c2;
    json cj = counts_json(whole);
    for (auto& [name, data] : parts) {
      Dataset scaled = stage("prepare[normalize]", [&] { return norm.record.apply(data); });
      json pj = counts_json(scaled);
      std::size_t synthetic = 0;
      if (name == "train" && cfg.smote.enabled) {
        const auto counts = scaled.class_counts();
        const std::size_t n_min = std::min(counts[0], counts[1]);
        const std::size_t n_maj = std::max(counts[0], counts[1]);
        if (cfg.smote.ratio * static_cast<double>(n_maj) < static_cast<double>(n_min)) {
          warnings.push_back("chunk" + std::to_string(chunk) + " train: minority ratio already above " +
                             std::to_string(cfg.smote.ratio) + ", SMOTE skipped");
        } else {
          auto s = stage("prepare[smote]", [&] {
            return smote(scaled, cfg.smote.ratio, cfg.smote.k, derive_seed(cfg.seed, 10 + chunk));
          });
          synthetic = s.synthetic;
          scaled = std::move(s.data);
        }
        pj["after_smote"] = counts_json(scaled);
      }
      pj["smote_synthetic"] = synthetic;
      cj["parts"][name] = pj;
      scaled.provenance = "chunk" + std::to_string(chunk) + "-" + name;
      save_dataset(scaled, part_path(cfg, chunk, name));
    }
    chunks["chunk" + std::to_string(chunk)] = cj;
  }
  summary["chunks"] = chunks;
  summary["warnings"] = warnings;

  write_text(dir / "normalization.json", range_json(norm.record, c1.feature_names).dump(1));
  write_text(dir / "summary.json", summary.dump(2));
  write_text(dir / "effective-config.json", effective.dump(2));
  std::cout << summary.dump(2) << '\n' << "wrote " << dir.string() << '\n';
  return dir.string();
}

std::string cmd_train_initial(const ExperimentConfig& cfg, const json& effective, int chunk,
                              const std::string& eval_part) {
  if (chunk != 1 && chunk != 2) throw InputError("train-initial: --chunk must be 1 or 2");
  const Dataset train_data = stage("train-initial[load]", [&] { return load_part(cfg, chunk, "train"); });
  const auto valid = stage("train-initial[load]", [&] { return maybe_part(cfg, chunk, "valid"); });
  const std::string eval_spec = eval_part.empty() ? "chunk" + std::to_string(chunk) + ".test" : eval_part;
  const Dataset test = stage("train-initial[load]", [&] { return load_named_data(cfg, eval_spec); });

  std::vector<RunOutput> runs;
  const auto seeds = default_seeds(cfg.runs, cfg.seed);
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    TransferConfig tc = cfg.transfer_config();
    tc.growth.train.seed = seeds[k];
    RunOutput out;
    out.model = build_initial_model(train_data.cols(), tc);
    const TrainResult tr = stage("train-initial[train]", [&] {
      return train(out.model, train_data, valid ? &*valid : nullptr, tc.initial_train_config());
    });
    out.report = score(out.model, test, tr.wall_time);
    out.trace = {{"seed", seeds[k]}, {"training", train_json(tr)}};
    out.series_name = std::string(to_string(tc.initial_criterion));
    out.series = tr.metric_history;
    runs.push_back(std::move(out));
  }
  const std::string name = "initial@c" + std::to_string(chunk);
  return finish(cfg, effective, "initial-c" + std::to_string(chunk), name, runs);
}

std::string cmd_refit(const ExperimentConfig& cfg, const json& effective, const std::string& initial) {
  const Dataset train_data = stage("refit[load]", [&] { return load_part(cfg, 2, "train"); });
  const auto valid = stage("refit[load]", [&] { return maybe_part(cfg, 2, "valid"); });
  const Dataset test = stage("refit[load]", [&] { return load_part(cfg, 2, "test"); });

  std::vector<RunOutput> runs;
  const auto seeds = default_seeds(cfg.runs, cfg.seed);
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    const NetworkGraph start = stage("refit[load]", [&] { return initial_for_run(initial, k); });
    TrainConfig tc = cfg.train;
    tc.seed = seeds[k];
    RefitResult r = stage("refit[train]", [&] { return refit(start, train_data, valid ? &*valid : nullptr, tc); });
    RunOutput out;
    out.report = score(r.net, test, r.training.wall_time);
    out.model = std::move(r.net);
    out.trace = {{"seed", seeds[k]}, {"training", train_json(r.training)}};
    out.series_name = std::string(to_string(tc.criterion));
    out.series = r.training.metric_history;
    runs.push_back(std::move(out));
  }
  return finish(cfg, effective, "refit-c2", "refit@c2", runs);
}

std::string cmd_grow_groups(const ExperimentConfig& cfg, const json& effective) {
  const int chunk = cfg.groups.chunk;
  const Dataset train_data = stage("grow-groups[load]", [&] { return load_part(cfg, chunk, "train"); });
  const auto valid = stage("grow-groups[load]", [&] { return maybe_part(cfg, chunk, "valid"); });
  const Dataset test = stage("grow-groups[load]", [&] { return load_part(cfg, chunk, "test"); });

  const RelevancyResult rel = stage("grow-groups[relevancy]", [&] { return relevancy_scores(train_data, cfg.groups.relevancy); });
  const GroupPlan plan =
      stage("grow-groups[groups]", [&] { return make_groups(rel.scores, cfg.groups.count, cfg.groups.order); });
  json groups = json::array();
  for (const auto& g : plan.groups) {
    json names = json::array();
    for (auto f : g.features) names.push_back(train_data.feature_names.at(f));
    groups.push_back({{"features", names}, {"mean_relevancy", g.mean_relevancy}});
  }

  std::vector<RunOutput> runs;
  const auto seeds = default_seeds(cfg.runs, cfg.seed);
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    GrowthConfig gc = cfg.growth_config();
    gc.train.seed = seeds[k];
    FeatureGroupResult r =
        stage("grow-groups[grow]", [&] { return ifl_feature_groups(train_data, valid ? &*valid : nullptr, plan, gc); });
    double wall = 0.0;
    json traces = json::array();
    RunOutput out;
    for (const auto& t : r.traces) {
      wall += t.wall_time;
      traces.push_back(growth_json(t));
      for (const auto& s : t.steps) out.series.push_back(s.metric_after);
    }
    out.report = score(r.net, test, wall);
    out.model = std::move(r.net);
    out.trace = {{"seed", seeds[k]}, {"groups", groups}, {"relevancy", rel.scores}, {"growth", traces}};
    out.series_name = std::string(to_string(gc.train.criterion));
    runs.push_back(std::move(out));
  }
  const std::string order(to_string(cfg.groups.order));
  return finish(cfg, effective, "groups-" + order, "groups-" + order, runs);
}

std::string cmd_grow_transfer(const ExperimentConfig& cfg, const json& effective, const std::string& initial) {
  const Dataset train2 = stage("grow-transfer[load]", [&] { return load_part(cfg, 2, "train"); });
  const Dataset valid2 = stage("grow-transfer[load]", [&] { return load_part(cfg, 2, "valid"); });
  const Dataset test2 = stage("grow-transfer[load]", [&] { return load_part(cfg, 2, "test"); });
  std::optional<Dataset> train1;
  if (initial.empty()) train1 = stage("grow-transfer[load]", [&] { return load_part(cfg, 1, "train"); });

  std::vector<RunOutput> runs;
  const auto seeds = default_seeds(cfg.runs, cfg.seed);
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    TransferConfig tc = cfg.transfer_config();
    tc.growth.train.seed = seeds[k];
    TransferResult r = stage("grow-transfer[grow]", [&] {
      if (train1) return ifl_transfer(*train1, train2, valid2, tc);
      return ifl_transfer_from(initial_for_run(initial, k), train2, valid2, tc);
    });
    RunOutput out;
    json traces = json::array();
    for (const auto& t : r.traces) {
      traces.push_back(growth_json(t));
      for (const auto& s : t.steps) out.series.push_back(s.metric_after);
    }
    const double wall = r.incremental_time + (train1 ? r.initial_training.wall_time : 0.0);
    out.report = score(r.net, test2, wall);
    out.trace = {{"seed", seeds[k]},
                 {"growth", traces},
                 {"incremental_time", r.incremental_time},
                 {"final_validation_accuracy", evaluate(r.net, valid2, EvalMetric::accuracy)},
                 {"t_subset_width", r.state.t_subset.cols()}};
    if (train1) {
      out.trace["initial_training"] = train_json(r.initial_training);
      out.extra_models.emplace_back("initial", r.state.initial_model);
    }
    out.series_name = std::string(to_string(tc.growth.train.criterion));
    out.model = std::move(r.net);
    runs.push_back(std::move(out));
  }
  return finish(cfg, effective, "final-c2", "final@c2", runs);
}

void cmd_evaluate(const ExperimentConfig& cfg, const std::string& model, const std::string& data,
                  const std::string& name, const std::string& out) {
  if (!fs::exists(model)) throw InputError("evaluate: model file " + model + " does not exist");
  const NetworkGraph net = stage("evaluate[load]", [&] { return load_model(model); });
  const Dataset ds = stage("evaluate[load]", [&] { return load_named_data(cfg, data); });
  const MetricsReport r = stage("evaluate[predict]", [&] { return score(net, ds, 0.0); });
  const std::string label = name.empty() ? fs::path(model).stem().stem().string() : name;
  std::cout << serialize_report(r, label) << '\n';
  if (!out.empty()) save_report(r, out, label);
}

void cmd_compare(const std::vector<std::string>& reports, const std::string& out) {
  std::vector<std::pair<std::string, MetricsReport>> models;
  for (const auto& path : reports) {
    std::string name;
    MetricsReport r = stage("compare[load]", [&] { return load_report(path, &name); });
    if (name.empty()) name = fs::path(path).stem().string();
    models.emplace_back(name, std::move(r));
  }
  const ComparisonTable table = stage("compare", [&] { return compare_report(models); });
  std::cout << table.to_text();
  if (!out.empty()) write_text(out, table.to_json());
}

void cmd_synth(const std::string& kind, std::size_t rows, std::size_t features, std::uint64_t seed,
               const std::string& out) {
  if (rows < 4) throw InputError("synth: --rows must be at least 4");
  Dataset ds;
  if (kind == "fraud") {
    ds = synthetic::fraud_table(rows, features, seed);
  } else if (kind == "drift" || kind == "xor") {
    Dataset c1;
    Dataset c2;
    if (kind == "drift") {
      synthetic::DriftSpec spec;
      spec.samples_per_chunk = rows / 2;
      spec.features = features;
      spec.seed = seed;
      auto c = synthetic::drift_chunks(spec);
      c1 = std::move(c.chunk1);
      c2 = std::move(c.chunk2);
    } else {
      c1 = synthetic::xor_blobs(rows / 2, 0.1, derive_seed(seed, 1));
      c2 = synthetic::xor_blobs(rows - rows / 2, 0.1, derive_seed(seed, 2));
    }
    // Chunk 1 fills the first day, chunk 2 the second.
    const std::size_t n = c1.rows() + c2.rows();
    const std::size_t d = c1.cols();
    Matrix x(n, d + 1);
    std::vector<int> y;
    for (std::size_t i = 0; i < n; ++i) {
      const bool first = i < c1.rows();
      const Dataset& src = first ? c1 : c2;
      const std::size_t r = first ? i : i - c1.rows();
      const double day = first ? 0.0 : 86400.0;
      x(i, 0) = day + std::floor(86400.0 * (static_cast<double>(r) + 0.5) / static_cast<double>(src.rows()));
      for (std::size_t j = 0; j < d; ++j) x(i, j + 1) = src.x(r, j);
      y.push_back(src.y[r]);
    }
    std::vector<std::string> names{"Time"};
    names.insert(names.end(), c1.feature_names.begin(), c1.feature_names.end());
    ds = make_dataset(std::move(x), std::move(y), std::move(names), kind);
  } else {
    throw InputError("synth: unknown kind '" + kind + "' (expected fraud, drift or xor)");
  }
  write_csv(ds, out, "Class");
  const auto c = ds.class_counts();
  std::cout << "wrote " << out << ": " << ds.rows() << " rows, " << c[1] << " positive\n";
}

}  // namespace cnet::cli
