// Acceptance harness: one line per criterion, PASS / FAIL / SKIP.
//
//   cnet_acceptance [--only N[,N...]]
//
// CNET_KAGGLE_CSV points at the credit-card CSV for the dataset-gated check.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cnet/datapipe.hpp"
#include "cnet/error.hpp"
#include "cnet/evalkit.hpp"
#include "cnet/growth.hpp"
#include "cnet/synthetic.hpp"
#include "support.hpp"

using namespace cnet;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
  Status status = Status::fail;
  std::string detail;
};

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome verdict(bool ok, std::string detail) {
  return {ok ? Status::pass : Status::fail, std::move(detail)};
}

// --- 1 ---------------------------------------------------------------------

// True when no relu pre-activation lies within `margin` of the kink and the
// prediction stays clear of the cross-entropy clamp.
bool well_conditioned(const NetworkGraph& net, const Dataset& batch, double margin) {
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    const ForwardTrace t = net.trace(batch.row(r));
    for (std::size_t b = 0; b < t.blocks.size(); ++b) {
      if (net.blocks()[b].activation != Activation::relu) continue;
      for (double z : t.blocks[b].pre) {
        if (std::abs(z) < margin) return false;
      }
    }
    if (t.prediction < 1e-4 || t.prediction > 1 - 1e-4) return false;
  }
  return true;
}

Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  std::normal_distribution<double> g(0.0, 1.0);
  std::size_t nets = 0, coords = 0, bad = 0, rejected = 0;
  double worst = 0.0;
  for (int trial = 0; nets < 60 && trial < 1000; ++trial) {
    const Loss loss = nets % 2 == 0 ? Loss::binary_cross_entropy : Loss::mean_squared_error;
    testing::RandomNetOptions opt;
    opt.output_activation = (loss == Loss::mean_squared_error && nets % 4 == 1)
                                ? Activation::identity
                                : Activation::sigmoid;
    const NetworkGraph net = testing::random_network(rng, opt);
    Matrix x(6, net.input_width());
    for (double& v : x.data()) v = g(rng);
    std::vector<int> y(6);
    for (std::size_t i = 0; i < 6; ++i) y[i] = static_cast<int>(i % 2);
    const Dataset batch = make_dataset(std::move(x), std::move(y));
    if (!well_conditioned(net, batch, 1e-3)) {
      ++rejected;
      continue;
    }
    ++nets;
    const Vector an = parameter_gradient(net, batch, loss);
    NetworkGraph probe = net;
    const Vector fd = finite_difference_gradient(
        [&](std::span<const double> th) {
          probe.set_parameters(th);
          return dataset_loss(probe, batch, loss);
        },
        net.parameters());
    for (std::size_t i = 0; i < an.size(); ++i) {
      if (std::abs(an[i]) <= 1e-6) continue;
      ++coords;
      const double e = testing::relative_error(an[i], fd[i]);
      worst = std::max(worst, e);
      if (e >= 1e-4) ++bad;
    }
  }
  const double secs = since(t0);
  return verdict(nets >= 50 && bad == 0 && secs < 30.0,
                 fmt("%zu nets (%zu batches rejected near relu kinks), %zu coordinates, worst rel. err %.2e, %.1fs",
                     nets, rejected, coords, worst, secs));
}

// --- 2 ---------------------------------------------------------------------

Outcome zero_extension() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(202);
  std::normal_distribution<double> g(0.0, 3.0);
  const Activation acts[] = {Activation::relu, Activation::sigmoid, Activation::tanh,
                             Activation::identity};
  std::size_t mismatches = 0, pairs = 0;
  for (; pairs < 100; ++pairs) {
    NetworkGraph net = testing::random_network(rng);
    std::vector<Vector> xs(100, Vector(net.input_width()));
    std::vector<double> before;
    for (Vector& x : xs) {
      for (double& v : x) v = g(rng);
      before.push_back(net.predict(x));
    }
    std::vector<Source> sources;
    sources.push_back(InputSource::all(net.input_width()));
    for (const UnitBlock& b : net.blocks()) {
      if (rng() % 2) sources.push_back(BlockSource{b.id});
    }
    const std::size_t units = 1 + rng() % 4;
    net.add_unit_block(units, sources, acts[rng() % 4], InitPolicy::gaussian(1.0),
                       InitPolicy::zeros(), rng);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (net.predict(xs[i]) != before[i]) ++mismatches;
    }
  }
  const double secs = since(t0);
  return verdict(mismatches == 0 && secs < 10.0,
                 fmt("%zu pairs x 100 inputs, %zu inexact predictions, %.2fs", pairs, mismatches, secs));
}

// --- 3 ---------------------------------------------------------------------

struct FreezeAudit {
  std::size_t steps = 0;
  std::size_t frozen_checked = 0;
  std::size_t violations = 0;

  void operator()(const NetworkGraph& before, const NetworkGraph& after) {
    ++steps;
    if (before.blocks().size() != after.blocks().size()) {
      ++violations;
      return;
    }
    const Vector pb = before.parameters();
    const Vector pa = after.parameters();
    const auto mask = before.trainable_mask();
    for (std::size_t i = 0; i < pb.size(); ++i) {
      if (mask[i]) continue;
      ++frozen_checked;
      if (std::bit_cast<std::uint64_t>(pb[i]) != std::bit_cast<std::uint64_t>(pa[i])) ++violations;
    }
  }
};

struct DriftSplit {
  Dataset c1_train, c1_test, c2_train, c2_valid, c2_test;
};

DriftSplit prepare_drift(const synthetic::DriftSpec& spec) {
  const auto chunks = synthetic::drift_chunks(spec);
  auto p1 = stratified_split(chunks.chunk1, SplitSpec{{{"train", 0.7}, {"test", 0.3}}, true, spec.seed});
  auto p2 = stratified_split(
      chunks.chunk2, SplitSpec{{{"train", 0.7}, {"valid", 0.15}, {"test", 0.15}}, true, spec.seed});
  const NormalizeResult norm = normalize_range(p1.at("train"));
  const RangeRecord& rec = norm.record;
  return {norm.data, rec.apply(p1.at("test")), rec.apply(p2.at("train")),
          rec.apply(p2.at("valid")), rec.apply(p2.at("test"))};
}

Outcome freeze_immutability() {
  const auto t0 = std::chrono::steady_clock::now();
  synthetic::DriftSpec spec;
  spec.samples_per_chunk = 3000;
  spec.seed = 303;
  const DriftSplit d = prepare_drift(spec);

  FreezeAudit audit;
  GrowthConfig gc;
  gc.train.seed = 303;
  gc.on_step = std::ref(audit);

  const GroupPlan plan = make_groups(relevancy_scores(d.c2_train).scores, 3, GroupOrder::descending);
  const FeatureGroupResult groups = ifl_feature_groups(d.c2_train, &d.c2_valid, plan, gc);

  TransferConfig tc;
  tc.growth = gc;
  tc.initial_widths = {32, 8};
  const TransferResult tr = ifl_transfer(d.c1_train, d.c2_train, d.c2_valid, tc);

  std::size_t expected_steps = 0;
  for (const auto& t : groups.traces) expected_steps += t.steps.size();
  for (const auto& t : tr.traces) expected_steps += t.steps.size();
  const double secs = since(t0);
  return verdict(audit.violations == 0 && audit.steps == expected_steps && audit.steps > 0 && secs < 120.0,
                 fmt("%zu growth steps, %zu frozen values compared, %zu changed, %.1fs", audit.steps,
                     audit.frozen_checked, audit.violations, secs));
}

// --- 4 ---------------------------------------------------------------------

Outcome xor_growth() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t seed = 404;
  const Dataset raw = synthetic::xor_blobs(2000, 0.1, seed);
  const NormalizeResult norm = normalize_range(raw);
  auto parts = stratified_split(norm.data, SplitSpec{{{"train", 0.8}, {"valid", 0.2}}, true, seed});

  GrowthConfig cfg;
  cfg.train.seed = seed;
  NetworkSpec spec;
  spec.input_width = 2;
  spec.layer_widths = {cfg.initial_units};
  spec.init = cfg.hidden_init;
  spec.seed = seed;
  NetworkGraph net = new_network(spec);
  const GrowthTrace trace = grow_until_no_convergence(net, parts.at("train"), &parts.at("valid"), cfg);
  const double acc = evaluate(net, parts.at("valid"), EvalMetric::accuracy);

  // Grid oracle: every grid point within three noise widths of a blob centre
  // must be classified as its quadrant's XOR label.
  std::size_t grid = 0, agree = 0;
  for (int i = 0; i <= 120; ++i) {
    for (int j = 0; j <= 120; ++j) {
      const double x0 = -1.5 + 3.0 * i / 120.0;
      const double x1 = -1.5 + 3.0 * j / 120.0;
      const double cx = x0 > 0 ? 1.0 : -1.0;
      const double cy = x1 > 0 ? 1.0 : -1.0;
      if (std::hypot(x0 - cx, x1 - cy) > 0.3) continue;
      const Vector z{norm.record.apply_value(0, x0), norm.record.apply_value(1, x1)};
      const int want = (cx > 0) != (cy > 0) ? 1 : 0;
      ++grid;
      agree += (net.predict(z) >= 0.5 ? 1 : 0) == want;
    }
  }
  const double grid_acc = static_cast<double>(agree) / static_cast<double>(grid);
  const double secs = since(t0);
  return verdict(trace.stop_reason == GrowthStop::threshold && trace.final_units >= 2 && acc > 0.95 &&
                     grid_acc > 0.95 && secs < 60.0,
                 fmt("stop=%s, units=%zu, validation accuracy %.4f, grid agreement %.4f over %zu points, %.1fs",
                     std::string(to_string(trace.stop_reason)).c_str(), trace.final_units, acc, grid_acc,
                     grid, secs));
}

// --- 5 and 6 ---------------------------------------------------------------

struct DriftRun {
  MetricsReport initial_c2, refit_c2, final_c2;
  double incremental_time = 0.0;
  double refit_time = 0.0;
};

struct DriftSummary {
  MetricsReport initial_c2, refit_c2, final_c2;
  double incremental_time = 0.0;
  double refit_time = 0.0;
  double elapsed = 0.0;
  std::size_t runs = 0;
};

MetricsReport test_metrics(const NetworkGraph& net, const Dataset& test) {
  return metrics(confusion(predict(net, test), test.y));
}

const DriftSummary& drift_experiment() {
  static const DriftSummary summary = [] {
    const auto t0 = std::chrono::steady_clock::now();
    DriftSummary s;
    std::vector<DriftRun> runs;
    for (std::uint64_t run = 0; run < 10; ++run) {
      synthetic::DriftSpec spec;
      spec.seed = 500 + run;
      const DriftSplit d = prepare_drift(spec);
      TransferConfig tc;
      tc.initial_widths = {128, 10};
      tc.growth.train.seed = derive_seed(500, run);

      NetworkGraph initial = build_initial_model(d.c1_train.cols(), tc);
      train(initial, d.c1_train, nullptr, tc.initial_train_config());

      TransferConfig fresh_cfg = tc;
      fresh_cfg.growth.train.seed = derive_seed(tc.growth.train.seed, 2);
      NetworkGraph fresh = build_initial_model(d.c2_train.cols(), fresh_cfg);
      train(fresh, d.c2_train, nullptr, fresh_cfg.initial_train_config());

      const RefitResult rf = refit(initial, d.c2_train, nullptr, tc.initial_train_config());
      const TransferResult fin = ifl_transfer_from(initial, d.c2_train, d.c2_valid, tc);

      DriftRun r;
      r.initial_c2 = test_metrics(fresh, d.c2_test);
      r.refit_c2 = test_metrics(rf.net, d.c2_test);
      r.final_c2 = test_metrics(fin.net, d.c2_test);
      r.incremental_time = fin.incremental_time;
      r.refit_time = rf.training.wall_time;
      runs.push_back(r);
    }
    auto mean = [&](auto pick) {
      std::vector<std::uint64_t> seeds(runs.size());
      std::iota(seeds.begin(), seeds.end(), std::uint64_t{0});
      return multi_run([&](std::uint64_t i) { return pick(runs[i]); }, seeds);
    };
    s.initial_c2 = mean([](const DriftRun& r) { return r.initial_c2; });
    s.refit_c2 = mean([](const DriftRun& r) { return r.refit_c2; });
    s.final_c2 = mean([](const DriftRun& r) { return r.final_c2; });
    for (const DriftRun& r : runs) {
      s.incremental_time += r.incremental_time / static_cast<double>(runs.size());
      s.refit_time += r.refit_time / static_cast<double>(runs.size());
    }
    s.runs = runs.size();
    s.elapsed = since(t0);
    return s;
  }();
  return summary;
}

Outcome drift_ordering() {
  const DriftSummary& s = drift_experiment();
  const bool f1_ok = s.final_c2.f1 >= s.initial_c2.f1 + 0.02 && s.final_c2.f1 >= s.refit_c2.f1 + 0.02;
  const bool fnr_ok = s.final_c2.fnr < s.initial_c2.fnr && s.final_c2.fnr < s.refit_c2.fnr;
  return verdict(f1_ok && fnr_ok && s.elapsed < 600.0,
                 fmt("mean over %zu runs: F1 final %.4f / initial@c2 %.4f / refit %.4f; "
                     "FNR final %.4f / initial@c2 %.4f / refit %.4f; %.0fs",
                     s.runs, s.final_c2.f1, s.initial_c2.f1, s.refit_c2.f1, s.final_c2.fnr,
                     s.initial_c2.fnr, s.refit_c2.fnr, s.elapsed));
}

Outcome training_time() {
  const DriftSummary& s = drift_experiment();
  return verdict(s.incremental_time < s.refit_time,
                 fmt("mean grow-transfer incremental time %.2fs vs refit %.2fs", s.incremental_time,
                     s.refit_time));
}

// --- 7 ---------------------------------------------------------------------

Outcome kaggle_counts() {
  const char* path = std::getenv("CNET_KAGGLE_CSV");
  if (path == nullptr || !std::filesystem::exists(path)) {
    return {Status::skip, "CNET_KAGGLE_CSV not set or file absent"};
  }
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset all = load_csv(path, "Class");
  const DedupResult dd = dedup(all);
  const auto counts = dd.data.class_counts();
  const std::vector<std::string> drop{"Time"};
  const Dataset features = normalize_range(dd.data.drop_features(drop)).data;
  const SmoteResult sm = smote(features, 0.33, 5, 0);
  const std::size_t minority = sm.data.class_counts()[1];
  const long diff = static_cast<long>(minority) - 93473;
  return verdict(counts[1] == 473 && std::labs(diff) <= 2,
                 fmt("%zu rows, fraud after dedup %zu (removed %zu rows), SMOTE minority %zu, %.1fs",
                     all.rows(), counts[1], dd.removed, minority, since(t0)));
}

// --- 8 ---------------------------------------------------------------------

Outcome determinism() {
  const auto t0 = std::chrono::steady_clock::now();
  auto run = [] {
    synthetic::DriftSpec spec;
    spec.samples_per_chunk = 2000;
    spec.seed = 808;
    const DriftSplit d = prepare_drift(spec);
    std::vector<std::string> out;

    GrowthConfig gc;
    gc.train.seed = 808;
    const GroupPlan plan = make_groups(relevancy_scores(d.c2_train).scores, 2, GroupOrder::ascending);
    const FeatureGroupResult g = ifl_feature_groups(d.c2_train, &d.c2_valid, plan, gc);
    out.push_back(serialize_model(g.net));

    TransferConfig tc;
    tc.growth = gc;
    tc.initial_widths = {16, 4};
    const TransferResult t = ifl_transfer(d.c1_train, d.c2_train, d.c2_valid, tc);
    out.push_back(serialize_model(t.net));
    out.push_back(serialize_model(t.state.initial_model));
    const RefitResult rf = refit(t.state.initial_model, d.c2_train, nullptr, tc.initial_train_config());
    out.push_back(serialize_model(rf.net));
    for (const NetworkGraph* n : {&g.net, &t.net, &rf.net}) {
      MetricsReport r = test_metrics(*n, d.c2_test);
      r.wall_time = 0.0;
      out.push_back(serialize_report(r, "run"));
    }
    return out;
  };
  const auto a = run();
  const auto b = run();
  std::size_t differing = 0;
  for (std::size_t i = 0; i < a.size(); ++i) differing += a[i] != b[i];
  const double secs = since(t0);
  return verdict(differing == 0 && secs < 300.0,
                 fmt("%zu artifacts compared byte-for-byte, %zu differ, %.1fs", a.size(), differing, secs));
}

// --- 9 ---------------------------------------------------------------------

Outcome reduction() {
  const auto t0 = std::chrono::steady_clock::now();
  synthetic::DriftSpec spec;
  spec.samples_per_chunk = 3000;
  spec.seed = 909;
  const DriftSplit d = prepare_drift(spec);
  GrowthConfig cfg;
  cfg.train.seed = 909;

  GroupPlan plan;
  plan.groups.push_back({InputSource::all(d.c2_train.cols()).features, 0.0});
  const FeatureGroupResult a = ifl_feature_groups(d.c2_train, &d.c2_valid, plan, cfg);

  NetworkSpec ns;
  ns.input_width = d.c2_train.cols();
  ns.layer_widths = {cfg.initial_units};
  ns.init = cfg.hidden_init;
  ns.seed = cfg.train.seed;
  NetworkGraph b = new_network(ns);
  grow_until_no_convergence(b, d.c2_train, &d.c2_valid, cfg);

  const Vector pa = a.net.parameters();
  const Vector pb = b.parameters();
  const bool same = pa.size() == pb.size() &&
                    std::equal(pa.begin(), pa.end(), pb.begin(), [](double x, double y) {
                      return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
                    });
  const double secs = since(t0);
  return verdict(same && secs < 60.0,
                 fmt("%zu vs %zu parameters, %s, %.1fs", pa.size(), pb.size(),
                     same ? "bit-identical" : "different", secs));
}

struct Check {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--only") {
      std::stringstream ss(argv[i + 1]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
    }
  }
  const std::vector<Check> criteria{
      {1, "gradient correctness", gradient_check},
      {2, "zero-extension invariance", zero_extension},
      {3, "freeze immutability", freeze_immutability},
      {4, "growth semantics on XOR", xor_growth},
      {5, "drift ordering (F1, FNR)", drift_ordering},
      {6, "training-time ordering", training_time},
      {7, "pipeline counts (dataset-gated)", kaggle_counts},
      {8, "determinism", determinism},
      {9, "reduction equivalence", reduction},
  };
  int failures = 0;
  for (const Check& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Status::fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::skip ? "SKIP" : "FAIL";
    std::printf("[%s] %d %s: %s\n", tag, c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
    failures += o.status == Status::fail;
  }
  return failures == 0 ? 0 : 1;
}
