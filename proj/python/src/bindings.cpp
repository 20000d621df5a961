#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cnet/datapipe.hpp"
#include "cnet/error.hpp"
#include "cnet/evalkit.hpp"
#include "cnet/growth.hpp"
#include "cnet/netgraph.hpp"
#include "cnet/synthetic.hpp"
#include "cnet/traincore.hpp"

namespace py = pybind11;
using namespace cnet;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw DimensionError("expected a 2-D array");
  const auto r = static_cast<std::size_t>(a.shape(0));
  const auto c = static_cast<std::size_t>(a.shape(1));
  return Matrix(r, c, std::vector<double>(a.data(), a.data() + r * c));
}

Array to_array(const Matrix& m) {
  Array a({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), a.mutable_data());
  return a;
}

Array to_array(const Vector& v) {
  Array a(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

const Dataset* opt(const std::optional<Dataset>& d) { return d ? &*d : nullptr; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Constructive networks with incremental feature learning";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  auto input = py::register_exception<InputError>(m, "InputError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", input.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<ContractError>(m, "ContractError", base.ptr());

  py::enum_<Activation>(m, "Activation")
      .value("relu", Activation::relu)
      .value("sigmoid", Activation::sigmoid)
      .value("tanh", Activation::tanh)
      .value("identity", Activation::identity);
  py::enum_<Loss>(m, "Loss")
      .value("binary_cross_entropy", Loss::binary_cross_entropy)
      .value("mean_squared_error", Loss::mean_squared_error);
  py::enum_<Criterion>(m, "Criterion")
      .value("train_loss", Criterion::train_loss)
      .value("validation_accuracy", Criterion::validation_accuracy);
  py::enum_<Optimizer>(m, "Optimizer").value("sgd", Optimizer::sgd).value("adam", Optimizer::adam);
  py::enum_<GroupOrder>(m, "GroupOrder")
      .value("descending", GroupOrder::descending)
      .value("ascending", GroupOrder::ascending)
      .value("none", GroupOrder::none);
  py::enum_<RelevancyMethod>(m, "RelevancyMethod")
      .value("pearson", RelevancyMethod::pearson)
      .value("mutual_information", RelevancyMethod::mutual_information);

  py::class_<InitPolicy>(m, "InitPolicy")
      .def_static("gaussian", &InitPolicy::gaussian, py::arg("stddev") = 0.01)
      .def_static("xavier", &InitPolicy::xavier)
      .def_static("zeros", &InitPolicy::zeros)
      .def_static("parse", &parse_init_policy)
      .def("__repr__", [](const InitPolicy& p) { return "InitPolicy(" + to_string(p) + ")"; })
      .def(py::self == py::self);

  // --- data ----------------------------------------------------------------

  py::class_<Dataset>(m, "Dataset")
      .def(py::init([](const Array& x, std::vector<int> y, std::vector<std::string> names) {
             return make_dataset(to_matrix(x), std::move(y), std::move(names));
           }),
           py::arg("x"), py::arg("y"), py::arg("feature_names") = std::vector<std::string>{})
      .def_property_readonly("x", [](const Dataset& d) { return to_array(d.x); })
      .def_readonly("y", &Dataset::y)
      .def_readonly("feature_names", &Dataset::feature_names)
      .def_readwrite("provenance", &Dataset::provenance)
      .def_property_readonly("rows", &Dataset::rows)
      .def_property_readonly("cols", &Dataset::cols)
      .def("class_counts", &Dataset::class_counts)
      .def("select_rows", [](const Dataset& d, std::vector<std::size_t> r) { return d.select_rows(r); })
      .def("select_features", [](const Dataset& d, std::vector<std::size_t> f) { return d.select_features(f); })
      .def("drop_features", [](const Dataset& d, std::vector<std::string> n) { return d.drop_features(n); })
      .def("__len__", &Dataset::rows)
      .def(py::self == py::self);

  m.def("load_csv",
        [](const std::filesystem::path& p, const std::string& label, std::vector<std::string> drop) {
          return load_csv(p, label, drop);
        },
        py::arg("path"), py::arg("label_column") = "Class", py::arg("drop_columns") = std::vector<std::string>{});
  m.def("write_csv", &write_csv, py::arg("dataset"), py::arg("path"), py::arg("label_column") = "Class");
  m.def("save_dataset", &save_dataset);
  m.def("load_dataset", &load_dataset);
  m.def("dedup", [](const Dataset& d) {
    auto r = dedup(d);
    return py::make_tuple(std::move(r.data), r.removed);
  });

  py::class_<RangeRecord>(m, "RangeRecord")
      .def_readonly("lo", &RangeRecord::lo)
      .def_readonly("hi", &RangeRecord::hi)
      .def_readonly("min", &RangeRecord::min)
      .def_readonly("max", &RangeRecord::max)
      .def_readonly("constant_features", &RangeRecord::constant_features)
      .def("apply", &RangeRecord::apply)
      .def("invert", &RangeRecord::invert);
  m.def("normalize_range",
        [](const Dataset& d, double lo, double hi) {
          auto r = normalize_range(d, lo, hi);
          return py::make_tuple(std::move(r.data), std::move(r.record), std::move(r.warnings));
        },
        py::arg("dataset"), py::arg("lo") = -5.0, py::arg("hi") = 5.0);

  m.def("stratified_split",
        [](const Dataset& d, std::vector<std::pair<std::string, double>> fractions, bool stratified,
           std::uint64_t seed) { return stratified_split(d, SplitSpec{std::move(fractions), stratified, seed}); },
        py::arg("dataset"), py::arg("fractions"), py::arg("stratified") = true, py::arg("seed") = 0);
  m.def("chunk_by_time",
        [](const Dataset& d, std::vector<double> times, double boundary) { return chunk_by_time(d, times, boundary); });
  m.def("smote",
        [](const Dataset& d, double ratio, std::size_t k, std::uint64_t seed) {
          auto r = smote(d, ratio, k, seed);
          return py::make_tuple(std::move(r.data), r.synthetic);
        },
        py::arg("dataset"), py::arg("target_ratio"), py::arg("k_neighbors") = 5, py::arg("seed") = 0);

  py::class_<FeatureGroup>(m, "FeatureGroup")
      .def_readonly("features", &FeatureGroup::features)
      .def_readonly("mean_relevancy", &FeatureGroup::mean_relevancy);
  py::class_<GroupPlan>(m, "GroupPlan")
      .def(py::init([](std::vector<std::vector<std::size_t>> groups) {
        GroupPlan p;
        p.order = GroupOrder::none;
        for (auto& g : groups) p.groups.push_back({std::move(g), 0.0});
        return p;
      }))
      .def_readonly("groups", &GroupPlan::groups)
      .def_readonly("order", &GroupPlan::order);
  m.def("relevancy_scores",
        [](const Dataset& d, RelevancyMethod method) { return relevancy_scores(d, method).scores; },
        py::arg("dataset"), py::arg("method") = RelevancyMethod::pearson);
  m.def("make_groups",
        [](std::vector<double> scores, std::size_t k, GroupOrder order) { return make_groups(scores, k, order); },
        py::arg("scores"), py::arg("k"), py::arg("order") = GroupOrder::descending);

  // --- networks ------------------------------------------------------------

  py::class_<NetworkGraph>(m, "NetworkGraph")
      .def_property_readonly("input_width", &NetworkGraph::input_width)
      .def_property_readonly("has_output", &NetworkGraph::has_output)
      .def_property_readonly("block_count", [](const NetworkGraph& n) { return n.blocks().size(); })
      .def_property_readonly("block_units",
                             [](const NetworkGraph& n) {
                               std::vector<std::size_t> u;
                               for (const auto& b : n.blocks()) u.push_back(b.n_units());
                               return u;
                             })
      .def_property_readonly("trainable_flags", &NetworkGraph::trainable_flags)
      .def("parameters", [](const NetworkGraph& n) { return to_array(n.parameters()); })
      .def("set_parameters", [](NetworkGraph& n, std::vector<double> v) { n.set_parameters(v); })
      .def_property_readonly("parameter_count", &NetworkGraph::parameter_count)
      .def("to_json", &serialize_model)
      .def_static("from_json", &deserialize_model)
      .def("save", [](const NetworkGraph& n, const std::filesystem::path& p) { save_model(n, p); })
      .def_static("load", &load_model)
      .def(py::self == py::self);

  m.def("new_network",
        [](std::size_t width, std::vector<std::size_t> layers, Activation hidden, Activation output,
           const InitPolicy& init, std::uint64_t seed) {
          return new_network(width, layers, hidden, output, init, seed);
        },
        py::arg("input_width"), py::arg("layer_widths"), py::arg("hidden") = Activation::relu,
        py::arg("output") = Activation::sigmoid, py::arg("init") = InitPolicy::gaussian(), py::arg("seed") = 0);

  m.def("predict", [](const NetworkGraph& n, const Dataset& d) { return to_array(predict(n, d)); });
  m.def("transform", [](const NetworkGraph& n, const Dataset& d) { return to_array(transform(n, d)); });

  // --- training and growth -------------------------------------------------

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("max_epochs", &TrainConfig::max_epochs)
      .def_readwrite("patience", &TrainConfig::patience)
      .def_readwrite("threshold", &TrainConfig::threshold)
      .def_readwrite("criterion", &TrainConfig::criterion)
      .def_readwrite("loss", &TrainConfig::loss)
      .def_readwrite("optimizer", &TrainConfig::optimizer)
      .def_readwrite("momentum", &TrainConfig::momentum)
      .def_readwrite("seed", &TrainConfig::seed);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("epochs_run", &TrainResult::epochs_run)
      .def_readonly("initial_metric", &TrainResult::initial_metric)
      .def_readonly("final_metric", &TrainResult::final_metric)
      .def_readonly("metric_history", &TrainResult::metric_history)
      .def_readonly("wall_time", &TrainResult::wall_time);

  m.def("train",
        [](NetworkGraph& n, const Dataset& train_data, const std::optional<Dataset>& valid, const TrainConfig& cfg) {
          return train(n, train_data, opt(valid), cfg);
        },
        py::arg("net"), py::arg("train_data"), py::arg("valid") = std::nullopt, py::arg("config") = TrainConfig{});
  m.def("evaluate_accuracy", [](const NetworkGraph& n, const Dataset& d) { return evaluate(n, d, EvalMetric::accuracy); });
  m.def("evaluate_loss", [](const NetworkGraph& n, const Dataset& d) { return evaluate(n, d, EvalMetric::loss); });

  py::class_<GrowthConfig>(m, "GrowthConfig")
      .def(py::init<>())
      .def_readwrite("train", &GrowthConfig::train)
      .def_readwrite("initial_units", &GrowthConfig::initial_units)
      .def_readwrite("max_units", &GrowthConfig::max_units)
      .def_readwrite("hidden_init", &GrowthConfig::hidden_init)
      .def_readwrite("output_init", &GrowthConfig::output_init)
      .def_readwrite("hidden_activation", &GrowthConfig::hidden_activation)
      .def_readwrite("output_activation", &GrowthConfig::output_activation);

  py::class_<GrowthStep>(m, "GrowthStep")
      .def_readonly("units_total", &GrowthStep::units_total)
      .def_readonly("metric_before", &GrowthStep::metric_before)
      .def_readonly("metric_after", &GrowthStep::metric_after)
      .def_readonly("accepted", &GrowthStep::accepted)
      .def_readonly("epochs", &GrowthStep::epochs);
  py::class_<GrowthTrace>(m, "GrowthTrace")
      .def_readonly("steps", &GrowthTrace::steps)
      .def_readonly("final_units", &GrowthTrace::final_units)
      .def_readonly("final_metric", &GrowthTrace::final_metric)
      .def_property_readonly("stop_reason", [](const GrowthTrace& t) { return std::string(to_string(t.stop_reason)); })
      .def_readonly("wall_time", &GrowthTrace::wall_time);

  m.def("grow",
        [](NetworkGraph& n, const Dataset& train_data, const std::optional<Dataset>& valid, const GrowthConfig& cfg) {
          return grow_until_no_convergence(n, train_data, opt(valid), cfg);
        },
        py::arg("net"), py::arg("train_data"), py::arg("valid") = std::nullopt, py::arg("config") = GrowthConfig{});
  m.def("ifl_feature_groups",
        [](const Dataset& train_data, const std::optional<Dataset>& valid, const GroupPlan& plan,
           const GrowthConfig& cfg) {
          auto r = ifl_feature_groups(train_data, opt(valid), plan, cfg);
          return py::make_tuple(std::move(r.net), std::move(r.traces));
        },
        py::arg("train_data"), py::arg("valid"), py::arg("plan"), py::arg("config") = GrowthConfig{});

  py::class_<TransferConfig>(m, "TransferConfig")
      .def(py::init<>())
      .def_readwrite("growth", &TransferConfig::growth)
      .def_readwrite("initial_widths", &TransferConfig::initial_widths)
      .def_readwrite("initial_criterion", &TransferConfig::initial_criterion);
  py::class_<TransferResult>(m, "TransferResult")
      .def_readonly("net", &TransferResult::net)
      .def_readonly("traces", &TransferResult::traces)
      .def_property_readonly("initial_model", [](const TransferResult& r) { return r.state.initial_model; })
      .def_property_readonly("headless_model", [](const TransferResult& r) { return r.state.headless_model; })
      .def_property_readonly("t_subset", [](const TransferResult& r) { return r.state.t_subset; })
      .def_readonly("incremental_time", &TransferResult::incremental_time);

  m.def("build_initial_model", &build_initial_model, py::arg("input_width"), py::arg("config") = TransferConfig{});
  m.def("ifl_transfer", &ifl_transfer, py::arg("train_chunk1"), py::arg("train_chunk2"), py::arg("valid_chunk2"),
        py::arg("config") = TransferConfig{});
  m.def("ifl_transfer_from", &ifl_transfer_from, py::arg("initial_model"), py::arg("train_chunk2"),
        py::arg("valid_chunk2"), py::arg("config") = TransferConfig{});
  m.def("refit",
        [](const NetworkGraph& initial, const Dataset& train_data, const std::optional<Dataset>& valid,
           const TrainConfig& cfg) { return refit(initial, train_data, opt(valid), cfg).net; },
        py::arg("initial_model"), py::arg("train_chunk2"), py::arg("valid") = std::nullopt,
        py::arg("config") = TrainConfig{});

  // --- evaluation ----------------------------------------------------------

  py::class_<MetricsReport>(m, "MetricsReport")
      .def_readonly("precision", &MetricsReport::precision)
      .def_readonly("recall", &MetricsReport::recall)
      .def_readonly("f1", &MetricsReport::f1)
      .def_readonly("fnr", &MetricsReport::fnr)
      .def_readonly("accuracy", &MetricsReport::accuracy)
      .def_readonly("wall_time", &MetricsReport::wall_time)
      .def_readonly("runs", &MetricsReport::runs)
      .def_readonly("degenerate", &MetricsReport::degenerate)
      .def_property_readonly("counts",
                             [](const MetricsReport& r) {
                               return py::dict(py::arg("tp") = r.counts.tp, py::arg("fp") = r.counts.fp,
                                               py::arg("tn") = r.counts.tn, py::arg("fn") = r.counts.fn);
                             })
      .def("to_json", [](const MetricsReport& r, const std::string& name) { return serialize_report(r, name); },
           py::arg("name") = "")
      .def_static("from_json", [](const std::string& s) { return deserialize_report(s); });

  m.def("score",
        [](const NetworkGraph& n, const Dataset& d, double threshold) {
          return metrics(confusion(predict(n, d), d.y, threshold));
        },
        py::arg("net"), py::arg("data"), py::arg("threshold") = 0.5);
  m.def("multi_run", [](const std::function<MetricsReport(std::uint64_t)>& fn, std::vector<std::uint64_t> seeds) {
    return multi_run(fn, seeds);
  });
  m.def("default_seeds", &default_seeds, py::arg("n_runs"), py::arg("base") = 0);
  m.def("compare_text", [](const std::vector<std::pair<std::string, MetricsReport>>& models) {
    return compare_report(models).to_text();
  });
  m.def("compare_json", [](const std::vector<std::pair<std::string, MetricsReport>>& models) {
    return compare_report(models).to_json();
  });

  // --- synthetic data ------------------------------------------------------

  auto syn = m.def_submodule("synthetic", "seeded synthetic datasets");
  syn.def("xor_blobs", &synthetic::xor_blobs, py::arg("n"), py::arg("noise") = 0.1, py::arg("seed") = 0);
  syn.def("linear_blobs", &synthetic::linear_blobs, py::arg("n"), py::arg("noise") = 0.1, py::arg("seed") = 0);
  syn.def("fraud_table", &synthetic::fraud_table, py::arg("n"), py::arg("features") = 28, py::arg("seed") = 0);
  syn.def(
      "drift_chunks",
      [](std::size_t n, std::size_t features, double rotation, double positive_rate, double noise, std::uint64_t seed) {
        synthetic::DriftSpec s{n, features, rotation, positive_rate, noise, seed};
        auto c = synthetic::drift_chunks(s);
        return py::make_tuple(std::move(c.chunk1), std::move(c.chunk2));
      },
      py::arg("samples_per_chunk") = 10000, py::arg("features") = 8, py::arg("rotation_degrees") = 30.0,
      py::arg("positive_rate") = 0.3, py::arg("label_noise") = 0.02, py::arg("seed") = 0);
}
