#include "cnet/evalkit.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "cnet/error.hpp"
#include "cnet/random.hpp"

namespace cnet {

using json = nlohmann::json;

Confusion confusion(std::span<const double> predictions, std::span<const int> labels,
                    double threshold) {
  if (predictions.size() != labels.size()) {
    throw DimensionError("confusion: " + std::to_string(predictions.size()) + " predictions for " +
                         std::to_string(labels.size()) + " labels");
  }
  Confusion c;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool positive = predictions[i] >= threshold;
    if (labels[i] != 0 && labels[i] != 1) throw DataError("confusion: labels must be 0 or 1");
    if (labels[i] == 1) {
      ++(positive ? c.tp : c.fn);
    } else {
      ++(positive ? c.fp : c.tn);
    }
  }
  return c;
}

MetricsReport metrics(const Confusion& c, double wall_time) {
  MetricsReport r;
  r.counts = c;
  r.wall_time = wall_time;
  auto ratio = [&r](std::size_t num, std::size_t den, const char* name) {
    if (den == 0) {
      r.degenerate.emplace_back(name);
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  r.precision = ratio(c.tp, c.tp + c.fp, "precision");
  r.recall = ratio(c.tp, c.tp + c.fn, "recall");
  r.fnr = ratio(c.fn, c.tp + c.fn, "fnr");
  r.accuracy = ratio(c.tp + c.tn, c.total(), "accuracy");
  if (r.precision + r.recall > 0.0) {
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  } else {
    r.degenerate.emplace_back("f1");
    r.f1 = 0.0;
  }
  return r;
}

std::vector<std::uint64_t> default_seeds(std::size_t n_runs, std::uint64_t base) {
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < n_runs; ++i) seeds.push_back(derive_seed(base, i));
  return seeds;
}

MetricsReport multi_run(const std::function<MetricsReport(std::uint64_t seed)>& evaluate,
                        std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw InputError("multi_run needs at least one run");
  MetricsReport avg;
  avg.runs = 0;
  for (std::uint64_t seed : seeds) {
    try {
      avg.per_run.push_back(evaluate(seed));
    } catch (const std::exception& e) {
      avg.failures.push_back("seed " + std::to_string(seed) + ": " + e.what());
    }
  }
  const std::size_t done = avg.per_run.size();
  if (done == 0 || 2 * done < seeds.size()) {
    throw ContractError("multi_run: only " + std::to_string(done) + " of " +
                        std::to_string(seeds.size()) + " runs completed");
  }
  avg.runs = done;
  for (const auto& r : avg.per_run) {
    avg.precision += r.precision;
    avg.recall += r.recall;
    avg.f1 += r.f1;
    avg.fnr += r.fnr;
    avg.accuracy += r.accuracy;
    avg.wall_time += r.wall_time;
    avg.counts.tp += r.counts.tp;
    avg.counts.fp += r.counts.fp;
    avg.counts.tn += r.counts.tn;
    avg.counts.fn += r.counts.fn;
    for (const auto& d : r.degenerate) {
      if (std::find(avg.degenerate.begin(), avg.degenerate.end(), d) == avg.degenerate.end()) {
        avg.degenerate.push_back(d);
      }
    }
  }
  const double n = static_cast<double>(done);
  avg.precision /= n;
  avg.recall /= n;
  avg.f1 /= n;
  avg.fnr /= n;
  avg.accuracy /= n;
  avg.wall_time /= n;
  return avg;
}

// ---------------------------------------------------------------------------
// Report files

namespace {

json report_to_json(const MetricsReport& r) {
  json j{{"precision", r.precision}, {"recall", r.recall},       {"f1", r.f1},
         {"fnr", r.fnr},             {"accuracy", r.accuracy},   {"wall_time", r.wall_time},
         {"runs", r.runs},
         {"counts", {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"tn", r.counts.tn}, {"fn", r.counts.fn}}},
         {"degenerate", r.degenerate}, {"failures", r.failures}};
  j["per_run"] = json::array();
  for (const auto& p : r.per_run) j["per_run"].push_back(report_to_json(p));
  return j;
}

MetricsReport report_from_json(const json& j) {
  MetricsReport r;
  r.precision = j.at("precision").get<double>();
  r.recall = j.at("recall").get<double>();
  r.f1 = j.at("f1").get<double>();
  r.fnr = j.at("fnr").get<double>();
  r.accuracy = j.at("accuracy").get<double>();
  r.wall_time = j.at("wall_time").get<double>();
  r.runs = j.at("runs").get<std::size_t>();
  const auto& c = j.at("counts");
  r.counts = {c.at("tp").get<std::size_t>(), c.at("fp").get<std::size_t>(),
              c.at("tn").get<std::size_t>(), c.at("fn").get<std::size_t>()};
  r.degenerate = j.at("degenerate").get<std::vector<std::string>>();
  r.failures = j.at("failures").get<std::vector<std::string>>();
  for (const auto& p : j.at("per_run")) r.per_run.push_back(report_from_json(p));
  return r;
}

template <typename Fn>
auto parse_guarded(const std::string& text, const char* what, Fn&& fn) {
  try {
    return fn(json::parse(text));
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(std::string("malformed ") + what + ": " + e.what());
  }
}

}  // namespace

std::string serialize_report(const MetricsReport& r, const std::string& name) {
  json j;
  j["schema"] = "cnet-metrics";
  j["schema_version"] = kReportSchemaVersion;
  j["name"] = name;
  j["report"] = report_to_json(r);
  return j.dump(1);
}

MetricsReport deserialize_report(const std::string& text, std::string* name) {
  return parse_guarded(text, "metrics report", [&](const json& j) {
    if (!j.is_object() || j.value("schema", std::string{}) != "cnet-metrics" ||
        j.value("schema_version", -1) != kReportSchemaVersion) {
      throw FormatError("not a metrics report (expected schema cnet-metrics version " +
                        std::to_string(kReportSchemaVersion) + ")");
    }
    if (name != nullptr) *name = j.value("name", std::string{});
    return report_from_json(j.at("report"));
  });
}

void save_report(const MetricsReport& r, const std::filesystem::path& path,
                 const std::string& name) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write report file " + path.string());
  out << serialize_report(r, name) << '\n';
}

MetricsReport load_report(const std::filesystem::path& path, std::string* name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open report file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return deserialize_report(buf.str(), name);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Comparison

double metric_by_name(const MetricsReport& r, const std::string& column) {
  if (column == "precision") return r.precision;
  if (column == "recall") return r.recall;
  if (column == "f1") return r.f1;
  if (column == "fnr") return r.fnr;
  if (column == "accuracy") return r.accuracy;
  if (column == "time") return r.wall_time;
  throw InputError("unknown metric column '" + column + "'");
}

ComparisonTable compare_report(const std::vector<std::pair<std::string, MetricsReport>>& models) {
  if (models.size() < 2) throw InputError("a comparison needs at least two models");
  ComparisonTable t;
  const auto& base = models.front().second;
  for (const auto& [name, report] : models) {
    ComparisonRow row{name, report, {}};
    for (const auto& col : kComparisonColumns) {
      row.deltas.push_back(metric_by_name(report, col) - metric_by_name(base, col));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string ComparisonTable::to_text() const {
  std::size_t name_w = 5;
  for (const auto& r : rows) name_w = std::max(name_w, r.name.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(name_w)) << "model";
  for (const auto& c : kComparisonColumns) os << "  " << std::right << std::setw(10) << c;
  for (const auto& c : kComparisonColumns) {
    if (c != "time") os << "  " << std::right << std::setw(9) << ("d_" + c);
  }
  os << '\n';
  os << std::fixed;
  for (const auto& r : rows) {
    os << std::left << std::setw(static_cast<int>(name_w)) << r.name;
    for (const auto& c : kComparisonColumns) {
      os << "  " << std::right << std::setw(10) << std::setprecision(c == "time" ? 3 : 4)
         << metric_by_name(r.report, c);
    }
    for (std::size_t k = 0; k < kComparisonColumns.size(); ++k) {
      if (kComparisonColumns[k] == "time") continue;
      os << "  " << std::right << std::setw(9) << std::showpos << std::setprecision(4) << r.deltas[k]
         << std::noshowpos;
    }
    os << '\n';
  }
  return os.str();
}

std::string ComparisonTable::to_json() const {
  json j;
  j["schema"] = "cnet-comparison";
  j["schema_version"] = kReportSchemaVersion;
  j["columns"] = kComparisonColumns;
  j["rows"] = json::array();
  for (const auto& r : rows) {
    j["rows"].push_back({{"name", r.name}, {"report", report_to_json(r.report)}, {"deltas", r.deltas}});
  }
  return j.dump(1);
}

ComparisonTable ComparisonTable::from_json(const std::string& text) {
  return parse_guarded(text, "comparison file", [](const json& j) {
    if (!j.is_object() || j.value("schema", std::string{}) != "cnet-comparison" ||
        j.value("schema_version", -1) != kReportSchemaVersion) {
      throw FormatError("not a comparison file (expected schema cnet-comparison version " +
                        std::to_string(kReportSchemaVersion) + ")");
    }
    ComparisonTable t;
    for (const auto& jr : j.at("rows")) {
      t.rows.push_back({jr.at("name").get<std::string>(), report_from_json(jr.at("report")),
                        jr.at("deltas").get<std::vector<double>>()});
    }
    return t;
  });
}

std::string series_csv(const std::string& name, std::span<const double> values) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch," << name << '\n';
  for (std::size_t i = 0; i < values.size(); ++i) os << (i + 1) << ',' << values[i] << '\n';
  return os.str();
}

}  // namespace cnet
