#include "cnet/datapipe.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "cnet/error.hpp"
#include "cnet/random.hpp"
#include "codec.hpp"

namespace cnet {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Dataset

Vector Dataset::labels() const { return Vector(y.begin(), y.end()); }

std::array<std::size_t, 2> Dataset::class_counts() const {
  std::array<std::size_t, 2> c{0, 0};
  for (int v : y) ++c[v == 1 ? 1 : 0];
  return c;
}

std::size_t Dataset::feature_index(std::string_view name) const {
  for (std::size_t i = 0; i < feature_names.size(); ++i) {
    if (feature_names[i] == name) return i;
  }
  throw InputError("dataset has no feature named '" + std::string(name) + "'");
}

Vector Dataset::column(std::size_t feature) const {
  if (feature >= cols()) throw InputError("feature index " + std::to_string(feature) + " out of range");
  Vector out(rows());
  for (std::size_t r = 0; r < rows(); ++r) out[r] = x(r, feature);
  return out;
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows_to_keep) const {
  Dataset out;
  out.feature_names = feature_names;
  out.provenance = provenance;
  out.x = Matrix(rows_to_keep.size(), cols());
  out.y.reserve(rows_to_keep.size());
  for (std::size_t k = 0; k < rows_to_keep.size(); ++k) {
    const std::size_t r = rows_to_keep[k];
    if (r >= rows()) throw InputError("row index " + std::to_string(r) + " out of range");
    std::copy(x.row(r).begin(), x.row(r).end(), out.x.row(k).begin());
    out.y.push_back(y[r]);
  }
  return out;
}

Dataset Dataset::select_features(std::span<const std::size_t> features) const {
  Dataset out;
  out.provenance = provenance;
  out.y = y;
  out.x = Matrix(rows(), features.size());
  for (std::size_t f : features) {
    if (f >= cols()) throw InputError("feature index " + std::to_string(f) + " out of range");
    out.feature_names.push_back(f < feature_names.size() ? feature_names[f] : "f" + std::to_string(f));
  }
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t k = 0; k < features.size(); ++k) out.x(r, k) = x(r, features[k]);
  }
  return out;
}

Dataset Dataset::drop_features(std::span<const std::string> names) const {
  std::vector<bool> drop(cols(), false);
  for (const auto& n : names) drop[feature_index(n)] = true;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < cols(); ++i) {
    if (!drop[i]) keep.push_back(i);
  }
  return select_features(keep);
}

void Dataset::validate() const {
  if (x.rows() != y.size()) {
    throw DataError("dataset has " + std::to_string(x.rows()) + " feature rows but " +
                    std::to_string(y.size()) + " labels");
  }
  if (!feature_names.empty() && feature_names.size() != x.cols()) {
    throw DataError("dataset feature name count does not match its width");
  }
  for (int v : y) {
    if (v != 0 && v != 1) throw DataError("dataset labels must be 0 or 1");
  }
}

Dataset make_dataset(Matrix x, std::vector<int> y, std::vector<std::string> names,
                     std::string provenance) {
  if (names.empty()) {
    for (std::size_t i = 0; i < x.cols(); ++i) names.push_back("f" + std::to_string(i));
  }
  Dataset ds{std::move(names), std::move(x), std::move(y), std::move(provenance)};
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    cells.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

Dataset parse_csv(std::string_view text, std::string_view label_column,
                  std::span<const std::string> drop_columns, std::string provenance) {
  std::size_t pos = 0;
  auto next_line = [&](std::string_view& line) {
    while (pos < text.size()) {
      const auto end = text.find('\n', pos);
      line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
      pos = end == std::string_view::npos ? text.size() : end + 1;
      if (!trim(line).empty()) return true;
    }
    return false;
  };

  std::string_view header_line;
  if (!next_line(header_line)) throw FormatError("CSV input is empty");
  const auto header = split_line(header_line);
  std::size_t label_idx = header.size();
  std::vector<bool> dropped(header.size(), false);
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == label_column) label_idx = c;
    for (const auto& d : drop_columns) {
      if (header[c] == d) dropped[c] = true;
    }
  }
  if (label_idx == header.size()) {
    throw InputError("label column '" + std::string(label_column) + "' not found in CSV header");
  }
  for (const auto& d : drop_columns) {
    if (std::find(header.begin(), header.end(), d) == header.end()) {
      throw InputError("drop column '" + d + "' not found in CSV header");
    }
  }

  Dataset ds;
  ds.provenance = std::move(provenance);
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != label_idx && !dropped[c]) {
      feature_cols.push_back(c);
      ds.feature_names.emplace_back(header[c]);
    }
  }
  std::vector<double> data;
  std::string_view line;
  std::size_t row = 0;
  while (next_line(line)) {
    ++row;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw FormatError("CSV row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                        " cells, header has " + std::to_string(header.size()));
    }
    auto cell_value = [&](std::size_t c) {
      double v = 0.0;
      if (!parse_double(cells[c], v)) {
        throw FormatError("non-numeric value '" + std::string(cells[c]) + "' at (row " +
                          std::to_string(row) + ", column " + std::to_string(c + 1) + ")");
      }
      return v;
    };
    for (std::size_t c : feature_cols) data.push_back(cell_value(c));
    ds.y.push_back(cell_value(label_idx) != 0.0 ? 1 : 0);
  }
  ds.x = Matrix(ds.y.size(), feature_cols.size(), std::move(data));
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, std::string_view label_column,
                 std::span<const std::string> drop_columns) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open CSV file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), label_column, drop_columns, path.filename().string());
}

void write_csv(const Dataset& ds, const std::filesystem::path& path, std::string_view label_column) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write CSV file " + path.string());
  for (std::size_t c = 0; c < ds.cols(); ++c) {
    out << (c < ds.feature_names.size() ? ds.feature_names[c] : "f" + std::to_string(c)) << ',';
  }
  out << label_column << '\n';
  char buf[64];
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    for (double v : ds.row(r)) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), v);
      out.write(buf, res.ptr - buf);
      out << ',';
    }
    out << ds.y[r] << '\n';
  }
}

// ---------------------------------------------------------------------------
// Dedup and normalization

DedupResult dedup(const Dataset& ds) {
  struct RowHash {
    const Dataset* ds;
    std::size_t operator()(std::size_t r) const noexcept {
      std::size_t h = std::hash<int>{}(ds->y[r]);
      for (double v : ds->row(r)) {
        h ^= std::hash<double>{}(v == 0.0 ? 0.0 : v) + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
      }
      return h;
    }
  };
  struct RowEq {
    const Dataset* ds;
    bool operator()(std::size_t a, std::size_t b) const noexcept {
      if (ds->y[a] != ds->y[b]) return false;
      auto ra = ds->row(a);
      auto rb = ds->row(b);
      return std::equal(ra.begin(), ra.end(), rb.begin());
    }
  };
  std::unordered_set<std::size_t, RowHash, RowEq> seen(ds.rows() * 2 + 1, RowHash{&ds}, RowEq{&ds});
  std::vector<std::size_t> keep;
  keep.reserve(ds.rows());
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    if (seen.insert(r).second) keep.push_back(r);
  }
  return {ds.select_rows(keep), ds.rows() - keep.size()};
}

double RangeRecord::apply_value(std::size_t f, double v) const {
  const double span = max[f] - min[f];
  if (!(span > 0.0)) return 0.5 * (lo + hi);
  return lo + (v - min[f]) * (hi - lo) / span;
}

Dataset RangeRecord::apply(const Dataset& ds) const {
  if (ds.cols() != min.size()) {
    throw DimensionError("range record has " + std::to_string(min.size()) +
                         " features, dataset has " + std::to_string(ds.cols()));
  }
  Dataset out = ds;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.x.row(r);
    for (std::size_t f = 0; f < row.size(); ++f) row[f] = apply_value(f, row[f]);
  }
  return out;
}

Dataset RangeRecord::invert(const Dataset& ds) const {
  if (ds.cols() != min.size()) throw DimensionError("range record width mismatch");
  Dataset out = ds;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.x.row(r);
    for (std::size_t f = 0; f < row.size(); ++f) {
      const double span = max[f] - min[f];
      row[f] = span > 0.0 ? min[f] + (row[f] - lo) * span / (hi - lo) : min[f];
    }
  }
  return out;
}

NormalizeResult normalize_range(const Dataset& ds, double lo, double hi) {
  if (!(hi > lo)) throw InputError("normalize_range: hi must exceed lo");
  if (ds.empty()) throw DataError("normalize_range: dataset is empty");
  NormalizeResult res;
  res.record.lo = lo;
  res.record.hi = hi;
  res.record.min.assign(ds.cols(), 0.0);
  res.record.max.assign(ds.cols(), 0.0);
  for (std::size_t f = 0; f < ds.cols(); ++f) {
    double mn = ds.x(0, f);
    double mx = mn;
    for (std::size_t r = 1; r < ds.rows(); ++r) {
      mn = std::min(mn, ds.x(r, f));
      mx = std::max(mx, ds.x(r, f));
    }
    res.record.min[f] = mn;
    res.record.max[f] = mx;
    if (!(mx > mn)) {
      res.record.constant_features.push_back(f);
      res.warnings.push_back("feature '" +
                             (f < ds.feature_names.size() ? ds.feature_names[f] : std::to_string(f)) +
                             "' is constant; mapped to the range midpoint");
    }
  }
  res.data = res.record.apply(ds);
  // Pin the extremes exactly; rounding in the affine map can miss them by an ulp.
  for (std::size_t f = 0; f < ds.cols(); ++f) {
    if (!(res.record.max[f] > res.record.min[f])) continue;
    for (std::size_t r = 0; r < ds.rows(); ++r) {
      if (ds.x(r, f) == res.record.min[f]) res.data.x(r, f) = lo;
      if (ds.x(r, f) == res.record.max[f]) res.data.x(r, f) = hi;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Relevancy and grouping

RelevancyMethod parse_relevancy(std::string_view name) {
  if (name == "pearson") return RelevancyMethod::pearson;
  if (name == "mutual_information" || name == "mi") return RelevancyMethod::mutual_information;
  throw InputError("unknown relevancy method '" + std::string(name) + "'");
}

std::string_view to_string(RelevancyMethod m) noexcept {
  return m == RelevancyMethod::pearson ? "pearson" : "mutual_information";
}

namespace {

double abs_pearson(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return std::clamp(std::abs(sab) / std::sqrt(saa * sbb), 0.0, 1.0);
}

double normalized_mutual_information(std::span<const double> f, const std::vector<int>& y) {
  constexpr std::size_t kBins = 16;
  const auto [mn_it, mx_it] = std::minmax_element(f.begin(), f.end());
  const double mn = *mn_it;
  const double width = (*mx_it - mn) / kBins;
  if (!(width > 0.0)) return 0.0;
  std::array<std::array<double, 2>, kBins> joint{};
  for (std::size_t i = 0; i < f.size(); ++i) {
    auto bin = static_cast<std::size_t>((f[i] - mn) / width);
    bin = std::min(bin, kBins - 1);
    joint[bin][y[i] == 1 ? 1 : 0] += 1.0;
  }
  const double n = static_cast<double>(f.size());
  std::array<double, 2> py{};
  std::array<double, kBins> px{};
  for (std::size_t b = 0; b < kBins; ++b) {
    for (int c = 0; c < 2; ++c) {
      px[b] += joint[b][c];
      py[c] += joint[b][c];
    }
  }
  double mi = 0.0;
  for (std::size_t b = 0; b < kBins; ++b) {
    for (int c = 0; c < 2; ++c) {
      if (joint[b][c] == 0.0) continue;
      mi += (joint[b][c] / n) * std::log(joint[b][c] * n / (px[b] * py[c]));
    }
  }
  double hy = 0.0;
  for (double c : py) {
    if (c > 0.0) hy -= (c / n) * std::log(c / n);
  }
  return hy > 0.0 ? std::clamp(mi / hy, 0.0, 1.0) : 0.0;
}

}  // namespace

RelevancyResult relevancy_scores(const Dataset& ds, RelevancyMethod method) {
  if (ds.rows() < 2) throw DataError("relevancy needs at least two rows");
  const auto counts = ds.class_counts();
  if (counts[0] == 0 || counts[1] == 0) throw DataError("relevancy needs both classes present");
  RelevancyResult res;
  const Vector labels = ds.labels();
  for (std::size_t f = 0; f < ds.cols(); ++f) {
    const Vector col = ds.column(f);
    const auto [mn, mx] = std::minmax_element(col.begin(), col.end());
    if (*mn == *mx) {
      res.scores.push_back(0.0);
      res.warnings.push_back("feature " + std::to_string(f) + " is constant; relevancy 0");
      continue;
    }
    res.scores.push_back(method == RelevancyMethod::pearson ? abs_pearson(col, labels)
                                                            : normalized_mutual_information(col, ds.y));
  }
  return res;
}

GroupOrder parse_group_order(std::string_view name) {
  if (name == "descending") return GroupOrder::descending;
  if (name == "ascending") return GroupOrder::ascending;
  if (name == "none") return GroupOrder::none;
  throw InputError("unknown group order '" + std::string(name) + "'");
}

std::string_view to_string(GroupOrder o) noexcept {
  switch (o) {
    case GroupOrder::descending: return "descending";
    case GroupOrder::ascending: return "ascending";
    case GroupOrder::none: return "none";
  }
  return "none";
}

void GroupPlan::validate(std::size_t feature_count) const {
  std::vector<bool> used(feature_count, false);
  for (const auto& g : groups) {
    if (g.features.empty()) throw InputError("feature group is empty");
    for (std::size_t f : g.features) {
      if (f >= feature_count) {
        throw InputError("feature group references feature " + std::to_string(f) +
                         " beyond dataset width " + std::to_string(feature_count));
      }
      if (used[f]) throw InputError("feature groups overlap at feature " + std::to_string(f));
      used[f] = true;
    }
  }
}

GroupPlan make_groups(std::span<const double> scores, std::size_t k, GroupOrder order) {
  const std::size_t d = scores.size();
  if (k < 1 || k > d) {
    throw InputError("group count " + std::to_string(k) + " must lie in [1, " + std::to_string(d) + "]");
  }
  std::vector<std::size_t> idx(d);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (order != GroupOrder::none) {
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  }
  GroupPlan plan;
  plan.order = order;
  std::size_t pos = 0;
  for (std::size_t g = 0; g < k; ++g) {
    const std::size_t size = d / k + (g < d % k ? 1 : 0);
    FeatureGroup fg;
    fg.features.assign(idx.begin() + static_cast<std::ptrdiff_t>(pos),
                       idx.begin() + static_cast<std::ptrdiff_t>(pos + size));
    double sum = 0.0;
    for (std::size_t f : fg.features) sum += scores[f];
    fg.mean_relevancy = sum / static_cast<double>(size);
    plan.groups.push_back(std::move(fg));
    pos += size;
  }
  if (order == GroupOrder::ascending) std::reverse(plan.groups.begin(), plan.groups.end());
  return plan;
}

std::vector<std::size_t> cumulative_features(const GroupPlan& plan, std::size_t upto) {
  std::vector<std::size_t> out;
  for (std::size_t g = 0; g <= upto && g < plan.groups.size(); ++g) {
    out.insert(out.end(), plan.groups[g].features.begin(), plan.groups[g].features.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Dataset> subdatasets(const Dataset& ds, const GroupPlan& plan) {
  plan.validate(ds.cols());
  std::vector<Dataset> out;
  for (std::size_t g = 0; g < plan.groups.size(); ++g) {
    out.push_back(ds.select_features(cumulative_features(plan, g)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Chunking and splitting

std::pair<Dataset, Dataset> chunk_by_time(const Dataset& ds, std::span<const double> times,
                                          double boundary) {
  if (times.size() != ds.rows()) {
    throw DimensionError("chunk_by_time: " + std::to_string(times.size()) + " time values for " +
                         std::to_string(ds.rows()) + " rows");
  }
  std::vector<std::size_t> first, second;
  for (std::size_t r = 0; r < ds.rows(); ++r) (times[r] < boundary ? first : second).push_back(r);
  if (first.empty()) throw DataError("chunk_by_time: no rows before the boundary");
  if (second.empty()) throw DataError("chunk_by_time: no rows at or after the boundary");
  return {ds.select_rows(first), ds.select_rows(second)};
}

void SplitSpec::validate() const {
  if (fractions.empty()) throw InputError("split spec has no parts");
  double sum = 0.0;
  for (const auto& [name, frac] : fractions) {
    if (!(frac > 0.0)) throw InputError("split fraction for '" + name + "' must be positive");
    sum += frac;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InputError("split fractions must sum to 1");
}

std::map<std::string, Dataset> stratified_split(const Dataset& ds, const SplitSpec& spec) {
  spec.validate();
  const std::size_t parts = spec.fractions.size();
  Rng rng(spec.seed);
  std::vector<std::vector<std::size_t>> assigned(parts);

  auto allocate = [&](std::vector<std::size_t> members) {
    std::shuffle(members.begin(), members.end(), rng);
    const double n = static_cast<double>(members.size());
    std::vector<std::size_t> counts(parts);
    std::vector<double> remainder(parts);
    std::size_t total = 0;
    for (std::size_t p = 0; p < parts; ++p) {
      const double exact = n * spec.fractions[p].second;
      counts[p] = static_cast<std::size_t>(std::floor(exact + 1e-9));
      remainder[p] = exact - static_cast<double>(counts[p]);
      total += counts[p];
    }
    std::vector<std::size_t> tie(parts);
    std::iota(tie.begin(), tie.end(), std::size_t{0});
    std::shuffle(tie.begin(), tie.end(), rng);
    std::vector<std::size_t> by_rem(parts);
    std::iota(by_rem.begin(), by_rem.end(), std::size_t{0});
    std::stable_sort(by_rem.begin(), by_rem.end(), [&](std::size_t a, std::size_t b) {
      if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
      return tie[a] < tie[b];
    });
    for (std::size_t i = 0; total < members.size(); ++i, ++total) ++counts[by_rem[i % parts]];
    std::size_t pos = 0;
    for (std::size_t p = 0; p < parts; ++p) {
      assigned[p].insert(assigned[p].end(), members.begin() + static_cast<std::ptrdiff_t>(pos),
                         members.begin() + static_cast<std::ptrdiff_t>(pos + counts[p]));
      pos += counts[p];
    }
  };

  if (spec.stratified) {
    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t r = 0; r < ds.rows(); ++r) by_class[ds.y[r] == 1 ? 1 : 0].push_back(r);
    for (int c = 0; c < 2; ++c) {
      if (by_class[c].empty()) continue;
      if (by_class[c].size() < parts) {
        throw DataError("class " + std::to_string(c) + " has " + std::to_string(by_class[c].size()) +
                        " samples, fewer than the " + std::to_string(parts) + " split parts");
      }
      allocate(by_class[c]);
    }
  } else {
    std::vector<std::size_t> all(ds.rows());
    std::iota(all.begin(), all.end(), std::size_t{0});
    allocate(std::move(all));
  }

  std::map<std::string, Dataset> out;
  for (std::size_t p = 0; p < parts; ++p) {
    std::sort(assigned[p].begin(), assigned[p].end());
    Dataset part = ds.select_rows(assigned[p]);
    part.provenance = ds.provenance + "/" + spec.fractions[p].first;
    out.emplace(spec.fractions[p].first, std::move(part));
  }
  return out;
}

// ---------------------------------------------------------------------------
// SMOTE

SmoteResult smote(const Dataset& ds, double target_ratio, std::size_t k_neighbors,
                  std::uint64_t seed) {
  if (!(target_ratio > 0.0)) throw InputError("smote: target ratio must be positive");
  if (k_neighbors < 1) throw InputError("smote: k_neighbors must be at least 1");
  const auto counts = ds.class_counts();
  const int minority = counts[1] <= counts[0] ? 1 : 0;
  const std::size_t n_min = counts[minority];
  const std::size_t n_maj = counts[1 - minority];
  const auto target = static_cast<std::size_t>(std::llround(target_ratio * static_cast<double>(n_maj)));

  SmoteResult res{ds, 0, minority};
  if (target == n_min) return res;
  if (target < n_min) {
    throw InputError("smote: target ratio " + std::to_string(target_ratio) +
                     " is below the current minority/majority ratio");
  }
  if (n_min < k_neighbors + 1) {
    throw DataError("smote: minority class has " + std::to_string(n_min) +
                    " samples; need at least k_neighbors + 1 = " + std::to_string(k_neighbors + 1));
  }

  std::vector<std::size_t> members;
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    if (ds.y[r] == minority) members.push_back(r);
  }
  // Brute-force k nearest minority neighbours (squared Euclidean).
  std::vector<std::vector<std::size_t>> neighbours(members.size());
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t i = 0; i < members.size(); ++i) {
    dist.clear();
    auto a = ds.row(members[i]);
    for (std::size_t j = 0; j < members.size(); ++j) {
      if (i == j) continue;
      auto b = ds.row(members[j]);
      double d2 = 0.0;
      for (std::size_t f = 0; f < a.size(); ++f) d2 += (a[f] - b[f]) * (a[f] - b[f]);
      dist.emplace_back(d2, j);
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_neighbors),
                      dist.end());
    for (std::size_t k = 0; k < k_neighbors; ++k) neighbours[i].push_back(dist[k].second);
  }

  Rng rng(seed);
  std::vector<std::size_t> base_order(members.size());
  std::iota(base_order.begin(), base_order.end(), std::size_t{0});
  std::shuffle(base_order.begin(), base_order.end(), rng);
  std::uniform_int_distribution<std::size_t> pick(0, k_neighbors - 1);
  std::uniform_real_distribution<double> gap(0.0, 1.0);

  const std::size_t n_new = target - n_min;
  Vector sample(ds.cols());
  for (std::size_t s = 0; s < n_new; ++s) {
    const std::size_t i = base_order[s % members.size()];
    const std::size_t j = neighbours[i][pick(rng)];
    const double t = gap(rng);
    auto a = ds.row(members[i]);
    auto b = ds.row(members[j]);
    for (std::size_t f = 0; f < sample.size(); ++f) sample[f] = a[f] + t * (b[f] - a[f]);
    res.data.x.append_row(sample);
    res.data.y.push_back(minority);
  }
  res.synthetic = n_new;
  res.data.provenance = ds.provenance + "+smote";
  return res;
}

// ---------------------------------------------------------------------------
// Chunk files

std::string serialize_dataset(const Dataset& ds) {
  json j;
  j["format"] = kDatasetFormatName;
  j["format_version"] = kDatasetFormatVersion;
  j["provenance"] = ds.provenance;
  j["feature_names"] = ds.feature_names;
  j["rows"] = ds.rows();
  j["cols"] = ds.cols();
  j["x"] = codec::encode_doubles(ds.x.data());
  j["y"] = ds.y;
  return j.dump(1);
}

Dataset deserialize_dataset(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("dataset file is not valid JSON: ") + e.what());
  }
  const std::string expected =
      std::string(kDatasetFormatName) + " version " + std::to_string(kDatasetFormatVersion);
  if (!j.is_object() || j.value("format", std::string{}) != kDatasetFormatName ||
      j.value("format_version", -1) != kDatasetFormatVersion) {
    throw FormatError("not a dataset file: expected format '" + expected + "'");
  }
  try {
    Dataset ds;
    ds.provenance = j.at("provenance").get<std::string>();
    ds.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    ds.x = Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                  codec::decode_doubles(j.at("x").get<std::string>()));
    ds.y = j.at("y").get<std::vector<int>>();
    ds.validate();
    return ds;
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(std::string("malformed dataset file (") + expected + "): " + e.what());
  }
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write dataset file " + path.string());
  out << serialize_dataset(ds) << '\n';
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open dataset file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_dataset(buf.str());
}

}  // namespace cnet
