#include "cnet/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cnet/error.hpp"
#include "cnet/random.hpp"

namespace cnet::synthetic {

namespace {

Dataset blobs(std::size_t n, double noise, std::uint64_t seed, bool xor_labels) {
  Rng rng(seed);
  std::normal_distribution<double> jitter(0.0, noise);
  std::uniform_int_distribution<int> corner(0, 3);
  Matrix x(n, 2);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = corner(rng);
    const double cx = (c & 1) ? 1.0 : -1.0;
    const double cy = (c & 2) ? 1.0 : -1.0;
    x(i, 0) = cx + jitter(rng);
    x(i, 1) = cy + jitter(rng);
    y[i] = xor_labels ? ((cx > 0) != (cy > 0) ? 1 : 0) : (cx > 0 ? 1 : 0);
  }
  return make_dataset(std::move(x), std::move(y), {"x0", "x1"},
                      xor_labels ? "synthetic-xor" : "synthetic-linear");
}

}  // namespace

Dataset xor_blobs(std::size_t n, double noise, std::uint64_t seed) {
  return blobs(n, noise, seed, true);
}

Dataset linear_blobs(std::size_t n, double noise, std::uint64_t seed) {
  return blobs(n, noise, seed, false);
}

DriftChunks drift_chunks(const DriftSpec& spec) {
  if (spec.features < 2) throw InputError("drift fixture needs at least two features");
  if (!(spec.positive_rate > 0.0 && spec.positive_rate < 1.0)) {
    throw InputError("drift fixture positive rate must lie in (0, 1)");
  }
  Rng rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::string> names;
  for (std::size_t f = 0; f < spec.features; ++f) names.push_back("v" + std::to_string(f + 1));

  auto make_chunk = [&](double angle, const char* tag) {
    const std::size_t n = spec.samples_per_chunk;
    Matrix x(n, spec.features);
    Vector score(n);
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t f = 0; f < spec.features; ++f) x(i, f) = gauss(rng);
      score[i] = c * x(i, 0) + s * x(i, 1);
    }
    Vector sorted = score;
    const auto q = static_cast<std::size_t>(std::floor((1.0 - spec.positive_rate) * static_cast<double>(n)));
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(q), sorted.end());
    const double cut = sorted[q];
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = score[i] >= cut ? 1 : 0;
      if (unit(rng) < spec.label_noise) y[i] = 1 - y[i];
    }
    return make_dataset(std::move(x), std::move(y), names, tag);
  };

  DriftChunks out;
  out.chunk1 = make_chunk(0.0, "synthetic-drift/chunk1");
  out.chunk2 = make_chunk(spec.rotation_degrees * std::numbers::pi / 180.0, "synthetic-drift/chunk2");
  return out;
}

Dataset fraud_table(std::size_t n, std::size_t features, std::uint64_t seed) {
  if (n < 20) throw InputError("fraud fixture needs at least 20 rows");
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Vector times(n);
  for (double& t : times) t = std::floor(unit(rng) * 172800.0);
  std::sort(times.begin(), times.end());

  std::vector<std::string> names{"Time"};
  for (std::size_t f = 0; f < features; ++f) names.push_back("V" + std::to_string(f + 1));
  names.push_back("Amount");

  Matrix x(n, features + 2);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = unit(rng) < 0.04 ? 1 : 0;
    x(i, 0) = times[i];
    for (std::size_t f = 0; f < features; ++f) {
      const double shift = (y[i] == 1 && f < 3) ? 2.0 : 0.0;
      x(i, 1 + f) = gauss(rng) + shift;
    }
    x(i, features + 1) = std::round(std::exp(3.0 + gauss(rng)) * 100.0) / 100.0;
  }
  // Duplicate a few positive rows verbatim, as in real transaction logs.
  std::size_t copies = 0;
  for (std::size_t i = 0; i + 1 < n && copies < 3; ++i) {
    if (y[i] == 1 && y[i + 1] == 0) {
      std::copy(x.row(i).begin(), x.row(i).end(), x.row(i + 1).begin());
      y[i + 1] = 1;
      ++copies;
      ++i;
    }
  }
  return make_dataset(std::move(x), std::move(y), std::move(names), "synthetic-fraud");
}

}  // namespace cnet::synthetic
