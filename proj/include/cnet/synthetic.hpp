#pragma once

// Seeded synthetic datasets used by the test suites, the acceptance harness
// and `cnet synth`.

#include <cstdint>

#include "cnet/datapipe.hpp"

namespace cnet::synthetic {

// Four Gaussian blobs at (+-1, +-1) with the given noise; label 1 when the
// coordinates have opposite signs.
Dataset xor_blobs(std::size_t n, double noise, std::uint64_t seed);

// Two linearly separable blobs in 2-D.
Dataset linear_blobs(std::size_t n, double noise, std::uint64_t seed);

struct DriftSpec {
  std::size_t samples_per_chunk = 10000;
  std::size_t features = 8;
  double rotation_degrees = 30.0;
  double positive_rate = 0.3;
  double label_noise = 0.02;
  std::uint64_t seed = 0;
};

struct DriftChunks {
  Dataset chunk1;
  Dataset chunk2;
};

// Both chunks share the feature distribution; the decision boundary of the
// second chunk is rotated by rotation_degrees in the plane of the first two
// features.
DriftChunks drift_chunks(const DriftSpec& spec);

// A small credit-card-like table: a Time column spanning two days, PCA-like
// features V1..V<features>, an Amount column, a rare positive Class and a
// few duplicated positive rows.
Dataset fraud_table(std::size_t n, std::size_t features, std::uint64_t seed);

}  // namespace cnet::synthetic
