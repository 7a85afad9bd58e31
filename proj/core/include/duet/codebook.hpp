#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace duet {

struct CodebookError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// K centroids over patch pixel vectors; the discrete visual vocabulary for
// masked patch classification.
struct Codebook {
  int64_t k = 0;
  int64_t dim = 0;
  std::vector<double> centroids;  // [k, dim] row-major
  uint64_t fit_seed = 0;
};

struct KMeansResult {
  Codebook codebook;
  // sum of squared distances after each assignment pass; non-increasing
  std::vector<double> objective_per_iter;
};

// Lloyd's k-means with seeded k-means++ init and a fixed iteration count.
// An empty cluster is re-seeded from the point farthest from its assigned
// centroid. points is [n, dim] row-major with n >= k.
KMeansResult fit_codebook(std::span<const double> points, int64_t n, int64_t dim, int64_t k,
                          uint64_t seed, int iters);

// argmin squared distance per vector, ties broken by lowest centroid index
std::vector<int64_t> quantize_patches(std::span<const double> vectors, int64_t n,
                                      const Codebook& cb);

}  // namespace duet
