#include "duet/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "duet/rng.hpp"

namespace duet {

namespace {

double dist2(const double* a, const double* b, int64_t dim) {
  double acc = 0.0;
  for (int64_t i = 0; i < dim; ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace

KMeansResult fit_codebook(std::span<const double> points, int64_t n, int64_t dim, int64_t k,
                          uint64_t seed, int iters) {
  if (k < 2) throw CodebookError("fit_codebook: K must be >= 2");
  if (n < k)
    throw CodebookError("fit_codebook: sample of " + std::to_string(n) +
                        " points smaller than K=" + std::to_string(k));
  if (static_cast<int64_t>(points.size()) != n * dim)
    throw CodebookError("fit_codebook: point buffer does not match n*dim");

  Rng rng(Rng::mix(seed, 0x6B6D65616E73ull));
  KMeansResult res;
  Codebook& cb = res.codebook;
  cb.k = k;
  cb.dim = dim;
  cb.fit_seed = seed;
  cb.centroids.assign(static_cast<size_t>(k * dim), 0.0);

  // k-means++: first centroid uniform, then D^2-weighted draws
  auto copy_point = [&](int64_t c, int64_t p) {
    std::copy_n(points.data() + p * dim, dim, cb.centroids.data() + c * dim);
  };
  copy_point(0, static_cast<int64_t>(rng.below(static_cast<uint64_t>(n))));
  std::vector<double> min_d2(static_cast<size_t>(n), std::numeric_limits<double>::max());
  for (int64_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (int64_t p = 0; p < n; ++p) {
      double d = dist2(points.data() + p * dim, cb.centroids.data() + (c - 1) * dim, dim);
      min_d2[static_cast<size_t>(p)] = std::min(min_d2[static_cast<size_t>(p)], d);
      total += min_d2[static_cast<size_t>(p)];
    }
    int64_t chosen = n - 1;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      double acc = 0.0;
      for (int64_t p = 0; p < n; ++p) {
        acc += min_d2[static_cast<size_t>(p)];
        if (acc >= target) {
          chosen = p;
          break;
        }
      }
    } else {
      chosen = static_cast<int64_t>(rng.below(static_cast<uint64_t>(n)));
    }
    copy_point(c, chosen);
  }

  std::vector<int64_t> assign(static_cast<size_t>(n), 0);
  std::vector<double> point_d2(static_cast<size_t>(n), 0.0);
  for (int iter = 0; iter < iters; ++iter) {
    double objective = 0.0;
    for (int64_t p = 0; p < n; ++p) {
      double best = std::numeric_limits<double>::max();
      int64_t best_c = 0;
      for (int64_t c = 0; c < k; ++c) {
        double d = dist2(points.data() + p * dim, cb.centroids.data() + c * dim, dim);
        if (d < best) {
          best = d;
          best_c = c;
        }
      }
      assign[static_cast<size_t>(p)] = best_c;
      point_d2[static_cast<size_t>(p)] = best;
      objective += best;
    }
    res.objective_per_iter.push_back(objective);

    std::vector<double> sums(static_cast<size_t>(k * dim), 0.0);
    std::vector<int64_t> counts(static_cast<size_t>(k), 0);
    for (int64_t p = 0; p < n; ++p) {
      int64_t c = assign[static_cast<size_t>(p)];
      counts[static_cast<size_t>(c)]++;
      const double* src = points.data() + p * dim;
      double* dst = sums.data() + c * dim;
      for (int64_t i = 0; i < dim; ++i) dst[i] += src[i];
    }
    for (int64_t c = 0; c < k; ++c) {
      if (counts[static_cast<size_t>(c)] > 0) {
        double inv = 1.0 / static_cast<double>(counts[static_cast<size_t>(c)]);
        for (int64_t i = 0; i < dim; ++i)
          cb.centroids[static_cast<size_t>(c * dim + i)] =
              sums[static_cast<size_t>(c * dim + i)] * inv;
      } else {
        // re-seed from the point farthest from its assigned centroid
        int64_t far_p = 0;
        double far_d = -1.0;
        for (int64_t p = 0; p < n; ++p) {
          if (point_d2[static_cast<size_t>(p)] > far_d) {
            far_d = point_d2[static_cast<size_t>(p)];
            far_p = p;
          }
        }
        copy_point(c, far_p);
        point_d2[static_cast<size_t>(far_p)] = 0.0;
      }
    }
  }
  return res;
}

std::vector<int64_t> quantize_patches(std::span<const double> vectors, int64_t n,
                                      const Codebook& cb) {
  if (static_cast<int64_t>(vectors.size()) != n * cb.dim)
    throw CodebookError("quantize_patches: vector length " +
                        std::to_string(n ? vectors.size() / static_cast<size_t>(n) : 0) +
                        " does not match centroid dim " + std::to_string(cb.dim));
  std::vector<int64_t> codes(static_cast<size_t>(n), 0);
  for (int64_t p = 0; p < n; ++p) {
    double best = std::numeric_limits<double>::max();
    int64_t best_c = 0;
    for (int64_t c = 0; c < cb.k; ++c) {
      double d = dist2(vectors.data() + p * cb.dim, cb.centroids.data() + c * cb.dim, cb.dim);
      if (d < best) {  // strict: ties keep the lowest index
        best = d;
        best_c = c;
      }
    }
    codes[static_cast<size_t>(p)] = best_c;
  }
  return codes;
}

}  // namespace duet
