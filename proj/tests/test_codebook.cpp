#include <doctest.h>

#include <cmath>
#include <limits>

#include "duet/codebook.hpp"
#include "duet/rng.hpp"

using namespace duet;

TEST_CASE("two well-separated clouds recover the cloud means") {
  Rng rng(11);
  const int64_t per = 50, dim = 3;
  std::vector<double> pts;
  std::vector<double> mean_a(dim, 0.0), mean_b(dim, 0.0);
  for (int64_t i = 0; i < per; ++i)
    for (int64_t d = 0; d < dim; ++d) {
      double v = 0.1 * rng.normal();
      pts.push_back(v);
      mean_a[static_cast<size_t>(d)] += v / per;
    }
  for (int64_t i = 0; i < per; ++i)
    for (int64_t d = 0; d < dim; ++d) {
      double v = 10.0 + 0.1 * rng.normal();
      pts.push_back(v);
      mean_b[static_cast<size_t>(d)] += v / per;
    }
  auto res = fit_codebook(pts, 2 * per, dim, 2, 123, 20);
  const auto& c = res.codebook.centroids;
  // centroid order depends on init; match by first coordinate
  const double* lo = c[0] < c[dim] ? c.data() : c.data() + dim;
  const double* hi = c[0] < c[dim] ? c.data() + dim : c.data();
  for (int64_t d = 0; d < dim; ++d) {
    CHECK(std::abs(lo[d] - mean_a[static_cast<size_t>(d)]) < 1e-9);
    CHECK(std::abs(hi[d] - mean_b[static_cast<size_t>(d)]) < 1e-9);
  }
}

TEST_CASE("K equal to sample size gives zero quantization error") {
  Rng rng(3);
  const int64_t n = 12, dim = 4;
  std::vector<double> pts(static_cast<size_t>(n * dim));
  for (double& v : pts) v = rng.uniform(-5.0, 5.0);
  auto res = fit_codebook(pts, n, dim, n, 9, 10);
  CHECK(res.objective_per_iter.back() == 0.0);
  auto codes = quantize_patches(pts, n, res.codebook);
  for (int64_t p = 0; p < n; ++p) {
    const double* cent = res.codebook.centroids.data() + codes[static_cast<size_t>(p)] * dim;
    for (int64_t d = 0; d < dim; ++d)
      CHECK(cent[d] == pts[static_cast<size_t>(p * dim + d)]);
  }
}

TEST_CASE("objective is non-increasing across iterations") {
  Rng rng(17);
  const int64_t n = 200, dim = 6;
  std::vector<double> pts(static_cast<size_t>(n * dim));
  for (double& v : pts) v = rng.uniform(0.0, 1.0);
  auto res = fit_codebook(pts, n, dim, 8, 55, 15);
  REQUIRE(res.objective_per_iter.size() == 15);
  for (size_t i = 1; i < res.objective_per_iter.size(); ++i)
    CHECK(res.objective_per_iter[i] <= res.objective_per_iter[i - 1] + 1e-12);
}

TEST_CASE("refitting with the same corpus and seed is bit-identical") {
  Rng rng(4);
  std::vector<double> pts(300);
  for (double& v : pts) v = rng.uniform(-1.0, 1.0);
  auto a = fit_codebook(pts, 100, 3, 5, 77, 12);
  auto b = fit_codebook(pts, 100, 3, 5, 77, 12);
  CHECK(a.codebook.centroids == b.codebook.centroids);
}

TEST_CASE("quantization matches an exhaustive scan and breaks ties low") {
  Codebook cb;
  cb.k = 5;
  cb.dim = 2;
  cb.fit_seed = 0;
  cb.centroids = {0, 0, 1, 0, 0, 1, 1, 1, 2, 2};

  // exact centroid hit
  std::vector<double> at3 = {1, 1};
  CHECK(quantize_patches(at3, 1, cb)[0] == 3);

  // equidistant to centroids 1 and 2 -> lowest index wins
  std::vector<double> tie = {0.5, 0.5};
  auto code = quantize_patches(tie, 1, cb)[0];
  CHECK(code == 0);  // (0,0) is also at the same distance; index 0 is lowest

  Rng rng(21);
  std::vector<double> pts(200);
  for (double& v : pts) v = rng.uniform(-1.0, 3.0);
  auto codes = quantize_patches(pts, 100, cb);
  for (int64_t p = 0; p < 100; ++p) {
    double best = std::numeric_limits<double>::max();
    int64_t want = -1;
    for (int64_t c = 0; c < cb.k; ++c) {
      double d = 0;
      for (int64_t j = 0; j < 2; ++j) {
        double diff = pts[static_cast<size_t>(p * 2 + j)] -
                      cb.centroids[static_cast<size_t>(c * 2 + j)];
        d += diff * diff;
      }
      if (d < best) {
        best = d;
        want = c;
      }
    }
    CHECK(codes[static_cast<size_t>(p)] == want);
  }
}

TEST_CASE("dimension mismatch and tiny samples are rejected") {
  Codebook cb;
  cb.k = 2;
  cb.dim = 3;
  cb.centroids = {0, 0, 0, 1, 1, 1};
  std::vector<double> wrong = {1, 2};
  CHECK_THROWS_AS(quantize_patches(wrong, 1, cb), CodebookError);
  std::vector<double> one_point = {1, 2, 3};
  CHECK_THROWS_AS(fit_codebook(one_point, 1, 3, 2, 0, 5), CodebookError);
}
