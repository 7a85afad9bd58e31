#include <doctest.h>

#include "duet/gradcheck.hpp"
#include "duet/rng.hpp"
#include "duet/tensor.hpp"

using namespace duet;

TEST_CASE("quadratic closure checks out to high precision") {
  Tensor w = Tensor::from_data({1}, {3.0}, true);
  auto f = [&] { return sum(mul(w, w)); };
  auto report = check_gradients(f, {{"w", w}}, 1e-5, 1e-8);
  REQUIRE(report.entries.size() == 1);
  CHECK(report.pass);
  CHECK(report.entries[0].max_rel_err < 1e-8);
  // analytic 6 vs numeric 6
  CHECK(w.grad()[0] == doctest::Approx(6.0).epsilon(1e-10));
}

TEST_CASE("wrong analytic gradient fails and names the parameter") {
  // detach makes the graph see d/dw [w * stop(w)] = stop(w) = w while the
  // numeric view of f(w) = w^2 gives 2w: analytic is off by exactly 2x
  Tensor w = Tensor::from_data({2}, {1.5, -0.75}, true);
  auto f = [&] { return sum(mul(w, detach(w))); };
  auto report = check_gradients(f, {{"w", w}}, 1e-5, 1e-4);
  CHECK_FALSE(report.pass);
  CHECK(report.worst() == "w");
  CHECK(report.entries[0].max_rel_err > 0.4);
}

TEST_CASE("non-deterministic closures are rejected") {
  Tensor w = Tensor::from_data({1}, {1.0}, true);
  int calls = 0;
  auto f = [&] {
    ++calls;
    return sum(scale(w, 1.0 + 0.1 * calls));
  };
  CHECK_THROWS_WITH_AS(check_gradients(f, {{"w", w}}, 1e-5, 1e-4),
                       doctest::Contains("deterministic"), std::runtime_error);
}

TEST_CASE("coordinate sampling bounds work on larger parameters") {
  Rng rng(7);
  std::vector<double> d(64);
  for (double& v : d) v = rng.uniform(-1.0, 1.0);
  Tensor w = Tensor::from_data({8, 8}, std::move(d), true);
  auto f = [&] { return mean(gelu(w)); };
  auto report = check_gradients(f, {{"w", w}}, 1e-5, 1e-4, 10, 42);
  CHECK(report.pass);
  CHECK(report.entries[0].coords_checked == 10);
}
