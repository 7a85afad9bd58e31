#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "duet/gradcheck.hpp"
#include "duet/rng.hpp"
#include "duet/tensor.hpp"

using namespace duet;

TEST_CASE("backward of sum gives ones") {
  Tensor x = Tensor::from_data({3}, {5.0, -1.0, 2.0}, true);
  backward(sum(x));
  CHECK(x.grad() == std::vector<double>{1, 1, 1});
}

TEST_CASE("backward of elementwise product swaps operands") {
  Tensor x = Tensor::from_data({3}, {1.0, 2.0, 3.0}, true);
  Tensor y = Tensor::from_data({3}, {4.0, 5.0, 6.0}, true);
  backward(sum(mul(x, y)));
  CHECK(x.grad() == y.data());
  CHECK(y.grad() == x.data());
}

TEST_CASE("gradients accumulate until cleared") {
  Tensor x = Tensor::from_data({2}, {1.0, 1.0}, true);
  backward(sum(x));
  backward(sum(x));
  CHECK(x.grad() == std::vector<double>{2, 2});
  x.zero_grad();
  CHECK(x.grad() == std::vector<double>{0, 0});
  backward(sum(x));
  CHECK(x.grad() == std::vector<double>{1, 1});
}

TEST_CASE("non-scalar loss is rejected") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
  CHECK_THROWS_AS(backward(x), TensorError);
}

TEST_CASE("unreached tensors keep their gradients untouched") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
  Tensor unrelated = Tensor::from_data({2}, {3.0, 4.0}, true);
  backward(sum(x));
  CHECK(x.has_grad());
  CHECK_FALSE(unrelated.has_grad());
}

namespace {

// per-primitive finite-difference property: randomized shapes, >= 20 seeded
// trials each, analytic vs central differences within 1e-4 relative
void fd_property(const char* name,
                 const std::function<Tensor(const Tensor&, Rng&)>& build_one_input,
                 int trials = 20) {
  CAPTURE(name);
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng(Rng::mix(0xFD15EED, static_cast<uint64_t>(trial)));
    int64_t rows = 1 + static_cast<int64_t>(rng.below(4));
    int64_t cols = 1 + static_cast<int64_t>(rng.below(5));
    std::vector<double> d(static_cast<size_t>(rows * cols));
    for (double& v : d) v = rng.uniform(-2.0, 2.0);
    Tensor x = Tensor::from_data({rows, cols}, std::move(d), true);
    Rng op_rng(Rng::mix(0xDEC0DE, static_cast<uint64_t>(trial)));
    auto f = [&] { return build_one_input(x, op_rng); };
    // op_rng is consumed once while building; rebuild closures must see the
    // same stream, so rewind by reconstructing per evaluation
    auto f_fixed = [&, trial] {
      Rng local(Rng::mix(0xDEC0DE, static_cast<uint64_t>(trial)));
      return build_one_input(x, local);
    };
    (void)f;
    auto report = check_gradients(f_fixed, {{"x", x}}, 1e-5, 1e-4);
    CHECK_MESSAGE(report.pass, name << " trial " << trial << " max err "
                                    << report.entries[0].max_rel_err);
  }
}

}  // namespace

TEST_CASE("finite differences: every primitive") {
  fd_property("add+scale", [](const Tensor& x, Rng& r) {
    Tensor y = Tensor::from_data(x.shape(), [&] {
      std::vector<double> d(static_cast<size_t>(x.numel()));
      for (double& v : d) v = r.uniform(-1.0, 1.0);
      return d;
    }());
    return sum(add(scale(x, 1.7), y));
  });

  fd_property("mul", [](const Tensor& x, Rng& r) {
    std::vector<double> d(static_cast<size_t>(x.numel()));
    for (double& v : d) v = r.uniform(-1.0, 1.0);
    Tensor y = Tensor::from_data(x.shape(), std::move(d));
    return sum(mul(x, y));
  });

  fd_property("matmul", [](const Tensor& x, Rng& r) {
    int64_t cols = x.dim(1);
    std::vector<double> d(static_cast<size_t>(cols * 3));
    for (double& v : d) v = r.uniform(-1.0, 1.0);
    Tensor w = Tensor::from_data({cols, 3}, std::move(d));
    return sum(matmul(x, w));
  });

  fd_property("transpose", [](const Tensor& x, Rng&) {
    return sum(gelu(transpose(x, 0, 1)));
  });

  fd_property("reshape", [](const Tensor& x, Rng&) {
    return sum(gelu(reshape(x, {x.numel()})));
  });

  fd_property("concat+slice", [](const Tensor& x, Rng&) {
    Tensor c = concat({x, x}, 0);
    return sum(gelu(slice(c, 0, x.dim(0) / 2, x.dim(0))));
  });

  fd_property("softmax", [](const Tensor& x, Rng&) {
    Tensor w = Tensor::from_data({x.dim(1), 1},
                                 std::vector<double>(static_cast<size_t>(x.dim(1)), 0.3));
    return sum(matmul(softmax(x, 1), w));
  });

  fd_property("layer_norm", [](const Tensor& x, Rng& r) {
    std::vector<double> d(static_cast<size_t>(x.numel()));
    for (double& v : d) v = r.uniform(-1.0, 1.0);
    return sum(mul(layer_norm(x, 1e-5), Tensor::from_data(x.shape(), std::move(d))));
  });

  fd_property("gelu", [](const Tensor& x, Rng&) { return sum(gelu(x)); });

  fd_property("mean", [](const Tensor& x, Rng&) { return mean(gelu(x)); });

  fd_property("mask_fill", [](const Tensor& x, Rng& r) {
    std::vector<double> m(static_cast<size_t>(x.numel()));
    for (double& v : m) v = r.bernoulli(0.5) ? 1.0 : 0.0;
    Tensor keep = Tensor::from_data(x.shape(), std::move(m));
    return sum(gelu(mask_fill(x, keep, -3.0)));
  });

  fd_property("cross_entropy", [](const Tensor& x, Rng& r) {
    std::vector<int64_t> targets(static_cast<size_t>(x.dim(0)));
    for (auto& t : targets)
      t = r.bernoulli(0.75) ? static_cast<int64_t>(r.below(static_cast<uint64_t>(x.dim(1)))) : -1;
    return cross_entropy(x, targets);
  });
}

TEST_CASE("finite differences: embedding lookup") {
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(Rng::mix(0xE0B, static_cast<uint64_t>(trial)));
    int64_t v = 3 + static_cast<int64_t>(rng.below(4));
    int64_t d = 2 + static_cast<int64_t>(rng.below(3));
    std::vector<double> td(static_cast<size_t>(v * d));
    for (double& x : td) x = rng.uniform(-1.0, 1.0);
    Tensor table = Tensor::from_data({v, d}, std::move(td), true);
    std::vector<int64_t> ids(5);
    for (auto& id : ids) id = static_cast<int64_t>(rng.below(static_cast<uint64_t>(v)));
    auto f = [&] { return sum(gelu(embedding_lookup(table, ids, {5}))); };
    auto report = check_gradients(f, {{"table", table}}, 1e-5, 1e-4);
    CHECK_MESSAGE(report.pass, "embedding trial " << trial);
  }
}

TEST_CASE("detach blocks gradient flow") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
  Tensor d = detach(x);
  CHECK_FALSE(d.requires_grad());
  backward(sum(mul(d, d)));
  CHECK_FALSE(x.has_grad());
}
