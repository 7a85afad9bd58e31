#include <doctest.h>

#include <cmath>

#include "duet/tensor.hpp"

using namespace duet;

TEST_CASE("softmax of equal logits is uniform") {
  Tensor x = Tensor::from_data({2}, {0.0, 0.0});
  Tensor y = softmax(x, 0);
  CHECK(y.data()[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(y.data()[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("softmax rows are nonnegative and sum to 1") {
  Tensor x = Tensor::from_data({2, 3}, {1.0, -2.0, 0.5, 3.0, 3.0, -10.0});
  Tensor y = softmax(x, 1);
  for (int r = 0; r < 2; ++r) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c) {
      double v = y.data()[static_cast<size_t>(r * 3 + c)];
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("layer_norm matches the closed form for mean 2 var 1") {
  Tensor x = Tensor::from_data({2}, {1.0, 3.0});
  Tensor y = layer_norm(x, 1e-5);
  CHECK(y.data()[0] == doctest::Approx(-1.0).epsilon(1e-4));
  CHECK(y.data()[1] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("gelu at zero and matmul identity") {
  Tensor z = Tensor::from_data({1}, {0.0});
  CHECK(gelu(z).data()[0] == 0.0);

  Tensor eye = Tensor::from_data({2, 2}, {1.0, 0.0, 0.0, 1.0});
  Tensor x = Tensor::from_data({2, 2}, {3.0, -1.0, 2.0, 7.5});
  Tensor y = matmul(eye, x);
  CHECK(y.data() == x.data());
}

TEST_CASE("matmul shape mismatch reports both operands") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4, 5});
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2,3]"), ShapeError);
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[4,5]"), ShapeError);
}

TEST_CASE("batched matmul broadcasts a rank-2 rhs") {
  Tensor a = Tensor::from_data({2, 2, 3}, {1, 0, 0, 0, 1, 0, 2, 0, 0, 0, 0, 2});
  Tensor b = Tensor::from_data({3, 2}, {1, 2, 3, 4, 5, 6});
  Tensor c = matmul(a, b);
  CHECK(c.shape() == Shape{2, 2, 2});
  CHECK(c.data() == std::vector<double>{1, 2, 3, 4, 2, 4, 10, 12});
}

TEST_CASE("nan barrier rejects non-finite results") {
  set_nan_barrier(true);
  Tensor big = Tensor::from_data({1}, {1e308});
  CHECK_THROWS_AS(mul(big, big), NumericError);
  set_nan_barrier(false);
  Tensor inf = mul(big, big);
  CHECK(std::isinf(inf.data()[0]));
  set_nan_barrier(true);
}

TEST_CASE("repeated reads of one graph node are identical") {
  Tensor x = Tensor::from_data({3}, {0.1, 0.2, 0.3});
  Tensor y = softmax(x, 0);
  auto first = y.data();
  auto second = y.data();
  CHECK(first == second);
}

TEST_CASE("two evaluations of the same expression agree bitwise") {
  Tensor x = Tensor::from_data({2, 2}, {0.3, -1.2, 0.9, 2.0});
  Tensor w = Tensor::from_data({2, 2}, {1.5, 0.25, -0.5, 0.75});
  Tensor a = gelu(matmul(x, w));
  Tensor b = gelu(matmul(x, w));
  CHECK(a.data() == b.data());
}

TEST_CASE("concat and slice round-trip") {
  Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from_data({2, 3}, {5, 6, 7, 8, 9, 10});
  Tensor c = concat({a, b}, 1);
  CHECK(c.shape() == Shape{2, 5});
  Tensor back = slice(c, 1, 2, 3);
  CHECK(back.data() == b.data());
  CHECK_THROWS_AS(slice(c, 1, 4, 3), ShapeError);
}

TEST_CASE("transpose swaps axes") {
  Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor t = transpose(a, 0, 1);
  CHECK(t.shape() == Shape{3, 2});
  CHECK(t.data() == std::vector<double>{1, 4, 2, 5, 3, 6});
}

TEST_CASE("mask_fill keeps where mask is nonzero") {
  Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor keep = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor y = mask_fill(a, keep, -9.0);
  CHECK(y.data() == std::vector<double>{1, -9, -9, 4});
}

TEST_CASE("cross_entropy ignores -1 targets and handles empty") {
  Tensor logits = Tensor::from_data({2, 3}, {0, 0, 0, 10, 0, 0});
  Tensor l1 = cross_entropy(logits, {0, -1});
  CHECK(l1.value() == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  Tensor l0 = cross_entropy(logits, {-1, -1});
  CHECK(l0.value() == 0.0);
}

TEST_CASE("embedding lookup rejects out-of-range ids") {
  Tensor table = Tensor::zeros({4, 2});
  CHECK_THROWS_AS(embedding_lookup(table, {5}, {1}), TensorError);
  CHECK_THROWS_AS(embedding_lookup(table, {-1}, {1}), TensorError);
}

TEST_CASE("broadcast add reduces gradients to the bias shape") {
  Tensor x = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  Tensor b = Tensor::from_data({3}, {10, 20, 30}, true);
  Tensor y = add(x, b);
  CHECK(y.data() == std::vector<double>{11, 22, 33, 14, 25, 36});
  backward(sum(y));
  CHECK(b.grad() == std::vector<double>{2, 2, 2});
  CHECK(x.grad() == std::vector<double>{1, 1, 1, 1, 1, 1});
}
