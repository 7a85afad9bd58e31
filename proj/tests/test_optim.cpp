#include <doctest.h>

#include <cmath>

#include "duet/optim.hpp"
#include "duet/params.hpp"

using namespace duet;

namespace {
Parameter make_param(const char* name, double w) {
  Tensor t = Tensor::from_data({1}, {w}, true);
  return Parameter{name, ParamGroup::Top, t};
}
}  // namespace

TEST_CASE("adamw first step with unit gradient") {
  // bias-corrected m_hat = 1, v_hat = 1 -> w ~ 1 - 0.1
  Parameter p = make_param("w", 1.0);
  p.tensor.mutable_grad() = {1.0};
  AdamW opt({p}, {0.9, 0.999, 1e-8, 0.0});
  opt.step(0.1);
  CHECK(p.tensor.data()[0] == doctest::Approx(0.9).epsilon(1e-7));
  CHECK(opt.step_count() == 1);
}

TEST_CASE("adamw decoupled decay with zero gradient") {
  Parameter p = make_param("w", 1.0);
  p.tensor.mutable_grad() = {0.0};
  AdamW opt({p}, {0.9, 0.999, 1e-8, 0.01});
  opt.step(0.1);
  CHECK(p.tensor.data()[0] == doctest::Approx(0.999).epsilon(1e-12));
}

TEST_CASE("adamw lr=0 leaves params but advances moments") {
  Parameter p = make_param("w", 2.0);
  p.tensor.mutable_grad() = {3.0};
  AdamW opt({p});
  opt.step(0.0);
  CHECK(p.tensor.data()[0] == 2.0);
  CHECK(opt.step_count() == 1);
  // second step with lr>0 must use already-warmed moments: after two steps
  // of constant gradient, m_hat = g exactly
  p.tensor.mutable_grad() = {3.0};
  opt.step(0.1);
  CHECK(p.tensor.data()[0] < 2.0);
}

TEST_CASE("adamw with lr=0 and wd=0 is the identity on parameters") {
  Parameter p = make_param("w", -4.2);
  p.tensor.mutable_grad() = {0.7};
  AdamW opt({p}, {0.9, 0.999, 1e-8, 0.0});
  for (int i = 0; i < 5; ++i) opt.step(0.0);
  CHECK(p.tensor.data()[0] == -4.2);
}

TEST_CASE("adamw requires populated gradients") {
  Parameter p = make_param("w", 1.0);
  AdamW opt({p});
  CHECK_THROWS_WITH_AS(opt.step(0.1), doctest::Contains("'w'"), std::runtime_error);
}

TEST_CASE("schedule ramps to peak then decays to zero") {
  CHECK(schedule_lr(0, 100000, 5e-5, 0.1) == 0.0);
  CHECK(schedule_lr(10000, 100000, 5e-5, 0.1) == doctest::Approx(5e-5).epsilon(1e-15));
  CHECK(schedule_lr(55000, 100000, 5e-5, 0.1) == doctest::Approx(2.5e-5).epsilon(1e-12));
  CHECK(schedule_lr(100000, 100000, 5e-5, 0.1) == 0.0);
  CHECK_THROWS_AS(schedule_lr(100001, 100000, 5e-5, 0.1), std::invalid_argument);
}

TEST_CASE("schedule is continuous piecewise-linear with max exactly at warmup") {
  const int64_t total = 1000;
  const double peak = 3e-4, ratio = 0.1;
  double prev = schedule_lr(0, total, peak, ratio);
  double max_seen = prev;
  int64_t argmax = 0;
  for (int64_t s = 1; s <= total; ++s) {
    double cur = schedule_lr(s, total, peak, ratio);
    CHECK(std::abs(cur - prev) <= peak / (ratio * total) + 1e-15);  // bounded slope
    if (cur > max_seen) {
      max_seen = cur;
      argmax = s;
    }
    prev = cur;
  }
  CHECK(argmax == 100);
  CHECK(max_seen == peak);
}
