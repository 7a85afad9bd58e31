#include "duet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "duet/rng.hpp"

namespace duet {

std::string GradCheckReport::worst() const {
  const GradCheckEntry* w = nullptr;
  for (const auto& e : entries)
    if (!w || e.max_rel_err > w->max_rel_err) w = &e;
  return w ? w->name : std::string();
}

GradCheckReport check_gradients(const std::function<Tensor()>& f,
                                const std::vector<std::pair<std::string, Tensor>>& params,
                                double eps, double tol, int64_t max_coords_per_param,
                                uint64_t coord_seed) {
  if (eps <= 0.0) throw std::invalid_argument("check_gradients: eps must be positive");

  Tensor base = f();
  if (base.numel() != 1)
    throw std::invalid_argument("check_gradients: closure must produce a scalar loss");
  Tensor again = f();
  if (base.data() != again.data())
    throw std::runtime_error(
        "check_gradients: closure is not deterministic (two evaluations differ)");

  for (auto& [name, t] : params) {
    Tensor tt = t;
    tt.zero_grad();
  }
  backward(again);

  GradCheckReport report;
  report.tol = tol;
  report.pass = true;
  Rng rng(Rng::mix(coord_seed, 0x6772616463686bull));

  for (const auto& [name, param] : params) {
    Tensor t = param;
    std::vector<double> analytic =
        t.has_grad() ? t.grad() : std::vector<double>(static_cast<size_t>(t.numel()), 0.0);

    std::vector<int64_t> coords;
    if (max_coords_per_param > 0 && t.numel() > max_coords_per_param) {
      coords = rng.choose(t.numel(), max_coords_per_param);
    } else {
      coords.resize(static_cast<size_t>(t.numel()));
      for (int64_t i = 0; i < t.numel(); ++i) coords[static_cast<size_t>(i)] = i;
    }

    GradCheckEntry entry;
    entry.name = name;
    entry.coords_checked = static_cast<int64_t>(coords.size());
    for (int64_t c : coords) {
      double* slot = &t.mutable_data()[static_cast<size_t>(c)];
      double saved = *slot;
      *slot = saved + eps;
      double up = f().value();
      *slot = saved - eps;
      double down = f().value();
      *slot = saved;
      double numeric = (up - down) / (2.0 * eps);
      double a = analytic[static_cast<size_t>(c)];
      double denom = std::max({std::abs(a), std::abs(numeric), 1e-4});
      entry.max_rel_err = std::max(entry.max_rel_err, std::abs(a - numeric) / denom);
    }
    if (entry.max_rel_err > tol) report.pass = false;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace duet
