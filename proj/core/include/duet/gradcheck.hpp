#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "duet/tensor.hpp"

namespace duet {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  int64_t coords_checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tol = 0.0;
  bool pass = false;
  std::string worst() const;  // name of the worst entry, empty when none
};

// Compares analytic gradients of f() against central finite differences.
// f must rebuild its graph from the given leaf parameters on every call and
// be deterministic; two baseline evaluations that disagree bitwise are an
// error. When max_coords_per_param > 0 only a seeded random subset of each
// parameter's coordinates is probed.
GradCheckReport check_gradients(const std::function<Tensor()>& f,
                                const std::vector<std::pair<std::string, Tensor>>& params,
                                double eps, double tol, int64_t max_coords_per_param = -1,
                                uint64_t coord_seed = 0);

}  // namespace duet
