#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "duet/rng.hpp"
#include "duet/tensor.hpp"

namespace duet {

// bottom = encoder parameters standing in for pre-trained weights,
// top = fusion/head parameters standing in for randomly initialized ones
enum class ParamGroup { Bottom, Top };

const char* to_string(ParamGroup g);

struct Parameter {
  std::string name;  // dot path, e.g. "fusion.layer0.cross_attn.wq"
  ParamGroup group;
  Tensor tensor;
};

// Registry of named trainable tensors. Registration order is the canonical
// order for initialization draws, optimizer slots, and checkpoints.
class ParamStore {
 public:
  explicit ParamStore(uint64_t init_seed) : rng_(init_seed) {}

  Tensor add_normal(const std::string& name, ParamGroup g, Shape shape, double stddev = 0.02);
  Tensor add_zeros(const std::string& name, ParamGroup g, Shape shape);
  Tensor add_ones(const std::string& name, ParamGroup g, Shape shape);

  // swap the tensor behind an existing name (used when a positional table
  // changes shape at a resolution switch); optimizer state does not follow
  void replace(const std::string& name, Tensor t);

  const std::vector<Parameter>& all() const { return params_; }
  bool contains(std::string_view name) const;
  const Parameter& find(std::string_view name) const;  // throws if absent
  Tensor tensor(std::string_view name) const { return find(name).tensor; }

  std::vector<Parameter> group(ParamGroup g) const;
  int64_t total_params() const;
  void zero_all_grads();

 private:
  Tensor add(const std::string& name, ParamGroup g, Shape shape, std::vector<double> data);

  Rng rng_;
  std::vector<Parameter> params_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace duet
