#include "duet/params.hpp"

#include <stdexcept>

namespace duet {

const char* to_string(ParamGroup g) { return g == ParamGroup::Bottom ? "bottom" : "top"; }

Tensor ParamStore::add(const std::string& name, ParamGroup g, Shape shape,
                       std::vector<double> data) {
  if (index_.count(name))
    throw std::invalid_argument("param store: duplicate parameter name '" + name + "'");
  Tensor t = Tensor::from_data(std::move(shape), std::move(data), /*requires_grad=*/true);
  index_[name] = params_.size();
  params_.push_back(Parameter{name, g, t});
  return t;
}

Tensor ParamStore::add_normal(const std::string& name, ParamGroup g, Shape shape, double stddev) {
  std::vector<double> d(static_cast<size_t>(shape_numel(shape)));
  for (double& x : d) x = stddev * rng_.normal();
  return add(name, g, std::move(shape), std::move(d));
}

Tensor ParamStore::add_zeros(const std::string& name, ParamGroup g, Shape shape) {
  std::vector<double> d(static_cast<size_t>(shape_numel(shape)), 0.0);
  return add(name, g, std::move(shape), std::move(d));
}

Tensor ParamStore::add_ones(const std::string& name, ParamGroup g, Shape shape) {
  std::vector<double> d(static_cast<size_t>(shape_numel(shape)), 1.0);
  return add(name, g, std::move(shape), std::move(d));
}

void ParamStore::replace(const std::string& name, Tensor t) {
  auto it = index_.find(name);
  if (it == index_.end())
    throw std::out_of_range("param store: no parameter named '" + name + "'");
  t.set_requires_grad(true);
  params_[it->second].tensor = std::move(t);
}

bool ParamStore::contains(std::string_view name) const {
  return index_.count(std::string(name)) > 0;
}

const Parameter& ParamStore::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end())
    throw std::out_of_range("param store: no parameter named '" + std::string(name) + "'");
  return params_[it->second];
}

std::vector<Parameter> ParamStore::group(ParamGroup g) const {
  std::vector<Parameter> out;
  for (const Parameter& p : params_)
    if (p.group == g) out.push_back(p);
  return out;
}

int64_t ParamStore::total_params() const {
  int64_t n = 0;
  for (const Parameter& p : params_) n += p.tensor.numel();
  return n;
}

void ParamStore::zero_all_grads() {
  for (const Parameter& p : params_) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
}

}  // namespace duet
