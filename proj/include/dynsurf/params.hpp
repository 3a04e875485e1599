// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "dynsurf/errors.hpp"
#include "dynsurf/tensor.hpp"

namespace dynsurf {

// Named parameter registry with a stable iteration order. The order in which
// parameters are registered fixes the order of optimizer updates and of
// serialized arrays, which keeps whole-run trajectories reproducible.
template <class Real>
class Parameters {
 public:
  void add(const std::string& name, Tensor<Real> value) {
    if (index_.count(name)) throw ContractError("duplicate parameter: " + name);
    index_[name] = names_.size();
    names_.push_back(name);
    values_.push_back(std::move(value));
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  const Tensor<Real>& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter: " + name);
    return values_[it->second];
  }

  Tensor<Real>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter: " + name);
    return values_[it->second];
  }

  const std::vector<std::string>& names() const { return names_; }
  std::size_t count() const { return names_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<Tensor<Real>> values_;
};

// Gradients share the container shape: one tensor per parameter name.
template <class Real>
using Gradients = Parameters<Real>;

}  // namespace dynsurf
