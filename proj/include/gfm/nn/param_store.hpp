#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "gfm/common/rng.hpp"
#include "gfm/nn/tensor.hpp"

namespace gfm::nn {

template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;  // empty until zero_grad()
  Tensor<T> m;     // AdamW first moment, allocated on first step
  Tensor<T> v;     // AdamW second moment
  std::uint64_t step = 0;
  bool decay = true;      // receives decoupled weight decay
  bool trainable = true;  // updated by the optimizer

  bool has_grad() const { return grad.size() == value.size() && !value.empty(); }
};

/// Named parameters with their gradient and optimizer state. Entries live in
/// a std::map, so references handed out by add()/get() stay valid for the
/// store's lifetime (including across moves of the store).
template <typename T>
class ParamStore {
 public:
  Param<T>& add(const std::string& name, Shape shape, bool decay = true);
  Param<T>& get(const std::string& name);
  const Param<T>& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  std::map<std::string, Param<T>>& entries() { return params_; }
  const std::map<std::string, Param<T>>& entries() const { return params_; }

  void zero_grad();
  void set_trainable(const std::function<bool(const std::string&)>& predicate);
  std::size_t parameter_count() const;

 private:
  std::map<std::string, Param<T>> params_;
};

// ViT-style init: truncated normal (sigma 0.02, cut at 2 sigma) for weights.
template <typename T>
void init_trunc_normal(Tensor<T>& t, Rng& rng, double stddev = 0.02);

}  // namespace gfm::nn
