#include "gfm/nn/param_store.hpp"

#include <cmath>

namespace gfm::nn {

template <typename T>
Param<T>& ParamStore<T>::add(const std::string& name, Shape shape, bool decay) {
  if (params_.count(name)) throw ArgumentError("duplicate parameter name: " + name);
  Param<T> p;
  p.name = name;
  p.value = Tensor<T>(std::move(shape));
  p.decay = decay;
  return params_.emplace(name, std::move(p)).first->second;
}

template <typename T>
Param<T>& ParamStore<T>::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ArgumentError("unknown parameter: " + name);
  return it->second;
}

template <typename T>
const Param<T>& ParamStore<T>::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ArgumentError("unknown parameter: " + name);
  return it->second;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& [name, p] : params_) {
    if (p.grad.shape() != p.value.shape()) {
      p.grad = Tensor<T>(p.value.shape());
    } else {
      p.grad.zero();
    }
  }
}

template <typename T>
void ParamStore<T>::set_trainable(const std::function<bool(const std::string&)>& predicate) {
  for (auto& [name, p] : params_) p.trainable = predicate(name);
}

template <typename T>
std::size_t ParamStore<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += p.value.size();
  return n;
}

template <typename T>
void init_trunc_normal(Tensor<T>& t, Rng& rng, double stddev) {
  for (auto& v : t.values()) v = static_cast<T>(rng.truncated_normal(stddev, 2.0 * stddev));
}

template class ParamStore<float>;
template class ParamStore<double>;
template void init_trunc_normal<float>(Tensor<float>&, Rng&, double);
template void init_trunc_normal<double>(Tensor<double>&, Rng&, double);

}  // namespace gfm::nn
