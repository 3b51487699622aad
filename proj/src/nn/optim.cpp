#include "gfm/nn/optim.hpp"

#include <cmath>
#include <numbers>

namespace gfm::nn {

template <typename T>
void adamw_step(ParamStore<T>& params, double lr, const AdamWConfig& cfg) {
  for (auto& [name, p] : params.entries()) {
    if (!p.trainable) continue;
    if (!p.has_grad()) throw StateError("adamw_step: no gradient for " + name);
  }
  for (auto& [name, p] : params.entries()) {
    if (!p.trainable) continue;
    if (p.m.shape() != p.value.shape()) {
      p.m = Tensor<T>(p.value.shape());
      p.v = Tensor<T>(p.value.shape());
    }
    ++p.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p.step));
    const double decay = p.decay ? 1.0 - lr * cfg.weight_decay : 1.0;
    T* x = p.value.data();
    const T* g = p.grad.data();
    T* m = p.m.data();
    T* v = p.v.data();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double gi = g[i];
      const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update = (mi / bc1) / (std::sqrt(vi / bc2) + cfg.eps);
      x[i] = static_cast<T>(static_cast<double>(x[i]) * decay - lr * update);
    }
  }
}

void LrSchedule::validate() const {
  if (!(max_lr > 0.0)) throw ConfigError("schedule: max_lr must be positive");
  if (total_steps == 0) throw ConfigError("schedule: total_steps must be positive");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw ConfigError("schedule: warmup_fraction must be in [0, 1)");
  }
  if (!(start_div > 0.0) || !(final_div > 0.0)) throw ConfigError("schedule: divisors must be > 0");
}

double one_cycle_lr(const LrSchedule& s, std::uint64_t step) {
  s.validate();
  const double total = static_cast<double>(s.total_steps);
  const double t = std::min(static_cast<double>(step), total);
  const double warm = s.warmup_fraction * total;
  const double start = s.max_lr / s.start_div;
  const double floor = s.max_lr / s.final_div;
  if (t < warm) return start + (s.max_lr - start) * (t / warm);
  const double span = total - warm;
  const double progress = span > 0.0 ? (t - warm) / span : 1.0;
  return floor + (s.max_lr - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

template void adamw_step<float>(ParamStore<float>&, double, const AdamWConfig&);
template void adamw_step<double>(ParamStore<double>&, double, const AdamWConfig&);

}  // namespace gfm::nn
