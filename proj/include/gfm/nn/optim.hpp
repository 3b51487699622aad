#pragma once

#include <cstdint>

#include "gfm/nn/param_store.hpp"

namespace gfm::nn {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

// Decoupled weight decay on decay-flagged parameters, then a bias-corrected
// Adam update. Non-trainable parameters are left untouched.
template <typename T>
void adamw_step(ParamStore<T>& params, double lr, const AdamWConfig& cfg = {});

struct LrSchedule {
  double max_lr = 5e-4;
  std::uint64_t total_steps = 1;
  double warmup_fraction = 0.1;
  double start_div = 25.0;
  double final_div = 1e4;

  void validate() const;
};

// Linear warmup from max/start_div to max, cosine decay to max/final_div.
double one_cycle_lr(const LrSchedule& s, std::uint64_t step);

}  // namespace gfm::nn
