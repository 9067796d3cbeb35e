#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "teamemb/autograd.hpp"

namespace teamemb {

// First/second moment estimates for every parameter, in parameter order.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<std::vector<float>> first_moment;
  std::vector<std::vector<float>> second_moment;
};

// One bias-corrected Adam update. Moment buffers are created on the first
// call; a parameter without a gradient buffer is rejected.
void adam_step(std::span<Var> params, AdamState& state, double lr_now);

struct TrainSchedule {
  double base_lr = 1e-3;
  int epoch = 0;
  int total_epochs = 200;
  double power = 0.9;
};

// "poly" decay applied per epoch: base_lr * (1 - epoch / total_epochs)^power.
double poly_lr(const TrainSchedule& sched);

}  // namespace teamemb
