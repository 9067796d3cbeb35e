#include "teamemb/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace teamemb {

void adam_step(std::span<Var> params, AdamState& state, double lr_now) {
  if (!(lr_now > 0.0)) throw std::invalid_argument("adam_step: learning rate must be > 0");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].value().has_grad()) {
      throw std::invalid_argument("adam_step: parameter " + std::to_string(i) + " has no gradient");
    }
  }
  if (state.first_moment.empty()) {
    for (const Var& p : params) {
      state.first_moment.emplace_back(p.value().size(), 0.0f);
      state.second_moment.emplace_back(p.value().size(), 0.0f);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw DimensionError("adam_step: optimizer state tracks " +
                         std::to_string(state.first_moment.size()) + " parameters, got " +
                         std::to_string(params.size()));
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  const double b1 = state.beta1;
  const double b2 = state.beta2;

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = params[i].mutable_value().data();
    auto grad = params[i].grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    if (m.size() != theta.size()) throw DimensionError("adam_step: moment buffer size mismatch");
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double g = grad[k];
      const double m_new = b1 * m[k] + (1.0 - b1) * g;
      const double v_new = b2 * v[k] + (1.0 - b2) * g * g;
      m[k] = static_cast<float>(m_new);
      v[k] = static_cast<float>(v_new);
      const double m_hat = m_new / correction1;
      const double v_hat = v_new / correction2;
      theta[k] -= static_cast<float>(lr_now * m_hat / (std::sqrt(v_hat) + state.epsilon));
    }
  }
}

double poly_lr(const TrainSchedule& sched) {
  if (sched.total_epochs <= 0) throw std::invalid_argument("poly_lr: total epochs must be > 0");
  if (sched.epoch < 0 || sched.epoch > sched.total_epochs) {
    throw std::invalid_argument("poly_lr: epoch " + std::to_string(sched.epoch) +
                                " outside [0, " + std::to_string(sched.total_epochs) + "]");
  }
  if (!(sched.base_lr > 0.0) || !(sched.power > 0.0)) {
    throw std::invalid_argument("poly_lr: base lr and power must be > 0");
  }
  const double frac = 1.0 - static_cast<double>(sched.epoch) / sched.total_epochs;
  return sched.base_lr * std::pow(frac, sched.power);
}

}  // namespace teamemb
