#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "teamemb/autograd.hpp"

namespace teamemb {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  std::size_t coordinates_checked = 0;
  bool ok = true;  // false when the loss went non-finite
  std::string failure;
};

struct GradCheckOptions {
  double eps = 1e-3;
  // 0 checks every coordinate; otherwise an evenly strided subset per tensor.
  std::size_t max_coords_per_param = 0;
};

// Compares backward() against central finite differences coordinate by
// coordinate. Relative error is |a - n| / max(|a|, |n|, 1e-6); the floor sits
// above the round-off a central difference cannot resolve.
template <typename T>
GradCheckReport grad_check(const std::function<BasicVar<T>()>& loss_fn,
                           std::span<BasicVar<T>> params, const GradCheckOptions& options = {});

double relative_error(double analytic, double numeric);

}  // namespace teamemb
