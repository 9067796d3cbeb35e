#include "teamemb/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace teamemb {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

template <typename T>
GradCheckReport grad_check(const std::function<BasicVar<T>()>& loss_fn,
                           std::span<BasicVar<T>> params, const GradCheckOptions& options) {
  if (options.eps < 1e-4 || options.eps > 1e-2) {
    throw std::invalid_argument("grad_check: eps must lie in [1e-4, 1e-2]");
  }
  GradCheckReport report;

  for (auto& p : params) p.zero_grad();
  BasicVar<T> loss = loss_fn();
  if (!std::isfinite(static_cast<double>(loss.value()[0]))) {
    report.ok = false;
    report.failure = "loss is non-finite at the unperturbed point";
    return report;
  }
  loss.backward();
  std::vector<std::vector<T>> analytic;
  for (auto& p : params) analytic.emplace_back(p.grad().begin(), p.grad().end());

  const T eps = static_cast<T>(options.eps);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto values = params[pi].mutable_value().data();
    const std::size_t n = values.size();
    std::size_t stride = 1;
    if (options.max_coords_per_param > 0 && n > options.max_coords_per_param) {
      stride = (n + options.max_coords_per_param - 1) / options.max_coords_per_param;
    }
    for (std::size_t k = 0; k < n; k += stride) {
      const T saved = values[k];
      values[k] = saved + eps;
      const double plus = static_cast<double>(loss_fn().value()[0]);
      values[k] = saved - eps;
      const double minus = static_cast<double>(loss_fn().value()[0]);
      values[k] = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        report.ok = false;
        report.worst_param = pi;
        report.worst_index = k;
        report.failure = "non-finite loss when perturbing parameter " + std::to_string(pi) +
                         " coordinate " + std::to_string(k);
        return report;
      }
      const double numeric = (plus - minus) / (2.0 * static_cast<double>(eps));
      const double err = relative_error(static_cast<double>(analytic[pi][k]), numeric);
      ++report.coordinates_checked;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_param = pi;
        report.worst_index = k;
      }
    }
  }
  return report;
}

template GradCheckReport grad_check<float>(const std::function<BasicVar<float>()>&,
                                           std::span<BasicVar<float>>, const GradCheckOptions&);
template GradCheckReport grad_check<double>(const std::function<BasicVar<double>()>&,
                                            std::span<BasicVar<double>>, const GradCheckOptions&);

}  // namespace teamemb
