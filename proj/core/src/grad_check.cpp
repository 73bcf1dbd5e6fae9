#include "mtae/grad_check.hpp"

#include <cmath>

namespace mtae {

GradCheckResult grad_check(const std::vector<Param<double>>& params,
                           const std::function<double()>& loss,
                           const std::function<double()>& loss_and_backward,
                           double step) {
  for (const auto& p : params) {
    p.tensor->ensure_grad();
    p.tensor->zero_grad();
  }
  loss_and_backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p.tensor->grad());

  GradCheckResult result;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor<double>& t = *params[pi].tensor;
    GradCheckResult::Entry entry;
    entry.name = params[pi].name;
    for (i64 i = 0; i < t.numel(); ++i) {
      double saved = t.at(i);
      t.at(i) = saved + step;
      double up = loss();
      t.at(i) = saved - step;
      double down = loss();
      t.at(i) = saved;
      double fd = (up - down) / (2.0 * step);
      double a = analytic[pi][static_cast<size_t>(i)];
      double abs_diff = std::fabs(a - fd);
      double rel =
          abs_diff / std::max({1.0, std::fabs(a), std::fabs(fd)});
      entry.max_abs_diff = std::max(entry.max_abs_diff, abs_diff);
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    result.max_rel_err = std::max(result.max_rel_err, entry.max_rel_err);
    result.entries.push_back(std::move(entry));
  }
  return result;
}

}  // namespace mtae
