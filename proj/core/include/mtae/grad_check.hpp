#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mtae/layers.hpp"

namespace mtae {

struct GradCheckResult {
  struct Entry {
    std::string name;
    double max_rel_err = 0.0;
    double max_abs_diff = 0.0;
  };
  std::vector<Entry> entries;
  double max_rel_err = 0.0;
};

// Central finite differences against the analytic backward pass.
//
// loss_and_backward must run a full forward + backward for a fixed input and
// leave gradients accumulated on the listed parameters; loss must rerun the
// same forward (same dropout masks, same data) and return the scalar loss.
// Relative error uses a unit floor: |a - f| / max(1, |a|, |f|).
GradCheckResult grad_check(const std::vector<Param<double>>& params,
                           const std::function<double()>& loss,
                           const std::function<double()>& loss_and_backward,
                           double step = 1e-5);

}  // namespace mtae
