#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "mlstm/params.hpp"

namespace mlstm {

// Evaluates a scalar loss at the current parameter values. When
// `accumulate_grads` is true the closure must also run backward so that
// every Param::grad holds d(loss)/d(param).
using LossClosure = std::function<double(ParamSet&, bool accumulate_grads)>;

struct GradCheckOptions {
  double eps = 1e-5;
  std::size_t max_coords = 500;
  std::uint64_t seed = 0;
  // Lower bound on the relative-error denominator. Central differences on
  // an O(10) loss carry ~1e-10 of rounding noise at eps = 1e-5, which would
  // otherwise dominate the ratio for gradients below ~1e-6.
  double denom_floor = 1e-5;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Central differences on a seeded random subset of at most max_coords
// coordinates. Relative error is |a - n| / max(|a| + |n|, denom_floor). Parameter
// values are restored on return.
GradCheckReport grad_check(const LossClosure& loss, ParamSet& params,
                           const GradCheckOptions& opts = {});

}  // namespace mlstm
