#include "mlstm/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace mlstm {

GradCheckReport grad_check(const LossClosure& loss, ParamSet& params,
                           const GradCheckOptions& opts) {
  GradCheckReport report;
  const std::size_t total = params.num_scalars();
  if (total == 0) return report;

  params.zero_grad();
  loss(params, true);

  // Flat coordinate -> (param, offset)
  std::vector<std::pair<Param*, std::size_t>> coords;
  coords.reserve(total);
  for (auto& p : params.entries())
    for (std::size_t i = 0; i < p.value.size(); ++i) coords.emplace_back(&p, i);
  if (coords.size() > opts.max_coords) {
    std::mt19937_64 rng(opts.seed);
    std::vector<std::pair<Param*, std::size_t>> picked;
    std::sample(coords.begin(), coords.end(), std::back_inserter(picked), opts.max_coords, rng);
    coords = std::move(picked);
  }

  for (auto [p, i] : coords) {
    const double analytic = p->grad[i];
    const double saved = p->value[i];
    p->value[i] = saved + opts.eps;
    const double up = loss(params, false);
    p->value[i] = saved - opts.eps;
    const double down = loss(params, false);
    p->value[i] = saved;
    const double numeric = (up - down) / (2.0 * opts.eps);
    const double rel =
        std::abs(analytic - numeric) /
        std::max(std::abs(analytic) + std::abs(numeric), opts.denom_floor);
    ++report.coords_checked;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_param = p->name;
      report.worst_index = i;
      report.worst_analytic = analytic;
      report.worst_numeric = numeric;
    }
  }
  return report;
}

}  // namespace mlstm
