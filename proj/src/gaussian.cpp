#include "mlstm/gaussian.hpp"

#include <cmath>
#include <numbers>

#include "mlstm/error.hpp"

namespace mlstm {

GaussianStep gaussian_from_raw(std::span<const double> raw, double scale) {
  return gaussian_from_raw(raw, scale, scale);
}

GaussianStep gaussian_from_raw(std::span<const double> raw, double scale_x, double scale_y) {
  if (raw.size() != 5) throw DimensionError("gaussian head expects 5 raw values");
  return GaussianStep{scale_x * raw[0], scale_y * raw[1], scale_x * std::exp(raw[2]),
                      scale_y * std::exp(raw[3]), kRhoLimit * std::tanh(raw[4])};
}

bool is_valid(const GaussianStep& g) {
  return std::isfinite(g.mux) && std::isfinite(g.muy) && std::isfinite(g.sx) &&
         std::isfinite(g.sy) && std::isfinite(g.rho) && g.sx > 0.0 && g.sy > 0.0 &&
         std::abs(g.rho) < 1.0;
}

double gaussian_nll(const GaussianStep& g, double x, double y) {
  const double dx = (x - g.mux) / g.sx;
  const double dy = (y - g.muy) / g.sy;
  const double q = 1.0 - g.rho * g.rho;
  const double z = dx * dx + dy * dy - 2.0 * g.rho * dx * dy;
  return std::log(2.0 * std::numbers::pi) + std::log(g.sx) + std::log(g.sy) +
         0.5 * std::log(q) + z / (2.0 * q);
}

double gaussian_density(const GaussianStep& g, double x, double y) {
  return std::exp(-gaussian_nll(g, x, y));
}

}  // namespace mlstm
