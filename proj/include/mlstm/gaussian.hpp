#pragma once

#include <span>

namespace mlstm {

// |rho| is bounded strictly below one so that 1 - rho^2 stays representable
// even when tanh of the raw correlation rounds to +-1.
inline constexpr double kRhoLimit = 1.0 - 1e-6;

// Bivariate Gaussian over one future position (meters).
struct GaussianStep {
  double mux = 0.0;
  double muy = 0.0;
  double sx = 1.0;
  double sy = 1.0;
  double rho = 0.0;
};

// Head mapping from the 5 raw outputs: means pass through, sigma = exp(raw),
// rho = kRhoLimit * tanh(raw). `scale` converts model units to meters.
GaussianStep gaussian_from_raw(std::span<const double> raw, double scale = 1.0);
// Separate scales for the lateral (x) and longitudinal (y) axes.
GaussianStep gaussian_from_raw(std::span<const double> raw, double scale_x, double scale_y);

bool is_valid(const GaussianStep& g);

// -log N2((x, y); mu, Sigma)
double gaussian_nll(const GaussianStep& g, double x, double y);
double gaussian_density(const GaussianStep& g, double x, double y);

}  // namespace mlstm
