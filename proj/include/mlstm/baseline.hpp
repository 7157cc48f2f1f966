#pragma once

#include <array>
#include <span>

#include "mlstm/tensor.hpp"

namespace mlstm {

// Constant-velocity Kalman filter over state (x, y, vx, vy).
struct KalmanState {
  std::array<double, 4> mean{};
  std::array<std::array<double, 4>, 4> cov{};
};

struct CvFilterOptions {
  double dt = 0.2;              // 5 Hz working rate
  double measurement_std = 0.5; // m, per axis
  double accel_std = 1.0;       // m/s^2, white-acceleration process noise
  double initial_var = 1e4;
};

// Linear Kalman filter with position measurements. The prior velocity is
// the two-point difference of the first two measurements.
class CvKalmanFilter {
 public:
  explicit CvKalmanFilter(const CvFilterOptions& opts = {});

  void initialize(double x0, double y0, double x1, double y1);
  void predict();
  void update(double x, double y);
  const KalmanState& state() const { return state_; }

 private:
  CvFilterOptions opts_;
  KalmanState state_;
};

// Filters the (n x 2) history positions (n >= 2; fewer is an ArgumentError), then predicts `horizon`
// steps ahead. Returns (horizon x 2) predicted means. `final_state`, when
// non-null, receives the posterior after the last update.
Tensor2 cv_filter_predict(const Tensor2& history, int horizon, const CvFilterOptions& opts = {},
                          KalmanState* final_state = nullptr);

}  // namespace mlstm
