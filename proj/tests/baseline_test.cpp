#include "mlstm/baseline.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "mlstm/error.hpp"

namespace mlstm {
namespace {

Tensor2 line(double x0, double y0, double vx, double vy, int n, double dt = 0.2) {
  Tensor2 h(static_cast<std::size_t>(n), 2);
  for (int k = 0; k < n; ++k) {
    h(k, 0) = x0 + vx * dt * k;
    h(k, 1) = y0 + vy * dt * k;
  }
  return h;
}

TEST(CvFilter, NoiseFreeConstantVelocityIsExact) {
  const Tensor2 h = line(0.0, -60.0, 0.0, 20.0, 16);
  const Tensor2 p = cv_filter_predict(h, 25);
  ASSERT_EQ(p.rows(), 25u);
  for (int k = 0; k < 25; ++k) {
    EXPECT_NEAR(p(k, 0), 0.0, 1e-6);
    EXPECT_NEAR(p(k, 1), 20.0 * 0.2 * (k + 1), 1e-6);
  }
}

TEST(CvFilter, DiagonalMotionIsExact) {
  const Tensor2 h = line(3.0, 7.0, -1.5, 31.0, 16);
  const Tensor2 p = cv_filter_predict(h, 25);
  for (int k = 0; k < 25; ++k) {
    EXPECT_NEAR(p(k, 0), h(15, 0) - 1.5 * 0.2 * (k + 1), 1e-6);
    EXPECT_NEAR(p(k, 1), h(15, 1) + 31.0 * 0.2 * (k + 1), 1e-6);
  }
}

TEST(CvFilter, StationaryStaysPut) {
  const Tensor2 h = line(1.25, -4.5, 0.0, 0.0, 16);
  const Tensor2 p = cv_filter_predict(h, 25);
  for (int k = 0; k < 25; ++k) {
    EXPECT_NEAR(p(k, 0), 1.25, 1e-6);
    EXPECT_NEAR(p(k, 1), -4.5, 1e-6);
  }
}

TEST(CvFilter, TooShortHistoryThrows) {
  EXPECT_THROW(cv_filter_predict(Tensor2(1, 2), 25), ArgumentError);
  EXPECT_THROW(cv_filter_predict(Tensor2(5, 3), 25), DimensionError);
}

TEST(CvFilter, VelocityWithinThreeSigmaOverSeeds) {
  const double vx = 0.3, vy = 24.0;
  int inside = 0;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    std::normal_distribution<double> noise(0.0, 0.2);
    Tensor2 h = line(0.0, -72.0, vx, vy, 16);
    for (double& v : h.flat()) v += noise(rng);
    KalmanState st;
    cv_filter_predict(h, 25, {}, &st);
    const double zx = std::abs(st.mean[2] - vx) / std::sqrt(st.cov[2][2]);
    const double zy = std::abs(st.mean[3] - vy) / std::sqrt(st.cov[3][3]);
    inside += zx <= 3.0 && zy <= 3.0;
  }
  // The filter's assumed noise (0.5 m) exceeds the true 0.2 m, so its
  // posterior is conservative and every seed should land inside.
  EXPECT_EQ(inside, 100);
}

TEST(CvFilter, CovarianceStaysSymmetricPsd) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 1.0);
  CvKalmanFilter f;
  f.initialize(0, 0, 0.1, 5);
  double min_eig = 1e300, asym = 0.0;
  auto check = [&] {
    Eigen::Matrix4d m;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) m(i, j) = f.state().cov[i][j];
    asym = std::max(asym, (m - m.transpose()).cwiseAbs().maxCoeff());
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d>(m).eigenvalues().minCoeff());
  };
  for (int k = 0; k < 500; ++k) {
    f.predict();
    check();
    f.update(noise(rng), 5.0 * k + noise(rng));
    check();
  }
  EXPECT_LE(asym, 1e-12);
  EXPECT_GE(min_eig, -1e-10);
}

}  // namespace
}  // namespace mlstm
