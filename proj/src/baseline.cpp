#include "mlstm/baseline.hpp"

#include "mlstm/error.hpp"

namespace mlstm {
namespace {

using Mat4 = std::array<std::array<double, 4>, 4>;

Mat4 transition(double dt) {
  Mat4 f{};
  for (int i = 0; i < 4; ++i) f[i][i] = 1.0;
  f[0][2] = dt;
  f[1][3] = dt;
  return f;
}

Mat4 multiply(const Mat4& a, const Mat4& b) {
  Mat4 c{};
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 4; ++k)
      for (int j = 0; j < 4; ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

Mat4 transpose(const Mat4& a) {
  Mat4 t{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) t[i][j] = a[j][i];
  return t;
}

void symmetrize(Mat4& p) {
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) p[i][j] = p[j][i] = 0.5 * (p[i][j] + p[j][i]);
}

}  // namespace

CvKalmanFilter::CvKalmanFilter(const CvFilterOptions& opts) : opts_(opts) {}

void CvKalmanFilter::initialize(double x0, double y0, double x1, double y1) {
  state_.mean = {x0, y0, (x1 - x0) / opts_.dt, (y1 - y0) / opts_.dt};
  state_.cov = {};
  for (int i = 0; i < 4; ++i) state_.cov[i][i] = opts_.initial_var;
}

void CvKalmanFilter::predict() {
  const double dt = opts_.dt;
  const Mat4 f = transition(dt);
  auto& m = state_.mean;
  m = {m[0] + dt * m[2], m[1] + dt * m[3], m[2], m[3]};
  Mat4 p = multiply(multiply(f, state_.cov), transpose(f));
  const double q = opts_.accel_std * opts_.accel_std;
  const double dt2 = dt * dt;
  for (int axis = 0; axis < 2; ++axis) {
    const int pi = axis;
    const int vi = axis + 2;
    p[pi][pi] += q * dt2 * dt2 / 4.0;
    p[pi][vi] += q * dt2 * dt / 2.0;
    p[vi][pi] += q * dt2 * dt / 2.0;
    p[vi][vi] += q * dt2;
  }
  symmetrize(p);
  state_.cov = p;
}

void CvKalmanFilter::update(double x, double y) {
  auto& m = state_.mean;
  auto& p = state_.cov;
  const double r = opts_.measurement_std * opts_.measurement_std;
  // Innovation covariance S = H P H^T + R with H selecting positions.
  const double s00 = p[0][0] + r;
  const double s01 = p[0][1];
  const double s11 = p[1][1] + r;
  const double det = s00 * s11 - s01 * s01;
  if (!(det > 0.0)) throw NumericError("cv filter: singular innovation covariance");
  const double i00 = s11 / det;
  const double i01 = -s01 / det;
  const double i11 = s00 / det;
  // K = P H^T S^-1  (4 x 2)
  std::array<std::array<double, 2>, 4> k{};
  for (int i = 0; i < 4; ++i) {
    k[i][0] = p[i][0] * i00 + p[i][1] * i01;
    k[i][1] = p[i][0] * i01 + p[i][1] * i11;
  }
  const double ex = x - m[0];
  const double ey = y - m[1];
  for (int i = 0; i < 4; ++i) m[i] += k[i][0] * ex + k[i][1] * ey;
  // Joseph form keeps P symmetric positive semi-definite.
  Mat4 a{};
  for (int i = 0; i < 4; ++i) {
    a[i][i] = 1.0;
    a[i][0] -= k[i][0];
    a[i][1] -= k[i][1];
  }
  Mat4 np = multiply(multiply(a, p), transpose(a));
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) np[i][j] += r * (k[i][0] * k[j][0] + k[i][1] * k[j][1]);
  symmetrize(np);
  p = np;
}

Tensor2 cv_filter_predict(const Tensor2& history, int horizon, const CvFilterOptions& opts,
                          KalmanState* final_state) {
  if (history.cols() != 2) {
    throw DimensionError("cv_filter_predict: history must be (n x 2), got " +
                         history.shape_string());
  }
  if (history.rows() < 2) throw ArgumentError("cv_filter_predict needs at least 2 history points");
  if (horizon < 0) throw ArgumentError("cv_filter_predict: negative horizon");
  CvKalmanFilter kf(opts);
  kf.initialize(history(0, 0), history(0, 1), history(1, 0), history(1, 1));
  for (std::size_t r = 1; r < history.rows(); ++r) {
    kf.predict();
    kf.update(history(r, 0), history(r, 1));
  }
  if (final_state != nullptr) *final_state = kf.state();
  Tensor2 out(static_cast<std::size_t>(horizon), 2);
  for (int k = 0; k < horizon; ++k) {
    kf.predict();
    out(static_cast<std::size_t>(k), 0) = kf.state().mean[0];
    out(static_cast<std::size_t>(k), 1) = kf.state().mean[1];
  }
  return out;
}

}  // namespace mlstm
