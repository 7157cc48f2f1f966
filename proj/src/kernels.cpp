#include "mlstm/kernels.hpp"

#include <cmath>
#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mlstm/error.hpp"

namespace mlstm::kernels {
namespace {

constexpr std::size_t kRowBlock = 4;
// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelWork = 1 << 15;

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

void check_linear(const Tensor2& x, const Tensor2& w, const Tensor2& bias) {
  if (x.cols() != w.cols()) {
    throw DimensionError("linear: input " + x.shape_string() + " vs weight " +
                         w.shape_string());
  }
  if (!bias.empty() && (bias.rows() != 1 || bias.cols() != w.rows())) {
    throw DimensionError("linear: bias " + bias.shape_string() + " vs weight " +
                         w.shape_string());
  }
}

Tensor2 transpose(const Tensor2& w) {
  Tensor2 t(w.cols(), w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r)
    for (std::size_t c = 0; c < w.cols(); ++c) t(c, r) = w(r, c);
  return t;
}

// The per-block bodies are shared by the serial and OpenMP drivers so both
// visit every output element with the same operation order.

void linear_block(const Tensor2& x, const Tensor2& wt, const Tensor2& bias, Tensor2& out,
                  std::size_t r0) {
  const std::size_t r1 = std::min(r0 + kRowBlock, x.rows());
  const std::size_t n = wt.cols();
  const std::size_t k_dim = wt.rows();
  for (std::size_t r = r0; r < r1; ++r) {
    double* o = out.data() + r * n;
    if (bias.empty()) {
      for (std::size_t j = 0; j < n; ++j) o[j] = 0.0;
    } else {
      for (std::size_t j = 0; j < n; ++j) o[j] = bias[j];
    }
  }
  for (std::size_t k = 0; k < k_dim; ++k) {
    const double* wk = wt.data() + k * n;
    for (std::size_t r = r0; r < r1; ++r) {
      const double a = x(r, k);
      double* o = out.data() + r * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += a * wk[j];
    }
  }
}

void grad_input_row(const Tensor2& dout, const Tensor2& w, Tensor2& dx, std::size_t r) {
  const std::size_t k_dim = w.cols();
  double* d = dx.data() + r * k_dim;
  for (std::size_t n = 0; n < w.rows(); ++n) {
    const double g = dout(r, n);
    const double* wn = w.data() + n * k_dim;
    for (std::size_t k = 0; k < k_dim; ++k) d[k] += g * wn[k];
  }
}

void grad_weight_row(const Tensor2& dout, const Tensor2& x, Tensor2& dw, std::size_t n) {
  const std::size_t k_dim = x.cols();
  double* d = dw.data() + n * k_dim;
  for (std::size_t b = 0; b < x.rows(); ++b) {
    const double g = dout(b, n);
    const double* xb = x.data() + b * k_dim;
    for (std::size_t k = 0; k < k_dim; ++k) d[k] += g * xb[k];
  }
}

void grad_bias_col(const Tensor2& dout, Tensor2& dbias, std::size_t n) {
  double s = dbias[n];
  for (std::size_t b = 0; b < dout.rows(); ++b) s += dout(b, n);
  dbias[n] = s;
}

void cell_state_row(const Tensor2& gates, const Tensor2& c_prev, Tensor2& c, std::size_t r) {
  const std::size_t h = c.cols();
  const double* g = gates.data() + r * 4 * h;
  for (std::size_t j = 0; j < h; ++j) {
    const double i_gate = sigmoid(g[j]);
    const double f_gate = sigmoid(g[h + j]);
    const double cand = std::tanh(g[2 * h + j]);
    c(r, j) = f_gate * c_prev(r, j) + i_gate * cand;
  }
}

void cell_state_grad_row(const Tensor2& gates, const Tensor2& c_prev, const Tensor2& dc,
                         Tensor2& dgates, Tensor2& dc_prev, std::size_t r) {
  const std::size_t h = dc.cols();
  const double* g = gates.data() + r * 4 * h;
  double* dg = dgates.data() + r * 4 * h;
  for (std::size_t j = 0; j < h; ++j) {
    const double i_gate = sigmoid(g[j]);
    const double f_gate = sigmoid(g[h + j]);
    const double cand = std::tanh(g[2 * h + j]);
    const double d = dc(r, j);
    dg[j] += d * cand * i_gate * (1.0 - i_gate);
    dg[h + j] += d * c_prev(r, j) * f_gate * (1.0 - f_gate);
    dg[2 * h + j] += d * i_gate * (1.0 - cand * cand);
    dc_prev(r, j) += d * f_gate;
  }
}

void hidden_row(const Tensor2& gates, const Tensor2& c, Tensor2& hid, std::size_t r) {
  const std::size_t h = c.cols();
  const double* g = gates.data() + r * 4 * h;
  for (std::size_t j = 0; j < h; ++j) hid(r, j) = sigmoid(g[3 * h + j]) * std::tanh(c(r, j));
}

void hidden_grad_row(const Tensor2& gates, const Tensor2& c, const Tensor2& dh,
                     Tensor2& dgates, Tensor2& dc, std::size_t r) {
  const std::size_t h = c.cols();
  const double* g = gates.data() + r * 4 * h;
  double* dg = dgates.data() + r * 4 * h;
  for (std::size_t j = 0; j < h; ++j) {
    const double o_gate = sigmoid(g[3 * h + j]);
    const double tc = std::tanh(c(r, j));
    const double d = dh(r, j);
    dg[3 * h + j] += d * tc * o_gate * (1.0 - o_gate);
    dc(r, j) += d * o_gate * (1.0 - tc * tc);
  }
}

void check_lstm(const Tensor2& gates, const Tensor2& state) {
  if (gates.rows() != state.rows() || gates.cols() != 4 * state.cols()) {
    throw DimensionError("lstm: gates " + gates.shape_string() + " vs state " +
                         state.shape_string());
  }
}

std::size_t blocks(std::size_t rows) { return (rows + kRowBlock - 1) / kRowBlock; }

}  // namespace

namespace serial {

void linear(const Tensor2& x, const Tensor2& w, const Tensor2& bias, Tensor2& out) {
  check_linear(x, w, bias);
  out = Tensor2(x.rows(), w.rows());
  const Tensor2 wt = transpose(w);
  for (std::size_t b = 0; b < blocks(x.rows()); ++b) linear_block(x, wt, bias, out, b * kRowBlock);
}

void linear_grad_input(const Tensor2& dout, const Tensor2& w, Tensor2& dx) {
  for (std::size_t r = 0; r < dout.rows(); ++r) grad_input_row(dout, w, dx, r);
}

void linear_grad_weight(const Tensor2& dout, const Tensor2& x, Tensor2& dw) {
  for (std::size_t n = 0; n < dw.rows(); ++n) grad_weight_row(dout, x, dw, n);
}

void linear_grad_bias(const Tensor2& dout, Tensor2& dbias) {
  for (std::size_t n = 0; n < dbias.cols(); ++n) grad_bias_col(dout, dbias, n);
}

void lstm_cell_state(const Tensor2& gates, const Tensor2& c_prev, Tensor2& c) {
  check_lstm(gates, c_prev);
  c = Tensor2(c_prev.rows(), c_prev.cols());
  for (std::size_t r = 0; r < c.rows(); ++r) cell_state_row(gates, c_prev, c, r);
}

void lstm_cell_state_grad(const Tensor2& gates, const Tensor2& c_prev, const Tensor2& dc,
                          Tensor2& dgates, Tensor2& dc_prev) {
  for (std::size_t r = 0; r < dc.rows(); ++r)
    cell_state_grad_row(gates, c_prev, dc, dgates, dc_prev, r);
}

void lstm_hidden(const Tensor2& gates, const Tensor2& c, Tensor2& h) {
  check_lstm(gates, c);
  h = Tensor2(c.rows(), c.cols());
  for (std::size_t r = 0; r < c.rows(); ++r) hidden_row(gates, c, h, r);
}

void lstm_hidden_grad(const Tensor2& gates, const Tensor2& c, const Tensor2& dh,
                      Tensor2& dgates, Tensor2& dc) {
  for (std::size_t r = 0; r < c.rows(); ++r) hidden_grad_row(gates, c, dh, dgates, dc, r);
}

}  // namespace serial

void linear(const Tensor2& x, const Tensor2& w, const Tensor2& bias, Tensor2& out) {
  check_linear(x, w, bias);
  out = Tensor2(x.rows(), w.rows());
  const Tensor2 wt = transpose(w);
  const auto nb = static_cast<std::ptrdiff_t>(blocks(x.rows()));
  const bool par = x.rows() * w.size() >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t b = 0; b < nb; ++b)
    linear_block(x, wt, bias, out, static_cast<std::size_t>(b) * kRowBlock);
}

void linear_grad_input(const Tensor2& dout, const Tensor2& w, Tensor2& dx) {
  const auto rows = static_cast<std::ptrdiff_t>(dout.rows());
  const bool par = dout.rows() * w.size() >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t r = 0; r < rows; ++r)
    grad_input_row(dout, w, dx, static_cast<std::size_t>(r));
}

void linear_grad_weight(const Tensor2& dout, const Tensor2& x, Tensor2& dw) {
  const auto rows = static_cast<std::ptrdiff_t>(dw.rows());
  const bool par = x.rows() * dw.size() >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t n = 0; n < rows; ++n)
    grad_weight_row(dout, x, dw, static_cast<std::size_t>(n));
}

void linear_grad_bias(const Tensor2& dout, Tensor2& dbias) {
  const auto cols = static_cast<std::ptrdiff_t>(dbias.cols());
  const bool par = dout.size() >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t n = 0; n < cols; ++n)
    grad_bias_col(dout, dbias, static_cast<std::size_t>(n));
}

void lstm_cell_state(const Tensor2& gates, const Tensor2& c_prev, Tensor2& c) {
  check_lstm(gates, c_prev);
  c = Tensor2(c_prev.rows(), c_prev.cols());
  const auto rows = static_cast<std::ptrdiff_t>(c.rows());
  const bool par = gates.size() >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t r = 0; r < rows; ++r)
    cell_state_row(gates, c_prev, c, static_cast<std::size_t>(r));
}

void lstm_cell_state_grad(const Tensor2& gates, const Tensor2& c_prev, const Tensor2& dc,
                          Tensor2& dgates, Tensor2& dc_prev) {
  const auto rows = static_cast<std::ptrdiff_t>(dc.rows());
  const bool par = gates.size() >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t r = 0; r < rows; ++r)
    cell_state_grad_row(gates, c_prev, dc, dgates, dc_prev, static_cast<std::size_t>(r));
}

void lstm_hidden(const Tensor2& gates, const Tensor2& c, Tensor2& h) {
  check_lstm(gates, c);
  h = Tensor2(c.rows(), c.cols());
  const auto rows = static_cast<std::ptrdiff_t>(c.rows());
  const bool par = gates.size() >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t r = 0; r < rows; ++r) hidden_row(gates, c, h, static_cast<std::size_t>(r));
}

void lstm_hidden_grad(const Tensor2& gates, const Tensor2& c, const Tensor2& dh,
                      Tensor2& dgates, Tensor2& dc) {
  const auto rows = static_cast<std::ptrdiff_t>(c.rows());
  const bool par = gates.size() >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t r = 0; r < rows; ++r)
    hidden_grad_row(gates, c, dh, dgates, dc, static_cast<std::size_t>(r));
}

void set_num_workers(int n) {
#ifdef _OPENMP
  static const int default_threads = omp_get_max_threads();
  omp_set_num_threads(n > 0 ? n : default_threads);
#else
  (void)n;
#endif
}

int num_workers() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace mlstm::kernels
