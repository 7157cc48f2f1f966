#include "mlstm/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mlstm/error.hpp"
#include "mlstm/gaussian.hpp"
#include "mlstm/kernels.hpp"

namespace mlstm {

Var Tape::constant(Tensor2 value) { return push(std::move(value), nullptr); }

Var Tape::parameter(Param& p) {
  Node n;
  n.external = &p.value;
  n.param = &p;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::view(const Tensor2& value) {
  Node n;
  n.external = &value;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::push(Tensor2 value, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Tape::Node& Tape::node(Var v) {
  if (v.id >= nodes_.size()) throw OutOfRangeError("tape: invalid variable");
  return nodes_[v.id];
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw OutOfRangeError("tape: invalid variable");
  return nodes_[v.id];
}

const Tensor2& Tape::value(Var v) const {
  const Node& n = node(v);
  return n.external != nullptr ? *n.external : n.value;
}

Tensor2& Tape::grad(Var v) {
  Node& n = node(v);
  if (n.grad.empty()) {
    const Tensor2& val = n.external != nullptr ? *n.external : n.value;
    n.grad = Tensor2(val.rows(), val.cols());
  }
  return n.grad;
}

bool Tape::has_grad(Var v) const { return !node(v).grad.empty(); }

void Tape::backward(Var loss) {
  const Tensor2& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw DimensionError("backward expects a 1x1 loss, got " + lv.shape_string());
  }
  grad(loss)[0] += 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.param != nullptr) {
      Tensor2& pg = n.param->grad;
      for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad[k];
    } else if (n.backward) {
      // Copy: the callback may reallocate other nodes' grads but never pushes.
      auto fn = n.backward;
      fn(*this, i);
    }
  }
}

namespace ops {
namespace {

void require_same_shape(const Tensor2& a, const Tensor2& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape " + a.shape_string() + " vs " +
                         b.shape_string());
  }
}

}  // namespace

Var linear(Tape& t, Var x, Var w, Var b) {
  static const Tensor2 kNoBias;
  Tensor2 out;
  kernels::linear(t.value(x), t.value(w), b.valid() ? t.value(b) : kNoBias, out);
  return t.push(std::move(out), [x, w, b](Tape& tp, std::size_t self) {
    const Tensor2& dout = tp.grad(Var{self});
    kernels::linear_grad_input(dout, tp.value(w), tp.grad(x));
    kernels::linear_grad_weight(dout, tp.value(x), tp.grad(w));
    if (b.valid()) kernels::linear_grad_bias(dout, tp.grad(b));
  });
}

Var add(Tape& t, Var a, Var b) {
  const Tensor2& av = t.value(a);
  const Tensor2& bv = t.value(b);
  require_same_shape(av, bv, "add");
  Tensor2 out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return t.push(std::move(out), [a, b](Tape& tp, std::size_t self) {
    const Tensor2& g = tp.grad(Var{self});
    Tensor2& ga = tp.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    Tensor2& gb = tp.grad(b);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
  });
}

Var scale(Tape& t, Var x, double s) {
  Tensor2 out = t.value(x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
  return t.push(std::move(out), [x, s](Tape& tp, std::size_t self) {
    const Tensor2& g = tp.grad(Var{self});
    Tensor2& gx = tp.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += s * g[i];
  });
}

Var leaky_relu(Tape& t, Var x, double alpha) {
  Tensor2 out = t.value(x);
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!(out[i] > 0.0)) out[i] *= alpha;
  return t.push(std::move(out), [x, alpha](Tape& tp, std::size_t self) {
    const Tensor2& g = tp.grad(Var{self});
    const Tensor2& xv = tp.value(x);
    Tensor2& gx = tp.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += xv[i] > 0.0 ? g[i] : alpha * g[i];
  });
}

Var concat_cols(Tape& t, Var a, Var b) {
  const Tensor2& av = t.value(a);
  const Tensor2& bv = t.value(b);
  if (av.rows() != bv.rows()) {
    throw DimensionError("concat_cols: rows " + av.shape_string() + " vs " +
                         bv.shape_string());
  }
  const std::size_t ca = av.cols();
  const std::size_t cb = bv.cols();
  Tensor2 out(av.rows(), ca + cb);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    std::copy_n(av.data() + r * ca, ca, out.data() + r * (ca + cb));
    std::copy_n(bv.data() + r * cb, cb, out.data() + r * (ca + cb) + ca);
  }
  return t.push(std::move(out), [a, b, ca, cb](Tape& tp, std::size_t self) {
    const Tensor2& g = tp.grad(Var{self});
    Tensor2& ga = tp.grad(a);
    Tensor2& gb = tp.grad(b);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t j = 0; j < ca; ++j) ga(r, j) += g(r, j);
      for (std::size_t j = 0; j < cb; ++j) gb(r, j) += g(r, ca + j);
    }
  });
}

Var sum_all(Tape& t, Var x) {
  const Tensor2& xv = t.value(x);
  double s = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) s += xv[i];
  return t.push(Tensor2(1, 1, s), [x](Tape& tp, std::size_t self) {
    const double g = tp.grad(Var{self})[0];
    Tensor2& gx = tp.grad(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

Var mean_all(Tape& t, Var x) {
  const std::size_t n = t.value(x).size();
  if (n == 0) throw DimensionError("mean_all of an empty tensor");
  return scale(t, sum_all(t, x), 1.0 / static_cast<double>(n));
}

Var sum_squares(Tape& t, Var x) {
  const Tensor2& xv = t.value(x);
  double s = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) s += xv[i] * xv[i];
  return t.push(Tensor2(1, 1, s), [x](Tape& tp, std::size_t self) {
    const double g = tp.grad(Var{self})[0];
    const Tensor2& xv2 = tp.value(x);
    Tensor2& gx = tp.grad(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += 2.0 * g * xv2[i];
  });
}

Var lstm_cell_state(Tape& t, Var gates, Var c_prev) {
  Tensor2 c;
  kernels::lstm_cell_state(t.value(gates), t.value(c_prev), c);
  return t.push(std::move(c), [gates, c_prev](Tape& tp, std::size_t self) {
    const Tensor2& dc = tp.grad(Var{self});
    Tensor2& dg = tp.grad(gates);
    Tensor2& dcp = tp.grad(c_prev);
    kernels::lstm_cell_state_grad(tp.value(gates), tp.value(c_prev), dc, dg, dcp);
  });
}

Var lstm_hidden(Tape& t, Var gates, Var c) {
  Tensor2 h;
  kernels::lstm_hidden(t.value(gates), t.value(c), h);
  return t.push(std::move(h), [gates, c](Tape& tp, std::size_t self) {
    const Tensor2& dh = tp.grad(Var{self});
    Tensor2& dg = tp.grad(gates);
    Tensor2& dc = tp.grad(c);
    kernels::lstm_hidden_grad(tp.value(gates), tp.value(c), dh, dg, dc);
  });
}

Var softmax_xent(Tape& t, Var logits, std::span<const int> targets) {
  const Tensor2& lv = t.value(logits);
  if (targets.size() != lv.rows()) {
    throw DimensionError("softmax_xent: " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(lv.rows()) + " rows");
  }
  const std::size_t k = lv.cols();
  Tensor2 probs(lv.rows(), k);
  Tensor2 out(lv.rows(), 1);
  std::vector<int> tgt(targets.begin(), targets.end());
  for (std::size_t r = 0; r < lv.rows(); ++r) {
    if (tgt[r] < 0 || static_cast<std::size_t>(tgt[r]) >= k) {
      throw OutOfRangeError("softmax_xent: target " + std::to_string(tgt[r]) +
                            " out of range for " + std::to_string(k) + " classes");
    }
    const auto row = lv.row_span(r);
    const double m = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - m);
    const double lse = m + std::log(z);
    for (std::size_t j = 0; j < k; ++j) probs(r, j) = std::exp(row[j] - lse);
    out(r, 0) = lse - row[static_cast<std::size_t>(tgt[r])];
  }
  return t.push(std::move(out), [logits, probs = std::move(probs), tgt = std::move(tgt)](
                                    Tape& tp, std::size_t self) {
    const Tensor2& g = tp.grad(Var{self});
    Tensor2& gl = tp.grad(logits);
    for (std::size_t r = 0; r < probs.rows(); ++r) {
      for (std::size_t j = 0; j < probs.cols(); ++j) {
        const double onehot = static_cast<int>(j) == tgt[r] ? 1.0 : 0.0;
        gl(r, j) += g(r, 0) * (probs(r, j) - onehot);
      }
    }
  });
}

Var bivariate_nll(Tape& t, Var raw, const Tensor2& truth, double scale_x, double scale_y) {
  const Tensor2& rv = t.value(raw);
  if (rv.cols() != 5 || truth.cols() != 2 || truth.rows() != rv.rows()) {
    throw DimensionError("bivariate_nll: raw " + rv.shape_string() + " vs truth " +
                         truth.shape_string());
  }
  Tensor2 out(rv.rows(), 1);
  for (std::size_t r = 0; r < rv.rows(); ++r) {
    const GaussianStep g = gaussian_from_raw(rv.row_span(r), scale_x, scale_y);
    out(r, 0) = gaussian_nll(g, truth(r, 0), truth(r, 1));
    if (!std::isfinite(out(r, 0))) throw NumericError("bivariate_nll: non-finite loss");
  }
  return t.push(std::move(out), [raw, truth, scale_x, scale_y](Tape& tp, std::size_t self) {
    const Tensor2& g = tp.grad(Var{self});
    const Tensor2& rv2 = tp.value(raw);
    Tensor2& gr = tp.grad(raw);
    for (std::size_t r = 0; r < rv2.rows(); ++r) {
      const double up = g(r, 0);
      const GaussianStep s = gaussian_from_raw(rv2.row_span(r), scale_x, scale_y);
      const double dx = (truth(r, 0) - s.mux) / s.sx;
      const double dy = (truth(r, 1) - s.muy) / s.sy;
      const double q = 1.0 - s.rho * s.rho;
      const double z = dx * dx + dy * dy - 2.0 * s.rho * dx * dy;
      const double ex = dx - s.rho * dy;
      const double ey = dy - s.rho * dx;
      const double th = std::tanh(rv2(r, 4));
      gr(r, 0) += up * (-ex / (q * s.sx)) * scale_x;
      gr(r, 1) += up * (-ey / (q * s.sy)) * scale_y;
      gr(r, 2) += up * (1.0 - dx * ex / q);
      gr(r, 3) += up * (1.0 - dy * ey / q);
      const double drho = -s.rho / q - dx * dy / q + z * s.rho / (q * q);
      gr(r, 4) += up * drho * kRhoLimit * (1.0 - th * th);
    }
  });
}

}  // namespace ops

std::pair<Var, Var> lstm_cell(Tape& t, Var x, Var h_prev, Var c_prev, const LstmVars& p,
                              Var x_proj) {
  const Var in = x_proj.valid() ? x_proj : ops::linear(t, x, p.w_x, p.b);
  const Var gates = ops::add(t, in, ops::linear(t, h_prev, p.w_h));
  const Tensor2& gv = t.value(gates);
  const std::size_t hidden = gv.cols() / 4;
  static constexpr const char* kGateNames[4] = {"input", "forget", "cell", "output"};
  for (std::size_t r = 0; r < gv.rows(); ++r) {
    for (std::size_t j = 0; j < gv.cols(); ++j) {
      if (!std::isfinite(gv(r, j))) {
        throw NumericError(std::string("lstm_cell: non-finite ") + kGateNames[j / hidden] +
                           " gate pre-activation");
      }
    }
  }
  const Var c = ops::lstm_cell_state(t, gates, c_prev);
  const Var h = ops::lstm_hidden(t, gates, c);
  return {h, c};
}

}  // namespace mlstm
