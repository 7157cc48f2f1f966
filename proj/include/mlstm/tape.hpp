#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "mlstm/params.hpp"
#include "mlstm/tensor.hpp"

namespace mlstm {

// Handle to a node recorded on a Tape.
struct Var {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t id = kNone;
  bool valid() const { return id != kNone; }
};

// Linear record of primitive evaluations. backward() walks the record in
// exact reverse order; gradients are accumulated additively into each node
// and, for parameter nodes, into Param::grad. A Tape is single threaded.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Var constant(Tensor2 value);
  // The tape reads p.value by reference; p must outlive the tape.
  Var parameter(Param& p);
  // Read-only reference to an external tensor; its gradient is not exported.
  Var view(const Tensor2& value);

  const Tensor2& value(Var v) const;
  // Gradient buffer of a node, allocated as zeros on first access.
  Tensor2& grad(Var v);
  bool has_grad(Var v) const;

  // Seeds d(loss)/d(loss) = 1 on a 1x1 node and propagates.
  void backward(Var loss);

  Var push(Tensor2 value, BackwardFn fn);
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor2 value;
    const Tensor2* external = nullptr;
    Param* param = nullptr;
    Tensor2 grad;
    BackwardFn backward;
  };
  Node& node(Var v);
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
};

// Differentiable primitives. Each records exactly one node.
namespace ops {

// x * W^T + b; `b` may be an invalid Var for no bias.
Var linear(Tape& t, Var x, Var w, Var b = {});
Var add(Tape& t, Var a, Var b);
Var scale(Tape& t, Var x, double s);
Var leaky_relu(Tape& t, Var x, double alpha = 0.1);
// Column-wise concatenation [a | b]; row counts must agree.
Var concat_cols(Tape& t, Var a, Var b);
Var sum_all(Tape& t, Var x);
Var mean_all(Tape& t, Var x);
Var sum_squares(Tape& t, Var x);

// LSTM pointwise stages on gate pre-activations laid out [i | f | g | o].
Var lstm_cell_state(Tape& t, Var gates, Var c_prev);
Var lstm_hidden(Tape& t, Var gates, Var c);

// Per-row -log softmax(logits)[target]; result is (batch x 1).
Var softmax_xent(Tape& t, Var logits, std::span<const int> targets);

// Per-row negative log density of truth (batch x 2, meters) under the
// bivariate Gaussian encoded by raw head outputs (batch x 5):
// mu = scale * raw[0..1], sigma = scale * exp(raw[2..3]),
// rho = kRhoLimit * tanh(raw[4]), with scale_x on the x entries and
// scale_y on the y entries. Result is (batch x 1).
Var bivariate_nll(Tape& t, Var raw, const Tensor2& truth, double scale_x, double scale_y);
inline Var bivariate_nll(Tape& t, Var raw, const Tensor2& truth, double scale = 1.0) {
  return bivariate_nll(t, raw, truth, scale, scale);
}

}  // namespace ops

// Weights of one LSTM layer. Gate row blocks of w_x, w_h and b are ordered
// (input, forget, cell, output), each `hidden` rows tall.
struct LstmVars {
  Var w_x;
  Var w_h;
  Var b;
};

// One LSTM step. `x_proj`, when valid, is a precomputed x * W_x^T + b and
// replaces the input projection (used when the input repeats every step).
// Throws NumericError naming the gate when a pre-activation is non-finite.
std::pair<Var, Var> lstm_cell(Tape& t, Var x, Var h_prev, Var c_prev, const LstmVars& p,
                              Var x_proj = {});

}  // namespace mlstm
