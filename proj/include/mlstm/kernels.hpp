#pragma once

// Dense kernels behind the differentiation tape.
//
// Every kernel exists twice: `kernels::serial` is the plain reference, and
// the functions directly in `kernels` split the outer loop across OpenMP
// threads. Both variants accumulate each output element in the same order,
// so their results are bitwise identical for any thread count; the tests
// rely on that.
//
// Conventions: activations are (batch x features); a weight W is
// (out x in) and a linear map computes X * W^T + b.

#include "mlstm/tensor.hpp"

namespace mlstm::kernels {

namespace serial {

// out = x * w^T (+ bias when bias is non-empty). out is overwritten.
void linear(const Tensor2& x, const Tensor2& w, const Tensor2& bias, Tensor2& out);
// dx += dout * w
void linear_grad_input(const Tensor2& dout, const Tensor2& w, Tensor2& dx);
// dw += dout^T * x
void linear_grad_weight(const Tensor2& dout, const Tensor2& x, Tensor2& dw);
// dbias += column sums of dout
void linear_grad_bias(const Tensor2& dout, Tensor2& dbias);

// LSTM pointwise stages on gate pre-activations laid out [i | f | g | o].
// c = sigmoid(f) * c_prev + sigmoid(i) * tanh(g)
void lstm_cell_state(const Tensor2& gates, const Tensor2& c_prev, Tensor2& c);
void lstm_cell_state_grad(const Tensor2& gates, const Tensor2& c_prev, const Tensor2& dc,
                          Tensor2& dgates, Tensor2& dc_prev);
// h = sigmoid(o) * tanh(c)
void lstm_hidden(const Tensor2& gates, const Tensor2& c, Tensor2& h);
void lstm_hidden_grad(const Tensor2& gates, const Tensor2& c, const Tensor2& dh,
                      Tensor2& dgates, Tensor2& dc);

}  // namespace serial

void linear(const Tensor2& x, const Tensor2& w, const Tensor2& bias, Tensor2& out);
void linear_grad_input(const Tensor2& dout, const Tensor2& w, Tensor2& dx);
void linear_grad_weight(const Tensor2& dout, const Tensor2& x, Tensor2& dw);
void linear_grad_bias(const Tensor2& dout, Tensor2& dbias);
void lstm_cell_state(const Tensor2& gates, const Tensor2& c_prev, Tensor2& c);
void lstm_cell_state_grad(const Tensor2& gates, const Tensor2& c_prev, const Tensor2& dc,
                          Tensor2& dgates, Tensor2& dc_prev);
void lstm_hidden(const Tensor2& gates, const Tensor2& c, Tensor2& h);
void lstm_hidden_grad(const Tensor2& gates, const Tensor2& c, const Tensor2& dh,
                      Tensor2& dgates, Tensor2& dc);

// Number of OpenMP worker threads; 0 restores the runtime default.
void set_num_workers(int n);
int num_workers();

}  // namespace mlstm::kernels
