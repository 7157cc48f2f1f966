#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <string_view>

#include "mlstm/tensor.hpp"

namespace mlstm {

// One trainable tensor with its gradient and Adam moment buffers.
struct Param {
  std::string name;
  Tensor2 value;
  Tensor2 grad;
  Tensor2 m;
  Tensor2 v;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Named parameters plus optimizer state. Storage is a deque so references
// handed to a Tape stay valid while further parameters are added.
class ParamSet {
 public:
  Param& add(std::string name, Tensor2 init);
  Param& at(std::string_view name);
  const Param& at(std::string_view name) const;
  const Param* find(std::string_view name) const;

  std::deque<Param>& entries() { return params_; }
  const std::deque<Param>& entries() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t num_scalars() const;

  void zero_grad();
  bool grads_finite() const;
  std::int64_t step() const { return step_; }

 private:
  friend void adam_step(ParamSet&, const AdamOptions&);
  std::deque<Param> params_;
  std::int64_t step_ = 0;
};

// Bias-corrected Adam update using each Param::grad. Throws NumericError and
// leaves every parameter untouched when any gradient is non-finite.
void adam_step(ParamSet& params, const AdamOptions& opts = {});

}  // namespace mlstm
