#include "mlstm/params.hpp"

#include <algorithm>
#include <cmath>

#include "mlstm/error.hpp"

namespace mlstm {

Param& ParamSet::add(std::string name, Tensor2 init) {
  if (find(name) != nullptr) throw ArgumentError("duplicate parameter name: " + name);
  Param p;
  p.name = std::move(name);
  p.grad = Tensor2(init.rows(), init.cols());
  p.m = Tensor2(init.rows(), init.cols());
  p.v = Tensor2(init.rows(), init.cols());
  p.value = std::move(init);
  params_.push_back(std::move(p));
  return params_.back();
}

const Param* ParamSet::find(std::string_view name) const {
  auto it = std::find_if(params_.begin(), params_.end(),
                         [&](const Param& p) { return p.name == name; });
  return it == params_.end() ? nullptr : &*it;
}

const Param& ParamSet::at(std::string_view name) const {
  const Param* p = find(name);
  if (p == nullptr) throw ArgumentError("unknown parameter: " + std::string(name));
  return *p;
}

Param& ParamSet::at(std::string_view name) {
  return const_cast<Param&>(std::as_const(*this).at(name));
}

std::size_t ParamSet::num_scalars() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

bool ParamSet::grads_finite() const {
  return std::all_of(params_.begin(), params_.end(),
                     [](const Param& p) { return p.grad.all_finite(); });
}

void adam_step(ParamSet& params, const AdamOptions& opts) {
  for (const auto& p : params.params_) {
    if (!p.grad.same_shape(p.value)) {
      throw DimensionError("gradient shape mismatch for " + p.name);
    }
    if (!p.grad.all_finite()) {
      throw NumericError("non-finite gradient in " + p.name + "; update skipped");
    }
  }
  ++params.step_;
  const double t = static_cast<double>(params.step_);
  const double bc1 = 1.0 - std::pow(opts.beta1, t);
  const double bc2 = 1.0 - std::pow(opts.beta2, t);
  for (auto& p : params.params_) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      p.m[i] = opts.beta1 * p.m[i] + (1.0 - opts.beta1) * g;
      p.v[i] = opts.beta2 * p.v[i] + (1.0 - opts.beta2) * g * g;
      const double m_hat = p.m[i] / bc1;
      const double v_hat = p.v[i] / bc2;
      p.value[i] -= opts.lr * m_hat / (std::sqrt(v_hat) + opts.eps);
    }
  }
}

}  // namespace mlstm
