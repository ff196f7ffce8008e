#include "comix/optim.hpp"

#include <cmath>

#include "comix/errors.hpp"

namespace comix::nn {

RmsProp::RmsProp(ParamStore& store, double lr, double weight_decay, double smoothing,
                 double eps)
    : store_(store), lr_(lr), wd_(weight_decay), smoothing_(smoothing), eps_(eps) {
  acc_.reserve(store_.size());
  for (const Param& p : store_.all())
    acc_.push_back(Tensor::zeros(p.value.rows(), p.value.cols()));
}

void RmsProp::step() {
  for (const Param& p : store_.all()) {
    if (!p.grad.all_finite())
      throw NumericError("RmsProp::step: non-finite gradient in " + p.name +
                         " at step " + std::to_string(steps_));
  }
  // A zeroed learning rate disables the update entirely (including decay):
  // training with lr 0 must leave parameters bit-identical.
  if (lr_ == 0.0) {
    store_.zero_grad();
    ++steps_;
    return;
  }
  size_t i = 0;
  for (Param& p : store_.all()) {
    Tensor& a = acc_[i++];
    for (size_t k = 0; k < p.value.v.size(); ++k) {
      const double g = p.grad.v[k];
      a.v[k] = smoothing_ * a.v[k] + (1.0 - smoothing_) * g * g;
      const double old = p.value.v[k];
      p.value.v[k] = old - lr_ * g / (std::sqrt(a.v[k]) + eps_) - wd_ * old;
    }
  }
  store_.zero_grad();
  ++steps_;
}

}  // namespace comix::nn
