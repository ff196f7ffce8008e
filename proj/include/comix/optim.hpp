#pragma once

#include <cstdint>
#include <vector>

#include "comix/modules.hpp"

namespace comix::nn {

// RMSprop with decoupled weight decay and no momentum term.
// Update per scalar: acc = smoothing*acc + (1-smoothing)*g^2,
//                    p  -= lr*g/(sqrt(acc)+eps) + weight_decay*p_old.
class RmsProp {
 public:
  RmsProp(ParamStore& store, double lr, double weight_decay,
          double smoothing = 0.99, double eps = 1e-8);

  // Applies one update from the accumulated gradients, then clears them.
  // Throws NumericError (leaving params untouched) if any gradient is
  // non-finite; the message names the offending parameter.
  void step();
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

  std::vector<Tensor>& accumulators() { return acc_; }
  const std::vector<Tensor>& accumulators() const { return acc_; }
  uint64_t steps_taken() const { return steps_; }
  void set_steps_taken(uint64_t s) { steps_ = s; }

 private:
  ParamStore& store_;
  double lr_;
  double wd_;
  double smoothing_;
  double eps_;
  std::vector<Tensor> acc_;  // aligned with store order
  uint64_t steps_ = 0;
};

}  // namespace comix::nn
