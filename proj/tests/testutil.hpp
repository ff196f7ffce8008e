#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "comix/modules.hpp"

namespace comix::testutil {

struct GradCheckReport {
  double worst_score = 0.0;  // pass iff <= 1
  std::string worst_param;
  int scalars_checked = 0;
};

// Central finite-difference check of every scalar in `ps` against the
// analytic gradients produced by `eval(true)`.
//
// eval(with_grad): rebuilds the forward pass from current parameter values
// and returns the scalar loss; when with_grad, also runs backward so the
// analytic gradients accumulate into the store.
//
// Pass criterion per scalar: |analytic - fd| <= rel_tol*max(|analytic|,|fd|) + abs_floor.
inline GradCheckReport grad_check(nn::ParamStore& ps,
                                  const std::function<double(bool)>& eval,
                                  double h = 1e-4, double rel_tol = 1e-4,
                                  double abs_floor = 1e-8) {
  ps.zero_grad();
  eval(true);
  std::vector<nn::Tensor> analytic;
  analytic.reserve(ps.size());
  for (const nn::Param& p : ps.all()) analytic.push_back(p.grad);

  GradCheckReport rep;
  size_t pi = 0;
  for (nn::Param& p : ps.all()) {
    const nn::Tensor& a = analytic[pi++];
    for (size_t k = 0; k < p.value.v.size(); ++k) {
      const double orig = p.value.v[k];
      p.value.v[k] = orig + h;
      const double lp = eval(false);
      p.value.v[k] = orig - h;
      const double lm = eval(false);
      p.value.v[k] = orig;
      const double fd = (lp - lm) / (2.0 * h);
      const double err = std::fabs(a.v[k] - fd);
      const double tol = rel_tol * std::max(std::fabs(a.v[k]), std::fabs(fd)) + abs_floor;
      const double score = err / tol;
      ++rep.scalars_checked;
      if (score > rep.worst_score) {
        rep.worst_score = score;
        rep.worst_param = p.name + "[" + std::to_string(k) + "]";
      }
    }
  }
  return rep;
}

inline nn::Tensor random_tensor(int rows, int cols, comix::Rng& rng, double lo = -1.0,
                                double hi = 1.0) {
  nn::Tensor t = nn::Tensor::zeros(rows, cols);
  for (double& x : t.v) x = comix::uniform(rng, lo, hi);
  return t;
}

}  // namespace comix::testutil
