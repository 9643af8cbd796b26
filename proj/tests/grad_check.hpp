// Copyright 2026  Verid Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.
//
// Central finite-difference gradient checking against analytic backward
// passes, run in 64-bit.

#ifndef VERID_TESTS_GRAD_CHECK_HPP_
#define VERID_TESTS_GRAD_CHECK_HPP_

#include <cmath>
#include <functional>

#include "verid/tensor.hpp"

namespace verid::testing {

// max over elements of |analytic - fd| / max(|analytic|, |fd|, 1).
inline double MaxRelError(const Tensor<double>& analytic,
                          const Tensor<double>& fd) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.data.size(); ++i) {
    const double a = analytic.data[i], f = fd.data[i];
    const double denom = std::max({std::abs(a), std::abs(f), 1.0});
    worst = std::max(worst, std::abs(a - f) / denom);
  }
  return worst;
}

// Central differences of a scalar objective with respect to every entry of
// `x`. The objective must re-read `x` on each call.
inline Tensor<double> FiniteDifference(Tensor<double>* x,
                                       const std::function<double()>& objective,
                                       double h = 1e-4) {
  Tensor<double> grad(x->shape);
  for (std::size_t i = 0; i < x->data.size(); ++i) {
    const double orig = x->data[i];
    x->data[i] = orig + h;
    const double fp = objective();
    x->data[i] = orig - h;
    const double fm = objective();
    x->data[i] = orig;
    grad.data[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

// Fixed random projection turning a tensor-valued map into a scalar
// objective: L(y) = sum_i r_i * y_i.
inline double Project(const Tensor<double>& y, const Tensor<double>& r) {
  double acc = 0.0;
  for (std::size_t i = 0; i < y.data.size(); ++i)
    acc += y.data[i] * r.data[i];
  return acc;
}

}  // namespace verid::testing

#endif  // VERID_TESTS_GRAD_CHECK_HPP_
