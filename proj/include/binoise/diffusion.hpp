// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "binoise/schedule.hpp"
#include "binoise/tensor.hpp"

namespace binoise {

// Process primitives shared by every sampler and loss. All are pure; noise
// is always passed in explicitly. Outputs are checked finite.

/// Closed-form q(y_t | y_0): sqrt(abar_t) * y0 + sqrt(1 - abar_t) * eps.
Tensor forward_sample(const Tensor& y0, int t, const Tensor& eps, const VarianceSchedule& schedule);

/// Single forward step: sqrt(alpha_t) * y_prev + sqrt(beta_t) * eps.
Tensor forward_step(const Tensor& y_prev, int t, const Tensor& eps, const VarianceSchedule& schedule);

/// One-shot clean estimate (y_t - sqrt(1 - abar_t) * eps_hat) / sqrt(abar_t),
/// optionally clipped to y_t's value range.
Tensor predict_x0(const Tensor& y_t, const Tensor& eps_hat, int t, const VarianceSchedule& schedule,
                  bool clamp);

/// Ancestral reverse step
///   y_{t-1} = (y_t - beta_t / sqrt(1 - abar_t) * eps_hat) / sqrt(alpha_t) + sigma_t * z
/// with z ignored at t = 1.
Tensor reverse_step(const Tensor& y_t, const Tensor& eps_hat, const Tensor& z, int t,
                    const VarianceSchedule& schedule);

}  // namespace binoise
