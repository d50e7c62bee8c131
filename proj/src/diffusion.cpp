// SPDX-License-Identifier: Apache-2.0
#include "binoise/diffusion.hpp"

#include <algorithm>
#include <cmath>

namespace binoise {

Tensor forward_sample(const Tensor& y0, int t, const Tensor& eps, const VarianceSchedule& schedule) {
    require_same_shape(y0, eps, "forward_sample");
    const auto c = schedule.lookup(t);
    const double keep = std::sqrt(c.alpha_bar);
    const double noise = std::sqrt(1.0 - c.alpha_bar);
    Tensor out = y0;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = keep * y0[i] + noise * eps[i];
    require_finite(out, "forward_sample");
    return out;
}

Tensor forward_step(const Tensor& y_prev, int t, const Tensor& eps, const VarianceSchedule& schedule) {
    require_same_shape(y_prev, eps, "forward_step");
    const auto c = schedule.lookup(t);
    const double keep = std::sqrt(c.alpha);
    const double noise = std::sqrt(c.beta);
    Tensor out = y_prev;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = keep * y_prev[i] + noise * eps[i];
    require_finite(out, "forward_step");
    return out;
}

Tensor predict_x0(const Tensor& y_t, const Tensor& eps_hat, int t, const VarianceSchedule& schedule,
                  bool clamp) {
    require_same_shape(y_t, eps_hat, "predict_x0");
    const auto c = schedule.lookup(t);
    const double noise = std::sqrt(1.0 - c.alpha_bar);
    const double scale = std::sqrt(c.alpha_bar);
    Tensor out = y_t;
    const ValueRange r = y_t.range();
    for (std::size_t i = 0; i < out.size(); ++i) {
        double v = (y_t[i] - noise * eps_hat[i]) / scale;
        if (clamp) v = std::clamp(v, r.lo, r.hi);
        out[i] = v;
    }
    require_finite(out, "predict_x0");
    return out;
}

Tensor reverse_step(const Tensor& y_t, const Tensor& eps_hat, const Tensor& z, int t,
                    const VarianceSchedule& schedule) {
    require_same_shape(y_t, eps_hat, "reverse_step");
    require_same_shape(y_t, z, "reverse_step");
    const auto c = schedule.lookup(t);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(c.alpha);
    const double eps_coef = (1.0 - c.alpha) / std::sqrt(1.0 - c.alpha_bar);
    const double sigma = t == 1 ? 0.0 : c.sigma;
    Tensor out = y_t;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = inv_sqrt_alpha * (y_t[i] - eps_coef * eps_hat[i]);
        if (t != 1) out[i] += sigma * z[i];
    }
    require_finite(out, "reverse_step");
    return out;
}

}  // namespace binoise
