// SPDX-License-Identifier: Apache-2.0
#include "binoise/schedule.hpp"

#include <cmath>
#include <algorithm>
#include <stdexcept>

namespace binoise {

ScheduleParams default_schedule_params(int timesteps) {
    if (timesteps < 1) throw std::invalid_argument("schedule needs at least one timestep");
    const double scale = 1000.0 / timesteps;
    ScheduleParams p;
    p.kind = "linear";
    p.timesteps = timesteps;
    // Short chains would push beta past 1; the cap keeps them valid.
    p.beta_end = std::min(scale * 0.02, kMaxDefaultBeta);
    p.beta_start = std::min(scale * 1e-4, p.beta_end);
    return p;
}

VarianceSchedule VarianceSchedule::linear(int timesteps, double beta_start, double beta_end) {
    if (timesteps < 1) throw std::invalid_argument("schedule needs at least one timestep");
    if (!(beta_start > 0.0) || !(beta_end < 1.0) || !(beta_start <= beta_end)) {
        throw std::invalid_argument("betas must satisfy 0 < beta_start <= beta_end < 1");
    }
    VarianceSchedule s;
    s.params_ = {"linear", timesteps, beta_start, beta_end};
    const auto n = static_cast<std::size_t>(timesteps);
    s.betas_.resize(n);
    s.alphas_.resize(n);
    s.alpha_bars_.resize(n);
    s.sigmas_.resize(n);
    double running = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double frac = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
        const double beta = beta_start + (beta_end - beta_start) * frac;
        s.betas_[i] = beta;
        s.alphas_[i] = 1.0 - beta;
        running *= s.alphas_[i];
        s.alpha_bars_[i] = running;
        s.sigmas_[i] = std::sqrt(beta);
    }
    return s;
}

VarianceSchedule VarianceSchedule::from_params(const ScheduleParams& params) {
    if (params.kind != "linear") throw std::invalid_argument("unsupported schedule kind '" + params.kind + "'");
    return linear(params.timesteps, params.beta_start, params.beta_end);
}

StepCoefficients VarianceSchedule::lookup(int t) const {
    if (t < 1 || t > timesteps()) {
        throw std::out_of_range("timestep " + std::to_string(t) + " outside [1, " + std::to_string(timesteps()) + "]");
    }
    const auto i = static_cast<std::size_t>(t - 1);
    return {betas_[i], alphas_[i], alpha_bars_[i], sigmas_[i]};
}

}  // namespace binoise
