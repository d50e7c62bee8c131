// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

namespace binoise {

/// Parameters a schedule is rebuilt from; this is what gets serialized.
struct ScheduleParams {
    std::string kind = "linear";
    int timesteps = 100;
    double beta_start = 1e-3;
    double beta_end = 0.2;

    bool operator==(const ScheduleParams&) const = default;
};

/// Default parameters for `timesteps` steps: the 1000-step DDPM range
/// [1e-4, 0.02] rescaled by 1000 / timesteps, with both ends capped at
/// kMaxDefaultBeta.
inline constexpr double kMaxDefaultBeta = 0.5;
ScheduleParams default_schedule_params(int timesteps = 100);

/// Diffusion coefficients at one timestep.
struct StepCoefficients {
    double beta;
    double alpha;
    double alpha_bar;
    double sigma;
};

/// Variance schedule beta_1..beta_T and its derived tables. Timesteps are
/// 1-indexed; there is no t = 0 entry. Immutable after construction.
class VarianceSchedule {
public:
    /// Linear interpolation of beta over t = 1..T, endpoints inclusive.
    static VarianceSchedule linear(int timesteps, double beta_start, double beta_end);
    static VarianceSchedule from_params(const ScheduleParams& params);

    int timesteps() const { return static_cast<int>(betas_.size()); }

    /// Throws std::out_of_range unless 1 <= t <= T.
    StepCoefficients lookup(int t) const;
    double beta(int t) const { return lookup(t).beta; }
    double alpha(int t) const { return lookup(t).alpha; }
    double alpha_bar(int t) const { return lookup(t).alpha_bar; }
    double sigma(int t) const { return lookup(t).sigma; }

    std::span<const double> betas() const { return betas_; }
    std::span<const double> alphas() const { return alphas_; }
    std::span<const double> alpha_bars() const { return alpha_bars_; }
    std::span<const double> sigmas() const { return sigmas_; }

    const ScheduleParams& params() const { return params_; }

private:
    VarianceSchedule() = default;

    ScheduleParams params_;
    std::vector<double> betas_;
    std::vector<double> alphas_;
    std::vector<double> alpha_bars_;
    std::vector<double> sigmas_;
};

}  // namespace binoise
