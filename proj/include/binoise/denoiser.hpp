// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "binoise/schedule.hpp"
#include "binoise/tensor.hpp"

namespace binoise {

/// A contiguous run of weights owned by some model. Views that share weights
/// report the same owner, which is how shared parameters are counted once.
struct ParameterBlock {
    const void* owner;
    std::size_t count;
};

/// Noise predictor eps(y_t, t, condition?). The output always has y_t's shape.
class Denoiser {
public:
    virtual ~Denoiser() = default;

    virtual bool is_conditional() const = 0;

    /// Checks the condition contract, evaluates, and checks the output shape.
    /// A conditional model requires a condition, an unconditional one rejects it.
    Tensor operator()(const Tensor& y_t, int t, const Tensor* condition = nullptr) const;

    virtual std::vector<ParameterBlock> parameter_blocks() const { return {}; }

protected:
    virtual Tensor eval(const Tensor& y_t, int t, const Tensor* condition) const = 0;
};

/// Number of distinct weights across the given models.
std::size_t distinct_parameter_count(std::span<const Denoiser* const> models);

/// Exact posterior-mean noise predictor for data ~ N(mu, sigma0_sq * I).
class GaussianOracleDenoiser final : public Denoiser {
public:
    GaussianOracleDenoiser(Tensor mu, double sigma0_sq, VarianceSchedule schedule);

    bool is_conditional() const override { return false; }

    /// E[y0 | y_t] under the Gaussian data law.
    Tensor posterior_mean(const Tensor& y_t, int t) const;

    const Tensor& mu() const { return mu_; }
    double sigma0_sq() const { return sigma0_sq_; }

protected:
    Tensor eval(const Tensor& y_t, int t, const Tensor* condition) const override;

private:
    Tensor mu_;
    double sigma0_sq_;
    VarianceSchedule schedule_;
};

/// oracle_eps: (y_t - sqrt(abar_t) E[y0|y_t]) / sqrt(1 - abar_t).
Tensor oracle_eps(const GaussianOracleDenoiser& oracle, const Tensor& y_t, int t);

/// Presents an unconditional model as a conditional one that ignores its condition.
class IgnoreConditionView final : public Denoiser {
public:
    explicit IgnoreConditionView(const Denoiser& inner);

    bool is_conditional() const override { return true; }
    std::vector<ParameterBlock> parameter_blocks() const override { return inner_.parameter_blocks(); }

protected:
    Tensor eval(const Tensor& y_t, int t, const Tensor* condition) const override;

private:
    const Denoiser& inner_;
};

/// Presents a conditional model as an unconditional one by always feeding it
/// the same condition tensor.
class FixedConditionView final : public Denoiser {
public:
    FixedConditionView(const Denoiser& inner, Tensor condition);

    bool is_conditional() const override { return false; }
    std::vector<ParameterBlock> parameter_blocks() const override { return inner_.parameter_blocks(); }

protected:
    Tensor eval(const Tensor& y_t, int t, const Tensor* condition) const override;

private:
    const Denoiser& inner_;
    Tensor condition_;
};

}  // namespace binoise
