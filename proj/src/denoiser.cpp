// SPDX-License-Identifier: Apache-2.0
#include "binoise/denoiser.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace binoise {

Tensor Denoiser::operator()(const Tensor& y_t, int t, const Tensor* condition) const {
    if (is_conditional() && condition == nullptr) {
        throw std::invalid_argument("conditional denoiser called without a condition");
    }
    if (!is_conditional() && condition != nullptr) {
        throw std::invalid_argument("unconditional denoiser called with a condition");
    }
    Tensor out = eval(y_t, t, condition);
    if (!out.same_shape(y_t)) {
        throw std::logic_error("denoiser output shape " + shape_string(out.shape()) + " differs from input " +
                               shape_string(y_t.shape()));
    }
    out.set_range(y_t.range());
    return out;
}

std::size_t distinct_parameter_count(std::span<const Denoiser* const> models) {
    std::set<const void*> seen;
    std::size_t total = 0;
    for (const Denoiser* m : models) {
        for (const ParameterBlock& block : m->parameter_blocks()) {
            if (seen.insert(block.owner).second) total += block.count;
        }
    }
    return total;
}

GaussianOracleDenoiser::GaussianOracleDenoiser(Tensor mu, double sigma0_sq, VarianceSchedule schedule)
    : mu_(std::move(mu)), sigma0_sq_(sigma0_sq), schedule_(std::move(schedule)) {
    if (!(sigma0_sq_ > 0.0)) throw std::invalid_argument("oracle data variance must be positive");
}

Tensor GaussianOracleDenoiser::posterior_mean(const Tensor& y_t, int t) const {
    require_same_shape(y_t, mu_, "oracle posterior_mean");
    const double abar = schedule_.alpha_bar(t);
    const double root = std::sqrt(abar);
    const double gain = root * sigma0_sq_ / (abar * sigma0_sq_ + 1.0 - abar);
    Tensor mean = y_t;
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] = mu_[i] + gain * (y_t[i] - root * mu_[i]);
    return mean;
}

Tensor GaussianOracleDenoiser::eval(const Tensor& y_t, int t, const Tensor*) const {
    const double abar = schedule_.alpha_bar(t);
    const double root = std::sqrt(abar);
    const double noise = std::sqrt(1.0 - abar);
    const Tensor mean = posterior_mean(y_t, t);
    Tensor eps = y_t;
    for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = (y_t[i] - root * mean[i]) / noise;
    return eps;
}

Tensor oracle_eps(const GaussianOracleDenoiser& oracle, const Tensor& y_t, int t) { return oracle(y_t, t); }

IgnoreConditionView::IgnoreConditionView(const Denoiser& inner) : inner_(inner) {
    if (inner_.is_conditional()) throw std::invalid_argument("IgnoreConditionView wraps an unconditional model");
}

Tensor IgnoreConditionView::eval(const Tensor& y_t, int t, const Tensor*) const { return inner_(y_t, t); }

FixedConditionView::FixedConditionView(const Denoiser& inner, Tensor condition)
    : inner_(inner), condition_(std::move(condition)) {
    if (!inner_.is_conditional()) throw std::invalid_argument("FixedConditionView wraps a conditional model");
}

Tensor FixedConditionView::eval(const Tensor& y_t, int t, const Tensor*) const {
    return inner_(y_t, t, &condition_);
}

}  // namespace binoise
