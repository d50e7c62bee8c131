// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "binoise/denoiser.hpp"
#include "binoise/schedule.hpp"
#include "binoise/tensor.hpp"
#include "binoise/tiny_net.hpp"

namespace binoise {

enum class SamplerMode { plain, conditional, cdp, binoising, binoising_null };

std::string to_string(SamplerMode mode);
SamplerMode sampler_mode_from_string(const std::string& name);

struct SamplerSpec {
    SamplerSpec(SamplerMode mode, VarianceSchedule schedule);

    SamplerMode mode;
    VarianceSchedule schedule;
    /// Clip the implicit prediction during bi-noising.
    bool clamp_x0 = true;
    /// Low-pass factor, cdp only.
    std::optional<int> cdp_factor;
    std::uint64_t seed = 0;
    /// Bi-noising is applied for binoise_until <= t <= binoise_from; other
    /// steps fall back to the plain conditional step. Unset means 1..T.
    std::optional<int> binoise_from;
    std::optional<int> binoise_until;

    /// Throws std::invalid_argument when a mode-specific field is missing or
    /// set for a mode that does not use it.
    void validate() const;
};

/// One captured reverse step: the state entering step t and the implicit
/// clean prediction made at that step.
struct TraceStep {
    int t;
    Tensor y_t;
    Tensor x0_pred;
};
using TraceRecord = std::vector<TraceStep>;

/// Box-downsample by `factor`, then nearest-upsample back to the input size.
Tensor lowpass_project(const Tensor& img, int factor);

// Single-step building blocks. Noise is explicit so the algebra is testable.

Tensor plain_step(const Denoiser& model, const Tensor& y_t, const Tensor* x0, const Tensor& z, int t,
                  const VarianceSchedule& schedule, Tensor* x0_pred = nullptr);

/// Conditional implicit prediction, re-noise with `renoise`, unconditional
/// reverse step with `z`.
Tensor binoising_step(const Denoiser& cond, const Denoiser& uncond, const Tensor& x0, const Tensor& y_t, int t,
                      const Tensor& renoise, const Tensor& z, const VarianceSchedule& schedule, bool clamp_x0,
                      Tensor* x0_pred = nullptr);

/// Unconditional reverse step followed by the low-pass residual correction
/// toward the condition noised to t - 1 with `cond_noise` (un-noised at t = 1).
Tensor cdp_step(const Denoiser& uncond, const Tensor& x0, const Tensor& y_t, int t, const Tensor& z,
                const Tensor& cond_noise, int factor, const VarianceSchedule& schedule, Tensor* x0_pred = nullptr);

// Full samplers. Each is a pure function of (weights, condition, spec.seed).

Tensor sample_plain(const Denoiser& model, const SamplerSpec& spec, const Shape& shape, TraceRecord* trace = nullptr);

Tensor sample_conditional(const Denoiser& model, const Tensor& x0, const SamplerSpec& spec, const Shape& shape,
                          TraceRecord* trace = nullptr);

Tensor sample_cdp(const Denoiser& model, const Tensor& x0, const SamplerSpec& spec, const Shape& shape,
                  TraceRecord* trace = nullptr);

Tensor sample_binoising(const Denoiser& cond, const Denoiser& uncond, const Tensor& x0, const SamplerSpec& spec,
                        const Shape& shape, TraceRecord* trace = nullptr);

/// sample_binoising with the unconditional model being cond's null-token view.
Tensor sample_binoising_null(const TinyNet& cond, const Tensor& x0, const SamplerSpec& spec, const Shape& shape,
                             TraceRecord* trace = nullptr);

/// Models available to `sample`; which ones are required depends on the mode.
struct SamplerModels {
    const Denoiser* cond = nullptr;
    const Denoiser* uncond = nullptr;
    const TinyNet* cond_net = nullptr;
};

/// Dispatches on spec.mode. `x0` may be null for plain sampling.
Tensor sample(const SamplerSpec& spec, const SamplerModels& models, const Tensor* x0, const Shape& shape,
              TraceRecord* trace = nullptr);

/// Distinct weights used by a mode with the given models.
std::size_t sampler_parameter_count(SamplerMode mode, const SamplerModels& models);

}  // namespace binoise
