// SPDX-License-Identifier: Apache-2.0
#include "binoise/guidance.hpp"

#include <stdexcept>

#include "binoise/diffusion.hpp"
#include "binoise/rng.hpp"

namespace binoise {

std::string to_string(SamplerMode mode) {
    switch (mode) {
        case SamplerMode::plain: return "plain";
        case SamplerMode::conditional: return "conditional";
        case SamplerMode::cdp: return "cdp";
        case SamplerMode::binoising: return "binoising";
        case SamplerMode::binoising_null: return "binoising_null";
    }
    return "unknown";
}

SamplerMode sampler_mode_from_string(const std::string& name) {
    for (SamplerMode m : {SamplerMode::plain, SamplerMode::conditional, SamplerMode::cdp, SamplerMode::binoising,
                          SamplerMode::binoising_null}) {
        if (to_string(m) == name) return m;
    }
    throw std::invalid_argument("unknown sampler mode '" + name + "'");
}

SamplerSpec::SamplerSpec(SamplerMode mode_, VarianceSchedule schedule_) : mode(mode_), schedule(std::move(schedule_)) {}

void SamplerSpec::validate() const {
    if (mode == SamplerMode::cdp) {
        if (!cdp_factor) throw std::invalid_argument("cdp sampling needs a downsample factor");
        if (*cdp_factor < 1) throw std::invalid_argument("cdp downsample factor must be positive");
    } else if (cdp_factor) {
        throw std::invalid_argument("downsample factor is only used by cdp sampling");
    }
    const bool binoise = mode == SamplerMode::binoising || mode == SamplerMode::binoising_null;
    if (!binoise && (binoise_from || binoise_until)) {
        throw std::invalid_argument("bi-noising range is only used by bi-noising modes");
    }
    const int T = schedule.timesteps();
    const int from = binoise_from.value_or(T);
    const int until = binoise_until.value_or(1);
    if (binoise && (until < 1 || from > T || until > from)) {
        throw std::invalid_argument("bi-noising range must satisfy 1 <= until <= from <= T");
    }
}

Tensor lowpass_project(const Tensor& img, int factor) {
    const ImageDims d = image_dims(img);
    if (factor < 1) throw std::invalid_argument("low-pass factor must be positive");
    const auto f = static_cast<std::size_t>(factor);
    if (d.height % f != 0 || d.width % f != 0) {
        throw std::invalid_argument("image " + shape_string(img.shape()) + " not divisible by factor " +
                                    std::to_string(factor));
    }
    if (f == 1) return img;
    Tensor out = img;
    const double inv = 1.0 / static_cast<double>(f * f);
    for (std::size_t c = 0; c < d.channels; ++c) {
        for (std::size_t by = 0; by < d.height; by += f) {
            for (std::size_t bx = 0; bx < d.width; bx += f) {
                double sum = 0.0;
                for (std::size_t y = by; y < by + f; ++y) {
                    for (std::size_t x = bx; x < bx + f; ++x) sum += img.at(c, y, x);
                }
                const double mean = sum * inv;
                for (std::size_t y = by; y < by + f; ++y) {
                    for (std::size_t x = bx; x < bx + f; ++x) out.at(c, y, x) = mean;
                }
            }
        }
    }
    return out;
}

Tensor plain_step(const Denoiser& model, const Tensor& y_t, const Tensor* x0, const Tensor& z, int t,
                  const VarianceSchedule& schedule, Tensor* x0_pred) {
    const Tensor eps_hat = model(y_t, t, x0);
    if (x0_pred != nullptr) *x0_pred = predict_x0(y_t, eps_hat, t, schedule, false);
    return reverse_step(y_t, eps_hat, z, t, schedule);
}

Tensor binoising_step(const Denoiser& cond, const Denoiser& uncond, const Tensor& x0, const Tensor& y_t, int t,
                      const Tensor& renoise, const Tensor& z, const VarianceSchedule& schedule, bool clamp_x0,
                      Tensor* x0_pred) {
    const Tensor eps_cond = cond(y_t, t, &x0);
    const Tensor implicit = predict_x0(y_t, eps_cond, t, schedule, clamp_x0);
    const Tensor renoised = forward_sample(implicit, t, renoise, schedule);
    const Tensor eps_uncond = uncond(renoised, t);
    if (x0_pred != nullptr) *x0_pred = implicit;
    return reverse_step(renoised, eps_uncond, z, t, schedule);
}

Tensor cdp_step(const Denoiser& uncond, const Tensor& x0, const Tensor& y_t, int t, const Tensor& z,
                const Tensor& cond_noise, int factor, const VarianceSchedule& schedule, Tensor* x0_pred) {
    require_same_shape(x0, y_t, "cdp_step");
    const Tensor proposal = plain_step(uncond, y_t, nullptr, z, t, schedule, x0_pred);
    const Tensor target = t > 1 ? forward_sample(x0, t - 1, cond_noise, schedule) : x0;
    const Tensor target_low = lowpass_project(target, factor);
    const Tensor proposal_low = lowpass_project(proposal, factor);
    Tensor out = proposal;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += target_low[i] - proposal_low[i];
    require_finite(out, "cdp_step");
    return out;
}

namespace {

void require_unconditional(const Denoiser& model, const char* what) {
    if (model.is_conditional()) throw std::invalid_argument(std::string(what) + " needs an unconditional model");
}

void require_conditional(const Denoiser& model, const char* what) {
    if (!model.is_conditional()) throw std::invalid_argument(std::string(what) + " needs a conditional model");
}

void require_condition_shape(const Tensor& x0, const Shape& shape, const char* what) {
    if (x0.shape() != shape) {
        throw std::invalid_argument(std::string(what) + ": condition shape " + shape_string(x0.shape()) +
                                    " does not match sample shape " + shape_string(shape));
    }
}

void record(TraceRecord* trace, int t, const Tensor& y_t, Tensor x0_pred) {
    if (trace != nullptr) trace->push_back({t, y_t, std::move(x0_pred)});
}

}  // namespace

Tensor sample_plain(const Denoiser& model, const SamplerSpec& spec, const Shape& shape, TraceRecord* trace) {
    require_unconditional(model, "plain sampling");
    spec.validate();
    NoiseStream rng(spec.seed);
    Tensor y = rng.normal(shape);
    for (int t = spec.schedule.timesteps(); t >= 1; --t) {
        const Tensor z = rng.normal(shape);
        Tensor pred;
        Tensor next = plain_step(model, y, nullptr, z, t, spec.schedule, trace ? &pred : nullptr);
        record(trace, t, y, std::move(pred));
        y = std::move(next);
    }
    return y;
}

Tensor sample_conditional(const Denoiser& model, const Tensor& x0, const SamplerSpec& spec, const Shape& shape,
                          TraceRecord* trace) {
    require_conditional(model, "conditional sampling");
    require_condition_shape(x0, shape, "conditional sampling");
    spec.validate();
    NoiseStream rng(spec.seed);
    Tensor y = rng.normal(shape, x0.range());
    for (int t = spec.schedule.timesteps(); t >= 1; --t) {
        const Tensor z = rng.normal(shape, x0.range());
        Tensor pred;
        Tensor next = plain_step(model, y, &x0, z, t, spec.schedule, trace ? &pred : nullptr);
        record(trace, t, y, std::move(pred));
        y = std::move(next);
    }
    return y;
}

Tensor sample_cdp(const Denoiser& model, const Tensor& x0, const SamplerSpec& spec, const Shape& shape,
                  TraceRecord* trace) {
    require_unconditional(model, "cdp sampling");
    require_condition_shape(x0, shape, "cdp sampling");
    if (!spec.cdp_factor) throw std::invalid_argument("cdp sampling needs a downsample factor");
    spec.validate();
    NoiseStream rng(spec.seed);
    Tensor y = rng.normal(shape, x0.range());
    for (int t = spec.schedule.timesteps(); t >= 1; --t) {
        const Tensor z = rng.normal(shape, x0.range());
        const Tensor cond_noise = rng.normal(shape, x0.range());
        Tensor pred;
        Tensor next = cdp_step(model, x0, y, t, z, cond_noise, *spec.cdp_factor, spec.schedule, trace ? &pred : nullptr);
        record(trace, t, y, std::move(pred));
        y = std::move(next);
    }
    return y;
}

namespace {

Tensor run_binoising(const Denoiser& cond, const Denoiser& uncond, const Tensor& x0, const SamplerSpec& spec,
                     const Shape& shape, TraceRecord* trace) {
    require_conditional(cond, "bi-noising");
    require_unconditional(uncond, "bi-noising prior");
    require_condition_shape(x0, shape, "bi-noising");
    spec.validate();
    const int T = spec.schedule.timesteps();
    const int from = spec.binoise_from.value_or(T);
    const int until = spec.binoise_until.value_or(1);
    NoiseStream rng(spec.seed);
    Tensor y = rng.normal(shape, x0.range());
    for (int t = T; t >= 1; --t) {
        Tensor pred;
        Tensor next;
        if (t <= from && t >= until) {
            const Tensor renoise = rng.normal(shape, x0.range());
            const Tensor z = rng.normal(shape, x0.range());
            next = binoising_step(cond, uncond, x0, y, t, renoise, z, spec.schedule, spec.clamp_x0,
                                  trace ? &pred : nullptr);
        } else {
            const Tensor z = rng.normal(shape, x0.range());
            next = plain_step(cond, y, &x0, z, t, spec.schedule, trace ? &pred : nullptr);
        }
        record(trace, t, y, std::move(pred));
        y = std::move(next);
    }
    return y;
}

}  // namespace

Tensor sample_binoising(const Denoiser& cond, const Denoiser& uncond, const Tensor& x0, const SamplerSpec& spec,
                        const Shape& shape, TraceRecord* trace) {
    return run_binoising(cond, uncond, x0, spec, shape, trace);
}

Tensor sample_binoising_null(const TinyNet& cond, const Tensor& x0, const SamplerSpec& spec, const Shape& shape,
                             TraceRecord* trace) {
    const NullTokenView prior = with_null_token(cond);
    return run_binoising(cond, prior, x0, spec, shape, trace);
}

Tensor sample(const SamplerSpec& spec, const SamplerModels& models, const Tensor* x0, const Shape& shape,
              TraceRecord* trace) {
    auto need = [](const void* p, const char* what) {
        if (p == nullptr) throw std::invalid_argument(std::string("sampler mode needs ") + what);
    };
    switch (spec.mode) {
        case SamplerMode::plain:
            need(models.uncond, "an unconditional model");
            return sample_plain(*models.uncond, spec, shape, trace);
        case SamplerMode::conditional:
            need(models.cond, "a conditional model");
            need(x0, "a condition");
            return sample_conditional(*models.cond, *x0, spec, shape, trace);
        case SamplerMode::cdp:
            need(models.uncond, "an unconditional model");
            need(x0, "a condition");
            return sample_cdp(*models.uncond, *x0, spec, shape, trace);
        case SamplerMode::binoising:
            need(models.cond, "a conditional model");
            need(models.uncond, "an unconditional model");
            need(x0, "a condition");
            return sample_binoising(*models.cond, *models.uncond, *x0, spec, shape, trace);
        case SamplerMode::binoising_null:
            need(models.cond_net, "a conditional network with null-token support");
            need(x0, "a condition");
            return sample_binoising_null(*models.cond_net, *x0, spec, shape, trace);
    }
    throw std::logic_error("unhandled sampler mode");
}

std::size_t sampler_parameter_count(SamplerMode mode, const SamplerModels& models) {
    std::vector<const Denoiser*> used;
    switch (mode) {
        case SamplerMode::plain:
        case SamplerMode::cdp:
            if (models.uncond) used.push_back(models.uncond);
            break;
        case SamplerMode::conditional:
            if (models.cond) used.push_back(models.cond);
            break;
        case SamplerMode::binoising:
            if (models.cond) used.push_back(models.cond);
            if (models.uncond) used.push_back(models.uncond);
            break;
        case SamplerMode::binoising_null:
            break;
    }
    if (mode == SamplerMode::binoising_null && models.cond_net) {
        const NullTokenView prior = with_null_token(*models.cond_net);
        std::vector<const Denoiser*> both{models.cond_net, &prior};
        return distinct_parameter_count(both);
    }
    return distinct_parameter_count(used);
}

}  // namespace binoise
