// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "binoise/denoiser.hpp"
#include "binoise/schedule.hpp"
#include "binoise/tasks.hpp"
#include "binoise/tiny_net.hpp"

namespace binoise {

inline constexpr double kDefaultLambdaCorr = 0.001;

struct TrainConfig {
    double lambda_corr = kDefaultLambdaCorr;
    double ema_alpha = 0.999;
    double learning_rate = 1e-3;
    int batch_size = 8;
    int steps = 5000;
    std::uint64_t seed = 1;
    bool corr_enabled = true;
    /// Probability of replacing a batch element's condition with the null
    /// token (conditional nets only). 1.0 trains a prior in the conditional
    /// architecture.
    double null_token_prob = 0.1;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

/// Flat parameters plus the fingerprint of the architecture they belong to.
struct WeightVector {
    std::string fingerprint;
    std::vector<double> values;
};

WeightVector weights_of(const TinyNet& net);

/// Loss value with its weight gradient. `grads` is empty when the model is
/// not a TinyNet (e.g. a test stub).
struct LossResult {
    double loss = 0.0;
    std::vector<double> grads;
};

/// mean((eps - model(forward_sample(y0, t, eps), t, x0))^2). Pass x0 = null
/// for unconditional models.
LossResult loss_simple(const Denoiser& model, const Tensor* x0, const Tensor& y0, int t, const Tensor& eps,
                       const VarianceSchedule& schedule);

/// alpha_t * mean((model(x_t, t, x0) - model(y_t, t, x0))^2) with x_t and y_t
/// noised from x0 and y0 by the same eps. Gradients flow through both branches.
LossResult loss_corr(const Denoiser& model, const Tensor& x0, const Tensor& y0, int t, const Tensor& eps,
                     const VarianceSchedule& schedule);

/// loss_simple + lambda_corr * loss_corr. With lambda_corr = 0 (or corr
/// disabled, or no condition) the result is loss_simple unchanged.
LossResult loss_final(const Denoiser& model, const Tensor* x0, const Tensor& y0, int t, const Tensor& eps,
                      const VarianceSchedule& schedule, const TrainConfig& cfg);

/// L_simple + lambda * L_corr.
double combine_final(double simple, double corr, double lambda_corr);

/// One element of a training batch.
struct TrainingItem {
    const Tensor* x0 = nullptr;
    const Tensor* y0 = nullptr;
    int t = 1;
    Tensor eps;
    bool null_token = false;
};

struct BatchLoss {
    double simple = 0.0;
    double corr = 0.0;
    double final = 0.0;
    std::vector<double> grads;
};

/// Batched losses, each averaged over batch and elements. L_corr is evaluated
/// when `with_corr`; its gradient is added only when lambda_corr != 0.
BatchLoss batch_loss(const TinyNet& net, std::span<const TrainingItem> items, const VarianceSchedule& schedule,
                     double lambda_corr, bool with_corr);

/// W' = alpha * theta + (1 - alpha) * w_r.
WeightVector ema_fuse(const WeightVector& theta, const WeightVector& w_r, double alpha);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Bias-corrected Adam update in place.
void adam_step(std::span<double> weights, std::span<const double> grads, AdamState& state, double lr);

struct LossRow {
    long step;
    double simple;
    double corr;
    double final;
};

struct TrainResult {
    TinyNet net;
    std::vector<LossRow> curve;
    long steps = 0;
    bool ema_fused = false;
};

/// `steps` iterations of: draw a batch (uniform indices, uniform t, fresh
/// eps), loss_final, Adam, then EMA fusion toward `pretrained` if given.
/// Throws std::runtime_error on a non-finite loss.
TrainResult train(TinyNet net, std::span<const PairedSample> data, const TrainConfig& cfg,
                  const VarianceSchedule& schedule, const WeightVector* pretrained = nullptr);

}  // namespace binoise
