// SPDX-License-Identifier: Apache-2.0
#include "binoise/training.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "binoise/diffusion.hpp"
#include "binoise/rng.hpp"

namespace binoise {

void TrainConfig::validate() const {
    if (!(lambda_corr >= 0.0) || !std::isfinite(lambda_corr)) throw std::invalid_argument("lambda_corr must be >= 0");
    if (!(ema_alpha >= 0.0 && ema_alpha <= 1.0)) throw std::invalid_argument("ema_alpha must lie in [0, 1]");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw std::invalid_argument("learning_rate must be finite and non-negative");
    }
    if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
    if (steps < 1) throw std::invalid_argument("steps must be positive");
    if (!(null_token_prob >= 0.0 && null_token_prob <= 1.0)) {
        throw std::invalid_argument("null_token_prob must lie in [0, 1]");
    }
}

WeightVector weights_of(const TinyNet& net) {
    const auto w = net.weights();
    return {net.fingerprint(), std::vector<double>(w.begin(), w.end())};
}

double combine_final(double simple, double corr, double lambda_corr) { return simple + lambda_corr * corr; }

namespace {

void write_block(RowMatrix& m, const TinyNet& net, std::size_t b, const Tensor& t) {
    const std::size_t spatial = net.spatial();
    for (std::size_t r = 0; r < net.data_rows(); ++r) {
        for (std::size_t p = 0; p < spatial; ++p) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(b * spatial + p)) = t[r * spatial + p];
        }
    }
}

// Both loss branches for one batch, kept apart so callers can combine them.
struct Branches {
    double simple = 0.0;
    double corr = 0.0;
    ForwardCache cache_y;
    ForwardCache cache_x;
    RowMatrix grad_simple;  // d L_simple / d out_y
    RowMatrix corr_y;       // d L_corr / d out_y
    RowMatrix corr_x;       // d L_corr / d out_x
    bool has_corr = false;
};

Branches evaluate(const TinyNet& net, std::span<const TrainingItem> items, const VarianceSchedule& schedule,
                  bool with_corr) {
    if (items.empty()) throw std::invalid_argument("empty training batch");
    const std::size_t batch = items.size();
    std::vector<Tensor> y_t(batch);
    std::vector<NetInput> inputs(batch);
    RowMatrix target(static_cast<Eigen::Index>(net.data_rows()), static_cast<Eigen::Index>(batch * net.spatial()));
    for (std::size_t b = 0; b < batch; ++b) {
        const TrainingItem& it = items[b];
        if (it.y0 == nullptr) throw std::invalid_argument("training item without a clean target");
        if (net.is_conditional() && it.x0 == nullptr) {
            throw std::invalid_argument("conditional network trained without a condition");
        }
        if (!net.is_conditional() && it.x0 != nullptr) {
            throw std::invalid_argument("unconditional network trained with a condition");
        }
        y_t[b] = forward_sample(*it.y0, it.t, it.eps, schedule);
        inputs[b] = {&y_t[b], it.t, it.null_token ? nullptr : it.x0, it.null_token};
        write_block(target, net, b, it.eps);
    }

    Branches out;
    const RowMatrix pred_y = net.forward_batch(inputs, &out.cache_y);
    const double denom = static_cast<double>(pred_y.size());
    const RowMatrix diff = pred_y - target;
    out.simple = diff.squaredNorm() / denom;
    out.grad_simple = (2.0 / denom) * diff;

    if (with_corr) {
        std::vector<Tensor> x_t(batch);
        std::vector<NetInput> inputs_x = inputs;
        for (std::size_t b = 0; b < batch; ++b) {
            const TrainingItem& it = items[b];
            if (it.x0 == nullptr) throw std::invalid_argument("correction loss needs a degraded condition");
            x_t[b] = forward_sample(*it.x0, it.t, it.eps, schedule);
            inputs_x[b].y_t = &x_t[b];
        }
        const RowMatrix pred_x = net.forward_batch(inputs_x, &out.cache_x);
        RowMatrix gap = pred_x - pred_y;
        const auto spatial = static_cast<Eigen::Index>(net.spatial());
        double total = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
            const double alpha = schedule.alpha(items[b].t);
            auto block = gap.middleCols(static_cast<Eigen::Index>(b) * spatial, spatial);
            total += alpha * block.squaredNorm();
            block *= 2.0 * alpha / denom;
        }
        out.corr = total / denom;
        out.corr_x = gap;
        out.corr_y = -gap;
        out.has_corr = true;
    }
    return out;
}

void add_into(std::vector<double>& acc, const std::vector<double>& g, double scale = 1.0) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += scale * g[i];
}

const TinyNet* as_net(const Denoiser& model) { return dynamic_cast<const TinyNet*>(&model); }

}  // namespace

BatchLoss batch_loss(const TinyNet& net, std::span<const TrainingItem> items, const VarianceSchedule& schedule,
                     double lambda_corr, bool with_corr) {
    Branches br = evaluate(net, items, schedule, with_corr);
    BatchLoss out;
    out.simple = br.simple;
    out.corr = br.corr;
    if (br.has_corr && lambda_corr != 0.0) {
        out.final = combine_final(br.simple, br.corr, lambda_corr);
        const RowMatrix dy = br.grad_simple + lambda_corr * br.corr_y;
        out.grads = net.backward(br.cache_y, dy);
        add_into(out.grads, net.backward(br.cache_x, br.corr_x), lambda_corr);
    } else {
        out.final = br.simple;
        out.grads = net.backward(br.cache_y, br.grad_simple);
    }
    return out;
}

LossResult loss_simple(const Denoiser& model, const Tensor* x0, const Tensor& y0, int t, const Tensor& eps,
                       const VarianceSchedule& schedule) {
    if (const TinyNet* net = as_net(model)) {
        const TrainingItem item{x0, &y0, t, eps, false};
        Branches br = evaluate(*net, std::span<const TrainingItem>(&item, 1), schedule, false);
        return {br.simple, net->backward(br.cache_y, br.grad_simple)};
    }
    const Tensor y_t = forward_sample(y0, t, eps, schedule);
    const Tensor pred = model(y_t, t, x0);
    return {mse(eps, pred), {}};
}

LossResult loss_corr(const Denoiser& model, const Tensor& x0, const Tensor& y0, int t, const Tensor& eps,
                     const VarianceSchedule& schedule) {
    if (const TinyNet* net = as_net(model)) {
        const TrainingItem item{&x0, &y0, t, eps, false};
        Branches br = evaluate(*net, std::span<const TrainingItem>(&item, 1), schedule, true);
        std::vector<double> grads = net->backward(br.cache_y, br.corr_y);
        add_into(grads, net->backward(br.cache_x, br.corr_x));
        return {br.corr, std::move(grads)};
    }
    const Tensor x_t = forward_sample(x0, t, eps, schedule);
    const Tensor y_t = forward_sample(y0, t, eps, schedule);
    return {schedule.alpha(t) * mse(model(x_t, t, &x0), model(y_t, t, &x0)), {}};
}

LossResult loss_final(const Denoiser& model, const Tensor* x0, const Tensor& y0, int t, const Tensor& eps,
                      const VarianceSchedule& schedule, const TrainConfig& cfg) {
    if (cfg.lambda_corr == 0.0 || !cfg.corr_enabled || x0 == nullptr) {
        return loss_simple(model, x0, y0, t, eps, schedule);
    }
    if (const TinyNet* net = as_net(model)) {
        const TrainingItem item{x0, &y0, t, eps, false};
        BatchLoss b = batch_loss(*net, std::span<const TrainingItem>(&item, 1), schedule, cfg.lambda_corr, true);
        return {b.final, std::move(b.grads)};
    }
    const LossResult s = loss_simple(model, x0, y0, t, eps, schedule);
    const LossResult c = loss_corr(model, *x0, y0, t, eps, schedule);
    return {combine_final(s.loss, c.loss, cfg.lambda_corr), {}};
}

WeightVector ema_fuse(const WeightVector& theta, const WeightVector& w_r, double alpha) {
    if (theta.fingerprint != w_r.fingerprint) {
        throw std::invalid_argument("cannot fuse weights of different architectures ('" + theta.fingerprint +
                                    "' vs '" + w_r.fingerprint + "')");
    }
    if (theta.values.size() != w_r.values.size()) throw std::invalid_argument("weight vectors differ in length");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("EMA rate must lie in [0, 1]");
    WeightVector out{theta.fingerprint, std::vector<double>(theta.values.size())};
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] = alpha * theta.values[i] + (1.0 - alpha) * w_r.values[i];
    }
    return out;
}

void adam_step(std::span<double> weights, std::span<const double> grads, AdamState& state, double lr) {
    if (weights.size() != grads.size()) throw std::invalid_argument("adam: weights and gradients differ in size");
    for (double g : grads) {
        if (!std::isfinite(g)) throw std::domain_error("adam: non-finite gradient");
    }
    if (state.m.empty()) {
        state.m.assign(weights.size(), 0.0);
        state.v.assign(weights.size(), 0.0);
    }
    if (state.m.size() != weights.size()) throw std::invalid_argument("adam: optimizer state does not match weights");
    ++state.step;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < weights.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        weights[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

TrainResult train(TinyNet net, std::span<const PairedSample> data, const TrainConfig& cfg,
                  const VarianceSchedule& schedule, const WeightVector* pretrained) {
    cfg.validate();
    if (data.empty()) throw std::invalid_argument("training set is empty");
    if (pretrained != nullptr && pretrained->fingerprint != net.fingerprint()) {
        throw std::invalid_argument("pretrained weights '" + pretrained->fingerprint +
                                    "' do not match the network '" + net.fingerprint() + "'");
    }
    const bool conditional = net.is_conditional();
    const bool with_corr = conditional && cfg.corr_enabled;
    const Shape shape = net.config().data_shape();
    for (const PairedSample& s : data) {
        if (s.y0.shape() != shape) {
            throw std::invalid_argument("training sample " + s.id + " has shape " + shape_string(s.y0.shape()) +
                                        ", network expects " + shape_string(shape));
        }
    }

    NoiseStream rng(derive_seed(cfg.seed, 0x7261696e));
    AdamState adam;
    TrainResult result{std::move(net), {}, 0, pretrained != nullptr};
    TinyNet& model = result.net;
    const auto last_index = static_cast<long>(data.size()) - 1;
    const int T = schedule.timesteps();
    std::vector<TrainingItem> items(static_cast<std::size_t>(cfg.batch_size));
    result.curve.reserve(static_cast<std::size_t>(cfg.steps));

    for (int step = 1; step <= cfg.steps; ++step) {
        for (TrainingItem& it : items) {
            const PairedSample& s = data[static_cast<std::size_t>(rng.uniform_int(0, last_index))];
            it.y0 = &s.y0;
            it.x0 = conditional ? &s.x0 : nullptr;
            it.t = static_cast<int>(rng.uniform_int(1, T));
            it.eps = rng.normal(shape, s.y0.range());
            it.null_token = conditional && rng.uniform() < cfg.null_token_prob;
        }
        BatchLoss loss = batch_loss(model, items, schedule, cfg.lambda_corr, with_corr);
        if (!std::isfinite(loss.final)) {
            std::ostringstream msg;
            msg << "non-finite loss at step " << step << ": " << loss.final;
            throw std::runtime_error(msg.str());
        }
        result.curve.push_back({step, loss.simple, loss.corr, loss.final});
        adam_step(model.mutable_weights(), loss.grads, adam, cfg.learning_rate);
        if (pretrained != nullptr) {
            WeightVector fused = ema_fuse(weights_of(model), *pretrained, cfg.ema_alpha);
            model.set_weights(std::move(fused.values));
        }
        ++result.steps;
    }
    return result;
}

}  // namespace binoise
