// SPDX-License-Identifier: Apache-2.0
#include "binoise/tiny_net.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "binoise/rng.hpp"

namespace binoise {

namespace {

constexpr double kEmbeddingMaxPeriod = 1000.0;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::string to_string(NetKind kind) { return kind == NetKind::mlp ? "mlp" : "conv"; }

NetKind net_kind_from_string(const std::string& name) {
    if (name == "mlp") return NetKind::mlp;
    if (name == "conv") return NetKind::conv;
    throw std::invalid_argument("unknown network kind '" + name + "'");
}

Shape NetConfig::data_shape() const {
    if (kind == NetKind::mlp && height == 1 && width == 1) return {channels};
    return {channels, height, width};
}

NetConfig default_mlp_config(std::size_t dim, bool conditional) {
    NetConfig c;
    c.kind = NetKind::mlp;
    c.channels = dim;
    c.height = 1;
    c.width = 1;
    c.conditional = conditional;
    c.hidden = {256, 256};
    return c;
}

NetConfig default_conv_config(std::size_t channels, std::size_t height, std::size_t width, bool conditional) {
    NetConfig c;
    c.kind = NetKind::conv;
    c.channels = channels;
    c.height = height;
    c.width = width;
    c.conditional = conditional;
    c.hidden = {32, 32};
    return c;
}

std::vector<double> time_embedding(int t, std::size_t dim) {
    std::vector<double> emb(dim, 0.0);
    const std::size_t half = dim / 2;
    for (std::size_t i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(kEmbeddingMaxPeriod) * static_cast<double>(i) / static_cast<double>(half));
        emb[2 * i] = std::sin(t * freq);
        emb[2 * i + 1] = std::cos(t * freq);
    }
    if (dim % 2 == 1) emb[dim - 1] = static_cast<double>(t) / kEmbeddingMaxPeriod;
    return emb;
}

TinyNet::TinyNet(NetConfig config) : config_(std::move(config)) {
    if (config_.channels == 0 || config_.height == 0 || config_.width == 0) {
        throw std::invalid_argument("network data shape must be non-empty");
    }
    const bool mlp = config_.kind == NetKind::mlp;
    data_rows_ = mlp ? config_.channels * config_.height * config_.width : config_.channels;
    spatial_ = mlp ? 1 : config_.height * config_.width;
    const std::size_t kernel = mlp ? 1 : 3;

    std::size_t in = input_channels();
    std::size_t offset = 0;
    std::vector<std::size_t> widths = config_.hidden;
    widths.push_back(data_rows_);
    for (std::size_t out : widths) {
        if (out == 0) throw std::invalid_argument("hidden width must be positive");
        Layer layer{in, out, kernel, offset, offset + out * in * kernel * kernel};
        offset = layer.bias_offset + out;
        layers_.push_back(layer);
        in = out;
    }
    weights_.assign(offset, 0.0);
}

std::size_t TinyNet::input_channels() const {
    std::size_t n = data_rows_ + config_.embed_dim;
    if (config_.conditional) n += data_rows_ + 1;
    return n;
}

std::string TinyNet::fingerprint() const {
    std::ostringstream out;
    out << to_string(config_.kind) << ":c" << config_.channels << ":h" << config_.height << ":w" << config_.width
        << ":cond" << (config_.conditional ? 1 : 0) << ":emb" << config_.embed_dim << ":hidden";
    for (std::size_t i = 0; i < config_.hidden.size(); ++i) out << (i ? "," : "") << config_.hidden[i];
    out << ":silu:params" << weights_.size();
    return out.str();
}

void TinyNet::init(std::uint64_t seed) {
    NoiseStream rng(seed);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        const double fan_in = static_cast<double>(layer.in * layer.kernel * layer.kernel);
        const bool last = l + 1 == layers_.size();
        const double scale = std::sqrt((last ? 1.0 : 2.0) / fan_in);
        for (std::size_t i = layer.weight_offset; i < layer.bias_offset; ++i) weights_[i] = scale * rng.normal();
        for (std::size_t i = layer.bias_offset; i < layer.bias_offset + layer.out; ++i) weights_[i] = 0.0;
    }
    ++version_;
}

std::span<double> TinyNet::mutable_weights() {
    ++version_;
    return weights_;
}

void TinyNet::set_weights(std::vector<double> weights) {
    if (weights.size() != weights_.size()) {
        throw std::invalid_argument("weight vector has " + std::to_string(weights.size()) + " values, network needs " +
                                    std::to_string(weights_.size()));
    }
    weights_ = std::move(weights);
    ++version_;
}

RowMatrix TinyNet::assemble_input(std::span<const NetInput> inputs) const {
    const std::size_t batch = inputs.size();
    const Shape shape = config_.data_shape();
    RowMatrix a = RowMatrix::Zero(static_cast<Eigen::Index>(input_channels()),
                                  static_cast<Eigen::Index>(batch * spatial_));
    for (std::size_t b = 0; b < batch; ++b) {
        const NetInput& in = inputs[b];
        if (in.y_t == nullptr) throw std::invalid_argument("network input missing y_t");
        if (in.y_t->shape() != shape) {
            throw std::invalid_argument("network expects input shape " + shape_string(shape) + ", got " +
                                        shape_string(in.y_t->shape()));
        }
        const std::size_t col0 = b * spatial_;
        std::size_t row = 0;
        for (std::size_t r = 0; r < data_rows_; ++r, ++row) {
            for (std::size_t p = 0; p < spatial_; ++p) a(row, col0 + p) = (*in.y_t)[r * spatial_ + p];
        }
        if (config_.conditional) {
            if (!in.null_token) {
                if (in.condition == nullptr) throw std::invalid_argument("conditional network called without a condition");
                if (in.condition->shape() != shape) {
                    throw std::invalid_argument("condition shape " + shape_string(in.condition->shape()) +
                                                " does not match network condition shape " + shape_string(shape));
                }
                for (std::size_t r = 0; r < data_rows_; ++r) {
                    for (std::size_t p = 0; p < spatial_; ++p) a(row + r, col0 + p) = (*in.condition)[r * spatial_ + p];
                }
            }
            row += data_rows_;
        } else if (in.condition != nullptr || in.null_token) {
            throw std::invalid_argument("unconditional network called with a condition");
        }
        const std::vector<double> emb = time_embedding(in.t, config_.embed_dim);
        for (std::size_t e = 0; e < emb.size(); ++e, ++row) {
            for (std::size_t p = 0; p < spatial_; ++p) a(row, col0 + p) = emb[e];
        }
        if (config_.conditional) {
            const double flag = in.null_token ? 1.0 : 0.0;
            for (std::size_t p = 0; p < spatial_; ++p) a(row, col0 + p) = flag;
        }
    }
    return a;
}

RowMatrix TinyNet::im2col(const RowMatrix& a, std::size_t kernel, std::size_t batch) const {
    if (kernel == 1) return a;
    const auto h = static_cast<long>(config_.height);
    const auto w = static_cast<long>(config_.width);
    const long pad = static_cast<long>(kernel / 2);
    const auto channels = static_cast<std::size_t>(a.rows());
    RowMatrix cols = RowMatrix::Zero(static_cast<Eigen::Index>(channels * kernel * kernel), a.cols());
    for (std::size_t c = 0; c < channels; ++c) {
        const double* src = a.row(static_cast<Eigen::Index>(c)).data();
        for (std::size_t ky = 0; ky < kernel; ++ky) {
            for (std::size_t kx = 0; kx < kernel; ++kx) {
                double* dst = cols.row(static_cast<Eigen::Index>((c * kernel + ky) * kernel + kx)).data();
                const long dy = static_cast<long>(ky) - pad;
                const long dx = static_cast<long>(kx) - pad;
                for (std::size_t b = 0; b < batch; ++b) {
                    const long base = static_cast<long>(b * spatial_);
                    for (long y = 0; y < h; ++y) {
                        const long sy = y + dy;
                        if (sy < 0 || sy >= h) continue;
                        for (long x = 0; x < w; ++x) {
                            const long sx = x + dx;
                            if (sx < 0 || sx >= w) continue;
                            dst[base + y * w + x] = src[base + sy * w + sx];
                        }
                    }
                }
            }
        }
    }
    return cols;
}

RowMatrix TinyNet::col2im(const RowMatrix& cols, std::size_t channels, std::size_t kernel, std::size_t batch) const {
    if (kernel == 1) return cols;
    const auto h = static_cast<long>(config_.height);
    const auto w = static_cast<long>(config_.width);
    const long pad = static_cast<long>(kernel / 2);
    RowMatrix a = RowMatrix::Zero(static_cast<Eigen::Index>(channels), cols.cols());
    for (std::size_t c = 0; c < channels; ++c) {
        double* dst = a.row(static_cast<Eigen::Index>(c)).data();
        for (std::size_t ky = 0; ky < kernel; ++ky) {
            for (std::size_t kx = 0; kx < kernel; ++kx) {
                const double* src = cols.row(static_cast<Eigen::Index>((c * kernel + ky) * kernel + kx)).data();
                const long dy = static_cast<long>(ky) - pad;
                const long dx = static_cast<long>(kx) - pad;
                for (std::size_t b = 0; b < batch; ++b) {
                    const long base = static_cast<long>(b * spatial_);
                    for (long y = 0; y < h; ++y) {
                        const long sy = y + dy;
                        if (sy < 0 || sy >= h) continue;
                        for (long x = 0; x < w; ++x) {
                            const long sx = x + dx;
                            if (sx < 0 || sx >= w) continue;
                            dst[base + sy * w + sx] += src[base + y * w + x];
                        }
                    }
                }
            }
        }
    }
    return a;
}

RowMatrix TinyNet::forward_batch(std::span<const NetInput> inputs, ForwardCache* cache) const {
    if (inputs.empty()) throw std::invalid_argument("forward_batch needs at least one input");
    const std::size_t batch = inputs.size();
    if (cache != nullptr) {
        cache->weights_version = version_;
        cache->batch = batch;
        cache->layer_inputs.clear();
        cache->pre_activations.clear();
    }
    RowMatrix a = assemble_input(inputs);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        const std::size_t fan_in = layer.in * layer.kernel * layer.kernel;
        Eigen::Map<const RowMatrix> w(weights_.data() + layer.weight_offset, static_cast<Eigen::Index>(layer.out),
                                      static_cast<Eigen::Index>(fan_in));
        Eigen::Map<const Eigen::VectorXd> bias(weights_.data() + layer.bias_offset, static_cast<Eigen::Index>(layer.out));
        RowMatrix cols = im2col(a, layer.kernel, batch);
        RowMatrix z = w * cols;
        z.colwise() += bias;
        const bool last = l + 1 == layers_.size();
        if (cache != nullptr) {
            cache->layer_inputs.push_back(std::move(cols));
            if (!last) cache->pre_activations.push_back(z);
        }
        if (last) {
            a = std::move(z);
        } else {
            a = z.unaryExpr([](double x) { return x * sigmoid(x); });
        }
    }
    return a;
}

std::vector<double> TinyNet::backward(const ForwardCache& cache, const RowMatrix& output_grad) const {
    if (cache.empty()) throw std::logic_error("backward called without a recorded forward pass");
    if (cache.weights_version != version_) throw std::logic_error("backward called with a stale activation cache");
    if (cache.layer_inputs.size() != layers_.size()) throw std::logic_error("activation cache does not match network");
    if (output_grad.rows() != static_cast<Eigen::Index>(data_rows_) ||
        output_grad.cols() != static_cast<Eigen::Index>(cache.batch * spatial_)) {
        throw std::invalid_argument("output gradient shape does not match the cached forward pass");
    }
    std::vector<double> grads(weights_.size(), 0.0);
    RowMatrix dz = output_grad;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const Layer& layer = layers_[l];
        const std::size_t fan_in = layer.in * layer.kernel * layer.kernel;
        const RowMatrix& cols = cache.layer_inputs[l];
        Eigen::Map<RowMatrix> dw(grads.data() + layer.weight_offset, static_cast<Eigen::Index>(layer.out),
                                 static_cast<Eigen::Index>(fan_in));
        Eigen::Map<Eigen::VectorXd> db(grads.data() + layer.bias_offset, static_cast<Eigen::Index>(layer.out));
        dw.noalias() = dz * cols.transpose();
        db = dz.rowwise().sum();
        if (l == 0) break;
        Eigen::Map<const RowMatrix> w(weights_.data() + layer.weight_offset, static_cast<Eigen::Index>(layer.out),
                                      static_cast<Eigen::Index>(fan_in));
        RowMatrix dcols = w.transpose() * dz;
        RowMatrix da = col2im(dcols, layer.in, layer.kernel, cache.batch);
        const RowMatrix& z = cache.pre_activations[l - 1];
        dz = da.cwiseProduct(z.unaryExpr([](double x) {
            const double s = sigmoid(x);
            return s * (1.0 + x * (1.0 - s));
        }));
    }
    return grads;
}

Tensor TinyNet::output_tensor(const RowMatrix& out, std::size_t b, ValueRange range) const {
    Tensor t(config_.data_shape(), 0.0, range);
    const std::size_t col0 = b * spatial_;
    for (std::size_t r = 0; r < data_rows_; ++r) {
        for (std::size_t p = 0; p < spatial_; ++p) {
            t[r * spatial_ + p] = out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col0 + p));
        }
    }
    return t;
}

Tensor TinyNet::forward(const Tensor& y_t, int t, const Tensor* condition, bool null_token) const {
    const NetInput input{&y_t, t, condition, null_token};
    const RowMatrix out = forward_batch(std::span<const NetInput>(&input, 1));
    Tensor result = output_tensor(out, 0, y_t.range());
    require_finite(result, "net_forward");
    return result;
}

Tensor TinyNet::eval(const Tensor& y_t, int t, const Tensor* condition) const {
    return forward(y_t, t, condition, false);
}

void TinyNet::mask_input(InputPart part) {
    std::size_t first = 0;
    std::size_t count = 0;
    switch (part) {
        case InputPart::data:
            first = 0;
            count = data_rows_;
            break;
        case InputPart::condition:
            if (!config_.conditional) throw std::invalid_argument("unconditional network has no condition input");
            first = data_rows_;
            count = data_rows_;
            break;
        case InputPart::time_embedding:
            first = config_.conditional ? 2 * data_rows_ : data_rows_;
            count = config_.embed_dim;
            break;
        case InputPart::null_flag:
            if (!config_.conditional) throw std::invalid_argument("unconditional network has no null-token flag");
            first = 2 * data_rows_ + config_.embed_dim;
            count = 1;
            break;
    }
    const Layer& layer = layers_.front();
    const std::size_t taps = layer.kernel * layer.kernel;
    const std::size_t fan_in = layer.in * taps;
    for (std::size_t o = 0; o < layer.out; ++o) {
        for (std::size_t c = first; c < first + count; ++c) {
            for (std::size_t k = 0; k < taps; ++k) weights_[layer.weight_offset + o * fan_in + c * taps + k] = 0.0;
        }
    }
    ++version_;
}

NullTokenView::NullTokenView(const TinyNet& net) : net_(net) {
    if (!net_.is_conditional()) throw std::invalid_argument("null-token view needs a conditional network");
}

Tensor NullTokenView::eval(const Tensor& y_t, int t, const Tensor*) const { return net_.forward(y_t, t, nullptr, true); }

NullTokenView with_null_token(const TinyNet& net) { return NullTokenView(net); }

}  // namespace binoise
