// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "binoise/denoiser.hpp"
#include "binoise/tensor.hpp"

namespace binoise {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class NetKind { mlp, conv };

std::string to_string(NetKind kind);
NetKind net_kind_from_string(const std::string& name);

/// Architecture of a TinyNet.
///
/// The network input is the concatenation, along the channel axis, of
///   data (y_t) | condition (same shape as data, conditional nets only) |
///   sinusoidal time embedding | null-token flag (conditional nets only).
/// The embedding and flag are broadcast over pixels for conv nets. An mlp
/// flattens the data to one feature vector and uses dense layers; a conv net
/// uses 3x3 same-padded convolutions. SiLU between layers, linear output.
struct NetConfig {
    NetKind kind = NetKind::conv;
    std::size_t channels = 3;
    std::size_t height = 16;
    std::size_t width = 16;
    bool conditional = false;
    std::size_t embed_dim = 8;
    std::vector<std::size_t> hidden = {32, 32};

    Shape data_shape() const;
    bool operator==(const NetConfig&) const = default;
};

/// Two dense hidden layers of width 256 over a flat vector of `dim` values.
NetConfig default_mlp_config(std::size_t dim, bool conditional);
/// Three 3x3 convolutions over a channels x height x width image.
NetConfig default_conv_config(std::size_t channels, std::size_t height, std::size_t width, bool conditional);

/// Sinusoidal embedding of timestep t, `dim` values (sin/cos pairs).
std::vector<double> time_embedding(int t, std::size_t dim);

/// Slices of the network input, for masking pathways.
enum class InputPart { data, condition, time_embedding, null_flag };

/// One batch element fed to forward_batch.
struct NetInput {
    const Tensor* y_t = nullptr;
    int t = 1;
    const Tensor* condition = nullptr;
    bool null_token = false;
};

/// Activations recorded by forward_batch and consumed by backward.
struct ForwardCache {
    std::uint64_t weights_version = 0;
    std::size_t batch = 0;
    std::vector<RowMatrix> layer_inputs;  // im2col'd inputs per layer
    std::vector<RowMatrix> pre_activations;

    bool empty() const { return layer_inputs.empty(); }
};

/// Small trainable noise predictor with hand-written backpropagation.
class TinyNet final : public Denoiser {
public:
    explicit TinyNet(NetConfig config);

    /// Fills weights from a seeded He-style initialization, biases zero.
    void init(std::uint64_t seed);

    const NetConfig& config() const { return config_; }
    std::string fingerprint() const;
    std::size_t parameter_count() const { return weights_.size(); }
    std::size_t input_channels() const;
    /// Rows and columns-per-element of the forward_batch output layout.
    std::size_t data_rows() const { return data_rows_; }
    std::size_t spatial() const { return spatial_; }

    std::span<const double> weights() const { return weights_; }
    /// Mutable access; invalidates any outstanding ForwardCache.
    std::span<double> mutable_weights();
    void set_weights(std::vector<double> weights);

    bool is_conditional() const override { return config_.conditional; }
    std::vector<ParameterBlock> parameter_blocks() const override { return {{this, weights_.size()}}; }

    /// Single-sample forward; `null_token` replaces the condition with the
    /// reserved null condition (zeros plus the flag).
    Tensor forward(const Tensor& y_t, int t, const Tensor* condition, bool null_token = false) const;

    /// Batched forward. Returns outputs as (data rows) x (batch * spatial),
    /// with column b * spatial + p holding pixel p of element b. When `cache`
    /// is given, activations for backward are stored in it.
    RowMatrix forward_batch(std::span<const NetInput> inputs, ForwardCache* cache = nullptr) const;

    /// Gradient of sum(output_grad .* output) with respect to every weight,
    /// for the forward pass recorded in `cache`.
    std::vector<double> backward(const ForwardCache& cache, const RowMatrix& output_grad) const;

    /// Tensor view of column block b of a forward_batch result.
    Tensor output_tensor(const RowMatrix& out, std::size_t b, ValueRange range = {}) const;

    /// Zeroes every first-layer weight reading the given input slice.
    void mask_input(InputPart part);

protected:
    Tensor eval(const Tensor& y_t, int t, const Tensor* condition) const override;

private:
    struct Layer {
        std::size_t in;
        std::size_t out;
        std::size_t kernel;
        std::size_t weight_offset;
        std::size_t bias_offset;
    };

    RowMatrix assemble_input(std::span<const NetInput> inputs) const;
    RowMatrix im2col(const RowMatrix& a, std::size_t kernel, std::size_t batch) const;
    RowMatrix col2im(const RowMatrix& cols, std::size_t channels, std::size_t kernel, std::size_t batch) const;

    NetConfig config_;
    std::size_t data_rows_;
    std::size_t spatial_;
    std::vector<Layer> layers_;
    std::vector<double> weights_;
    std::uint64_t version_ = 1;
};

/// Unconditional view of a conditional TinyNet that always feeds the null
/// condition. Shares the net's weights.
class NullTokenView final : public Denoiser {
public:
    explicit NullTokenView(const TinyNet& net);

    bool is_conditional() const override { return false; }
    std::vector<ParameterBlock> parameter_blocks() const override { return net_.parameter_blocks(); }
    const TinyNet& net() const { return net_; }

protected:
    Tensor eval(const Tensor& y_t, int t, const Tensor* condition) const override;

private:
    const TinyNet& net_;
};

/// Throws unless `net` is conditional.
NullTokenView with_null_token(const TinyNet& net);

}  // namespace binoise
