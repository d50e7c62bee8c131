// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace binoise {

using Shape = std::vector<std::size_t>;

/// Nominal range of the values a tensor is expected to hold. Used for
/// clamping and for 8-bit image quantization.
struct ValueRange {
    double lo = -1.0;
    double hi = 1.0;

    double width() const { return hi - lo; }
    bool operator==(const ValueRange&) const = default;
};

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense array of doubles with a shape (CHW for images, flat for vectors).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0, ValueRange range = {});
    Tensor(Shape shape, std::vector<double> data, ValueRange range = {});

    /// 1-D tensor over the given values.
    static Tensor vector(std::vector<double> data, ValueRange range = {});

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    ValueRange range() const { return range_; }
    void set_range(ValueRange range) { range_ = range; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    const std::vector<double>& data() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    /// Element (c, y, x) of a CHW tensor.
    double& at(std::size_t c, std::size_t y, std::size_t x);
    double at(std::size_t c, std::size_t y, std::size_t x) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    /// Elementwise clip into range().
    Tensor clipped() const;

    bool operator==(const Tensor& other) const;

private:
    Shape shape_;
    std::vector<double> data_;
    ValueRange range_;
};

/// Throws std::invalid_argument naming `what` when shapes differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

/// Throws std::domain_error if any value is NaN or infinite.
void require_finite(const Tensor& t, const char* what);

/// Image geometry of a CHW tensor; throws unless the tensor is 3-D.
struct ImageDims {
    std::size_t channels;
    std::size_t height;
    std::size_t width;
};
ImageDims image_dims(const Tensor& t);

}  // namespace binoise
