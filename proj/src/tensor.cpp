// SPDX-License-Identifier: Apache-2.0
#include "binoise/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace binoise {

std::size_t shape_size(const Shape& shape) {
    if (shape.empty()) return 0;
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << 'x';
        out << shape[i];
    }
    out << ']';
    return out.str();
}

Tensor::Tensor(Shape shape, double fill, ValueRange range)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill), range_(range) {}

Tensor::Tensor(Shape shape, std::vector<double> data, ValueRange range)
    : shape_(std::move(shape)), data_(std::move(data)), range_(range) {
    if (shape_size(shape_) != data_.size()) {
        throw std::invalid_argument("tensor shape " + shape_string(shape_) + " does not match " +
                                    std::to_string(data_.size()) + " values");
    }
}

Tensor Tensor::vector(std::vector<double> data, ValueRange range) {
    Shape shape{data.size()};
    return Tensor(std::move(shape), std::move(data), range);
}

double& Tensor::at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
}

double Tensor::at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::clipped() const {
    Tensor out = *this;
    for (double& v : out.data_) v = std::clamp(v, range_.lo, range_.hi);
    return out;
}

bool Tensor::operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_ && range_ == other.range_;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_string(a.shape()) +
                                    " vs " + shape_string(b.shape()));
    }
}

void require_finite(const Tensor& t, const char* what) {
    if (!t.all_finite()) throw std::domain_error(std::string(what) + ": non-finite value");
}

ImageDims image_dims(const Tensor& t) {
    if (t.shape().size() != 3) {
        throw std::invalid_argument("expected a CHW image tensor, got shape " + shape_string(t.shape()));
    }
    return {t.shape()[0], t.shape()[1], t.shape()[2]};
}

}  // namespace binoise
