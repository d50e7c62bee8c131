// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

#include "binoise/tensor.hpp"

namespace binoise {

/// Mixes a base seed with a stream index (splitmix64 finalizer). Used to give
/// every sample, image and training run its own independent stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Source of standard-normal draws. The sequence is a pure function of the
/// seed, so draw k of a stream is reproducible bit-exactly within a build.
class NoiseStream {
public:
    explicit NoiseStream(std::uint64_t seed);

    /// Tensor of i.i.d. N(0, 1) values.
    Tensor normal(const Shape& shape, ValueRange range = {});
    double normal();

    /// Uniform real in [0, 1).
    double uniform();
    /// Uniform integer in [lo, hi].
    long uniform_int(long lo, long hi);

    std::uint64_t draws() const { return draws_; }
    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uint64_t draws_ = 0;
};

}  // namespace binoise
