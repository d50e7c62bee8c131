// SPDX-License-Identifier: Apache-2.0
#include "binoise/rng.hpp"

namespace binoise {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

NoiseStream::NoiseStream(std::uint64_t seed) : engine_(seed) {}

Tensor NoiseStream::normal(const Shape& shape, ValueRange range) {
    Tensor out(shape, 0.0, range);
    for (double& v : out.values()) v = normal_(engine_);
    draws_ += out.size();
    return out;
}

double NoiseStream::normal() {
    ++draws_;
    return normal_(engine_);
}

double NoiseStream::uniform() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
}

long NoiseStream::uniform_int(long lo, long hi) {
    return std::uniform_int_distribution<long>(lo, hi)(engine_);
}

}  // namespace binoise
