// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "binoise/tensor.hpp"

namespace binoise {

enum class DegradationKind { grayscale, downsample, rain_streaks };

std::string to_string(DegradationKind kind);
DegradationKind degradation_kind_from_string(const std::string& name);

/// Degradation applied to a clean image to produce its condition.
struct DegradationOp {
    DegradationKind kind = DegradationKind::grayscale;
    int factor = 4;                    // downsample
    int streak_count = 6;              // rain_streaks
    int streak_length = 6;
    double streak_angle_deg = 70.0;    // measured from the horizontal axis
    double streak_intensity = 0.6;
    std::uint64_t seed = 0;            // streak placement

    void validate() const;
};

/// grayscale: channel mean replicated to every channel.
/// downsample: box-downsample by factor, nearest-upsample to the input size.
/// rain_streaks: additive bright line segments, clipped to the value range.
Tensor degrade(const DegradationOp& op, const Tensor& y0);

/// Procedural image dataset of colored shapes over gradient backgrounds.
struct ToyDatasetSpec {
    std::size_t channels = 3;
    std::size_t height = 16;
    std::size_t width = 16;
    std::size_t train_count = 2000;
    std::size_t test_count = 200;
    std::uint64_t seed = 7;

    void validate() const;
};

struct PairedSample {
    std::string id;
    Tensor x0;  // degraded condition
    Tensor y0;  // clean target
};

struct PairedDataset {
    std::vector<PairedSample> train;
    std::vector<PairedSample> test;
};

/// One procedural clean image in [-1, 1], a pure function of (spec, index).
Tensor generate_image(const ToyDatasetSpec& spec, std::size_t index);

/// Train ids are 0..train_count-1, test ids follow; each image and its
/// streak pattern have their own seed stream.
PairedDataset gen_dataset(const ToyDatasetSpec& spec, const DegradationOp& op);

/// Formats a sample index as a zero-padded id.
std::string sample_id(std::size_t index);

/// Reported PSNR for identical inputs.
inline constexpr double kPsnrCapDb = 100.0;

double mse(const Tensor& a, const Tensor& b);
/// 10 log10(peak^2 / mse), kPsnrCapDb when mse is zero.
double psnr(const Tensor& a, const Tensor& b, double peak = 2.0);
/// Mean SSIM over all 7x7 windows (stride 1) and channels, population
/// statistics, C1 = (0.01 L)^2, C2 = (0.03 L)^2.
double ssim(const Tensor& a, const Tensor& b, double dynamic_range = 2.0);

inline constexpr std::size_t kSsimWindow = 7;

}  // namespace binoise
