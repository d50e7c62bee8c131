// SPDX-License-Identifier: Apache-2.0
#include "binoise/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "binoise/rng.hpp"

namespace binoise {

std::string to_string(DegradationKind kind) {
    switch (kind) {
        case DegradationKind::grayscale: return "grayscale";
        case DegradationKind::downsample: return "downsample";
        case DegradationKind::rain_streaks: return "rain_streaks";
    }
    return "unknown";
}

DegradationKind degradation_kind_from_string(const std::string& name) {
    for (auto k : {DegradationKind::grayscale, DegradationKind::downsample, DegradationKind::rain_streaks}) {
        if (to_string(k) == name) return k;
    }
    throw std::invalid_argument("unknown degradation '" + name + "'");
}

void DegradationOp::validate() const {
    if (kind == DegradationKind::downsample && factor < 1) throw std::invalid_argument("downsample factor must be >= 1");
    if (kind == DegradationKind::rain_streaks) {
        if (streak_count < 0) throw std::invalid_argument("streak count must be >= 0");
        if (streak_length < 1) throw std::invalid_argument("streak length must be >= 1");
        if (!std::isfinite(streak_angle_deg) || !std::isfinite(streak_intensity)) {
            throw std::invalid_argument("streak angle and intensity must be finite");
        }
    }
}

Tensor degrade(const DegradationOp& op, const Tensor& y0) {
    op.validate();
    const ImageDims d = image_dims(y0);
    Tensor out = y0;
    switch (op.kind) {
        case DegradationKind::grayscale: {
            for (std::size_t y = 0; y < d.height; ++y) {
                for (std::size_t x = 0; x < d.width; ++x) {
                    double sum = 0.0;
                    for (std::size_t c = 0; c < d.channels; ++c) sum += y0.at(c, y, x);
                    const double mean = sum / static_cast<double>(d.channels);
                    for (std::size_t c = 0; c < d.channels; ++c) out.at(c, y, x) = mean;
                }
            }
            return out;
        }
        case DegradationKind::downsample: {
            const auto f = static_cast<std::size_t>(op.factor);
            if (d.height % f != 0 || d.width % f != 0) {
                throw std::invalid_argument("image not divisible by downsample factor");
            }
            for (std::size_t c = 0; c < d.channels; ++c) {
                for (std::size_t by = 0; by < d.height; by += f) {
                    for (std::size_t bx = 0; bx < d.width; bx += f) {
                        double sum = 0.0;
                        for (std::size_t y = by; y < by + f; ++y)
                            for (std::size_t x = bx; x < bx + f; ++x) sum += y0.at(c, y, x);
                        const double mean = sum / static_cast<double>(f * f);
                        for (std::size_t y = by; y < by + f; ++y)
                            for (std::size_t x = bx; x < bx + f; ++x) out.at(c, y, x) = mean;
                    }
                }
            }
            return out;
        }
        case DegradationKind::rain_streaks: {
            if (op.streak_count == 0) return out;
            NoiseStream rng(op.seed);
            const double angle = op.streak_angle_deg * std::numbers::pi / 180.0;
            const double dx = std::cos(angle);
            const double dy = std::sin(angle);
            const ValueRange r = y0.range();
            std::vector<bool> hit(d.height * d.width);
            for (int s = 0; s < op.streak_count; ++s) {
                std::fill(hit.begin(), hit.end(), false);
                const double sx = rng.uniform() * static_cast<double>(d.width);
                const double sy = rng.uniform() * static_cast<double>(d.height);
                for (int k = 0; k < op.streak_length; ++k) {
                    const long px = std::lround(sx + dx * k);
                    const long py = std::lround(sy + dy * k);
                    if (px < 0 || py < 0 || px >= static_cast<long>(d.width) || py >= static_cast<long>(d.height)) continue;
                    const auto idx = static_cast<std::size_t>(py) * d.width + static_cast<std::size_t>(px);
                    if (hit[idx]) continue;
                    hit[idx] = true;
                    for (std::size_t c = 0; c < d.channels; ++c) {
                        double& v = out.at(c, static_cast<std::size_t>(py), static_cast<std::size_t>(px));
                        v = std::clamp(v + op.streak_intensity, r.lo, r.hi);
                    }
                }
            }
            return out;
        }
    }
    throw std::logic_error("unhandled degradation");
}

void ToyDatasetSpec::validate() const {
    if (channels == 0 || height == 0 || width == 0) throw std::invalid_argument("dataset image size must be positive");
    if (train_count + test_count == 0) throw std::invalid_argument("dataset count must be positive");
}

std::string sample_id(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%05zu", index);
    return buf;
}

Tensor generate_image(const ToyDatasetSpec& spec, std::size_t index) {
    NoiseStream rng(derive_seed(spec.seed, 2 * index));
    const std::size_t C = spec.channels;
    const std::size_t H = spec.height;
    const std::size_t W = spec.width;
    Tensor img({C, H, W}, 0.0);

    auto random_color = [&] {
        std::vector<double> color(C);
        for (double& v : color) v = 2.0 * rng.uniform() - 1.0;
        return color;
    };

    // Background: linear gradient between two colors along a random direction.
    const std::vector<double> from = random_color();
    const std::vector<double> to = random_color();
    const double theta = rng.uniform() * 2.0 * std::numbers::pi;
    const double gx = std::cos(theta);
    const double gy = std::sin(theta);
    const double span = std::abs(gx) * (W - 1.0) + std::abs(gy) * (H - 1.0);
    const double offset = std::min(0.0, gx * (W - 1.0)) + std::min(0.0, gy * (H - 1.0));
    for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
            const double s = span > 0.0 ? (gx * x + gy * y - offset) / span : 0.0;
            for (std::size_t c = 0; c < C; ++c) img.at(c, y, x) = (1.0 - s) * from[c] + s * to[c];
        }
    }

    const long shapes = rng.uniform_int(1, 3);
    for (long s = 0; s < shapes; ++s) {
        const std::vector<double> color = random_color();
        const bool circle = rng.uniform() < 0.5;
        const double cx = rng.uniform() * W;
        const double cy = rng.uniform() * H;
        const double rx = 2.0 + rng.uniform() * (W / 3.0);
        const double ry = circle ? rx : 2.0 + rng.uniform() * (H / 3.0);
        for (std::size_t y = 0; y < H; ++y) {
            for (std::size_t x = 0; x < W; ++x) {
                const double px = x + 0.5 - cx;
                const double py = y + 0.5 - cy;
                const bool inside = circle ? px * px + py * py <= rx * rx : std::abs(px) <= rx && std::abs(py) <= ry;
                if (!inside) continue;
                for (std::size_t c = 0; c < C; ++c) img.at(c, y, x) = color[c];
            }
        }
    }
    for (double& v : img.values()) v = std::clamp(v, -1.0, 1.0);
    return img;
}

PairedDataset gen_dataset(const ToyDatasetSpec& spec, const DegradationOp& op) {
    spec.validate();
    op.validate();
    PairedDataset ds;
    const std::size_t total = spec.train_count + spec.test_count;
    for (std::size_t i = 0; i < total; ++i) {
        DegradationOp per_image = op;
        per_image.seed = derive_seed(op.seed ^ spec.seed, 2 * i + 1);
        PairedSample sample;
        sample.id = sample_id(i);
        sample.y0 = generate_image(spec, i);
        sample.x0 = degrade(per_image, sample.y0);
        (i < spec.train_count ? ds.train : ds.test).push_back(std::move(sample));
    }
    return ds;
}

double mse(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mse");
    if (a.empty()) throw std::invalid_argument("mse of empty tensors");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum / static_cast<double>(a.size());
}

double psnr(const Tensor& a, const Tensor& b, double peak) {
    if (!(peak > 0.0)) throw std::invalid_argument("psnr peak must be positive");
    const double m = mse(a, b);
    if (m == 0.0) return kPsnrCapDb;
    return 10.0 * std::log10(peak * peak / m);
}

double ssim(const Tensor& a, const Tensor& b, double dynamic_range) {
    require_same_shape(a, b, "ssim");
    const ImageDims d = image_dims(a);
    const std::size_t k = kSsimWindow;
    if (d.height < k || d.width < k) {
        throw std::invalid_argument("ssim needs images of at least " + std::to_string(k) + "x" + std::to_string(k));
    }
    const double c1 = (0.01 * dynamic_range) * (0.01 * dynamic_range);
    const double c2 = (0.03 * dynamic_range) * (0.03 * dynamic_range);
    const double n = static_cast<double>(k * k);
    double total = 0.0;
    std::size_t windows = 0;
    for (std::size_t c = 0; c < d.channels; ++c) {
        for (std::size_t y0 = 0; y0 + k <= d.height; ++y0) {
            for (std::size_t x0 = 0; x0 + k <= d.width; ++x0) {
                double sa = 0.0, sb = 0.0;
                for (std::size_t y = y0; y < y0 + k; ++y)
                    for (std::size_t x = x0; x < x0 + k; ++x) {
                        sa += a.at(c, y, x);
                        sb += b.at(c, y, x);
                    }
                const double ma = sa / n;
                const double mb = sb / n;
                double va = 0.0, vb = 0.0, cov = 0.0;
                for (std::size_t y = y0; y < y0 + k; ++y)
                    for (std::size_t x = x0; x < x0 + k; ++x) {
                        const double da = a.at(c, y, x) - ma;
                        const double db = b.at(c, y, x) - mb;
                        va += da * da;
                        vb += db * db;
                        cov += da * db;
                    }
                va /= n;
                vb /= n;
                cov /= n;
                const double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
                const double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
                total += num / den;
                ++windows;
            }
        }
    }
    return total / static_cast<double>(windows);
}

}  // namespace binoise
