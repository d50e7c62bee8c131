// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "binoise/schedule.hpp"
#include "binoise/tiny_net.hpp"
#include "binoise/training.hpp"

namespace binoise {

/// Network weights at rest together with everything needed to rebuild and
/// audit the model.
///
/// Binary layout, all integers little-endian:
///   8 bytes   magic "BNOISECK"
///   u32       format version
///   u64       header length n
///   n bytes   header, compact JSON with sorted keys
///   u64       weight count m
///   m * f64   weights, IEEE-754 little-endian
///   u64       FNV-1a 64 over every byte from the header length up to here
struct Checkpoint {
    static constexpr std::uint32_t kFormatVersion = 1;

    std::uint32_t format_version = kFormatVersion;
    NetConfig architecture;
    std::string fingerprint;
    std::string precision = "f64";
    std::vector<double> weights;
    ScheduleParams schedule;
    TrainConfig train;
    long steps = 0;
    nlohmann::json metadata = nlohmann::json::object();
};

inline constexpr std::string_view kCheckpointMagic = "BNOISECK";

std::uint64_t fnv1a64(std::string_view bytes);

std::string encode_checkpoint(const Checkpoint& ckpt);
/// Throws std::runtime_error on bad magic, version, truncation or checksum.
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint make_checkpoint(const TinyNet& net, const ScheduleParams& schedule, const TrainConfig& train, long steps,
                           nlohmann::json metadata = nlohmann::json::object());

/// Rebuilds the network; throws if the stored fingerprint does not match
/// the one recomputed from the architecture.
TinyNet net_from_checkpoint(const Checkpoint& ckpt);

nlohmann::json to_json(const NetConfig& cfg);
NetConfig net_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScheduleParams& p);
ScheduleParams schedule_params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace binoise
