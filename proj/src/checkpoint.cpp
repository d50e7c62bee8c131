// SPDX-License-Identifier: Apache-2.0
#include "binoise/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace binoise {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

class ByteReader {
public:
    explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}

    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n) {
            throw std::runtime_error("checkpoint truncated at byte " + std::to_string(bytes_.size()) + " while reading " +
                                     what);
        }
    }

    std::uint64_t u(int width, const char* what) {
        need(static_cast<std::size_t>(width), what);
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += static_cast<std::size_t>(width);
        return v;
    }

    std::string take(std::size_t n, const char* what) {
        need(n, what);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t pos() const { return pos_; }

private:
    const std::string& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

nlohmann::json to_json(const NetConfig& cfg) {
    return {{"kind", to_string(cfg.kind)},  {"channels", cfg.channels},   {"height", cfg.height},
            {"width", cfg.width},           {"conditional", cfg.conditional}, {"embed_dim", cfg.embed_dim},
            {"hidden", cfg.hidden}};
}

NetConfig net_config_from_json(const nlohmann::json& j) {
    NetConfig c;
    c.kind = net_kind_from_string(j.at("kind").get<std::string>());
    c.channels = j.at("channels").get<std::size_t>();
    c.height = j.at("height").get<std::size_t>();
    c.width = j.at("width").get<std::size_t>();
    c.conditional = j.at("conditional").get<bool>();
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    return c;
}

nlohmann::json to_json(const ScheduleParams& p) {
    return {{"kind", p.kind}, {"timesteps", p.timesteps}, {"beta_start", p.beta_start}, {"beta_end", p.beta_end}};
}

ScheduleParams schedule_params_from_json(const nlohmann::json& j) {
    ScheduleParams p;
    p.kind = j.at("kind").get<std::string>();
    p.timesteps = j.at("timesteps").get<int>();
    p.beta_start = j.at("beta_start").get<double>();
    p.beta_end = j.at("beta_end").get<double>();
    return p;
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"lambda_corr", c.lambda_corr}, {"ema_alpha", c.ema_alpha},         {"learning_rate", c.learning_rate},
            {"batch_size", c.batch_size},   {"steps", c.steps},                 {"seed", c.seed},
            {"corr_enabled", c.corr_enabled}, {"null_token_prob", c.null_token_prob}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.lambda_corr = j.at("lambda_corr").get<double>();
    c.ema_alpha = j.at("ema_alpha").get<double>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.steps = j.at("steps").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.corr_enabled = j.at("corr_enabled").get<bool>();
    c.null_token_prob = j.at("null_token_prob").get<double>();
    return c;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
    const nlohmann::json header = {{"architecture", to_json(ckpt.architecture)},
                                   {"fingerprint", ckpt.fingerprint},
                                   {"precision", ckpt.precision},
                                   {"schedule", to_json(ckpt.schedule)},
                                   {"train", to_json(ckpt.train)},
                                   {"steps", ckpt.steps},
                                   {"metadata", ckpt.metadata}};
    const std::string text = header.dump();
    std::string payload;
    put_u64(payload, text.size());
    payload += text;
    put_u64(payload, ckpt.weights.size());
    for (double w : ckpt.weights) put_u64(payload, std::bit_cast<std::uint64_t>(w));

    std::string out(kCheckpointMagic);
    put_u32(out, ckpt.format_version);
    out += payload;
    put_u64(out, fnv1a64(payload));
    return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
    ByteReader r(bytes);
    if (r.take(kCheckpointMagic.size(), "magic") != kCheckpointMagic) {
        throw std::runtime_error("not a checkpoint (bad magic)");
    }
    Checkpoint ckpt;
    ckpt.format_version = static_cast<std::uint32_t>(r.u(4, "version"));
    if (ckpt.format_version != Checkpoint::kFormatVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(ckpt.format_version));
    }
    const std::size_t payload_start = r.pos();
    const std::uint64_t header_len = r.u(8, "header length");
    const std::string text = r.take(header_len, "header");
    const std::uint64_t count = r.u(8, "weight count");
    r.need(count * 8, "weights");
    ckpt.weights.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) ckpt.weights[i] = std::bit_cast<double>(r.u(8, "weights"));
    const std::size_t payload_end = r.pos();
    const std::uint64_t stored = r.u(8, "checksum");
    const std::uint64_t actual = fnv1a64(std::string_view(bytes).substr(payload_start, payload_end - payload_start));
    if (stored != actual) throw std::runtime_error("checkpoint checksum mismatch");
    if (r.pos() != bytes.size()) throw std::runtime_error("trailing bytes after checkpoint checksum");

    const nlohmann::json header = nlohmann::json::parse(text);
    ckpt.architecture = net_config_from_json(header.at("architecture"));
    ckpt.fingerprint = header.at("fingerprint").get<std::string>();
    ckpt.precision = header.at("precision").get<std::string>();
    if (ckpt.precision != "f64") throw std::runtime_error("unsupported weight precision '" + ckpt.precision + "'");
    ckpt.schedule = schedule_params_from_json(header.at("schedule"));
    ckpt.train = train_config_from_json(header.at("train"));
    ckpt.steps = header.at("steps").get<long>();
    ckpt.metadata = header.at("metadata");
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    const std::string bytes = encode_checkpoint(ckpt);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint " + path.string());
    std::ostringstream buf;
    buf << f.rdbuf();
    try {
        return decode_checkpoint(buf.str());
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

Checkpoint make_checkpoint(const TinyNet& net, const ScheduleParams& schedule, const TrainConfig& train, long steps,
                           nlohmann::json metadata) {
    Checkpoint c;
    c.architecture = net.config();
    c.fingerprint = net.fingerprint();
    c.weights.assign(net.weights().begin(), net.weights().end());
    c.schedule = schedule;
    c.train = train;
    c.steps = steps;
    c.metadata = std::move(metadata);
    return c;
}

TinyNet net_from_checkpoint(const Checkpoint& ckpt) {
    TinyNet net(ckpt.architecture);
    if (net.fingerprint() != ckpt.fingerprint) {
        throw std::runtime_error("checkpoint fingerprint '" + ckpt.fingerprint + "' does not match its architecture '" +
                                 net.fingerprint() + "'");
    }
    net.set_weights(ckpt.weights);
    return net;
}

}  // namespace binoise
