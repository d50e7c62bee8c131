// SPDX-License-Identifier: Apache-2.0
#include "binoise/run_config.hpp"

#include <algorithm>
#include <fstream>

namespace binoise {

RunConfig::RunConfig(std::string command, std::string description)
    : command_(std::move(command)), app_(std::move(description), command_) {
    app_.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app_.add_option("--config", config_path_, "JSON file of option values; flags win on conflict");
}

std::string RunConfig::key_of(const std::string& flag) {
    std::string key = flag;
    std::replace(key.begin(), key.end(), '-', '_');
    return key;
}

void RunConfig::bind(const std::string& key, std::function<void(const nlohmann::json&)> load,
                     std::function<void(nlohmann::json&, const std::string&)> dump) {
    bindings_.push_back({key, std::move(load), std::move(dump)});
}

void RunConfig::flag(const std::string& name, bool& value, const std::string& help) {
    app_.add_flag("--" + name, value, help);
    bind(key_of(name), [&value](const nlohmann::json& j) { value = j.get<bool>(); },
         [&value](nlohmann::json& j, const std::string& k) { j[k] = value; });
}

bool RunConfig::parse(const std::vector<std::string>& args, std::ostream& out) {
    // The config file supplies values before the flags are applied.
    for (std::size_t i = 0; i < args.size(); ++i) {
        std::string path;
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        }
        if (path.empty()) continue;
        std::ifstream f(path);
        if (!f) throw UsageError("cannot read config file " + path);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(f);
        } catch (const nlohmann::json::exception& e) {
            throw UsageError("config file " + path + " is not valid JSON: " + e.what());
        }
        if (!j.is_object()) throw UsageError("config file " + path + " must hold a JSON object");
        for (const auto& [key, val] : j.items()) {
            auto it = std::find_if(bindings_.begin(), bindings_.end(), [&](const Binding& b) { return b.key == key; });
            if (it == bindings_.end()) throw UsageError("unknown config key '" + key + "' for " + command_);
            try {
                it->load(val);
            } catch (const nlohmann::json::exception&) {
                throw UsageError("config key '" + key + "' has the wrong type");
            }
        }
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app_.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app_.help();
        return false;
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what());
    }
    return true;
}

nlohmann::json RunConfig::effective() const {
    nlohmann::json j = nlohmann::json::object();
    j["command"] = command_;
    for (const Binding& b : bindings_) b.dump(j, b.key);
    return j;
}

}  // namespace binoise
