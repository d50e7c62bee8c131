// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace binoise {

/// Bad flags, bad config keys or an invalid flag combination (exit code 1).
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The option set of one CLI verb. Every flag `--some-name` mirrors the
/// config key `some_name`; values come from defaults, then the JSON file
/// given by `--config`, then explicit flags.
class RunConfig {
public:
    RunConfig(std::string command, std::string description);

    template <typename T>
    void option(const std::string& flag, T& value, const std::string& help) {
        app_.add_option("--" + flag, value, help);
        const std::string key = key_of(flag);
        bind(key, [&value](const nlohmann::json& j) { value = j.get<T>(); },
             [&value](nlohmann::json& j, const std::string& k) { j[k] = value; });
    }

    void flag(const std::string& name, bool& value, const std::string& help);

    /// Parses args (without the verb). Throws UsageError on any problem;
    /// returns false when help was requested and printed to `out`.
    bool parse(const std::vector<std::string>& args, std::ostream& out);

    /// Effective configuration as a JSON object with sorted keys.
    nlohmann::json effective() const;
    const std::string& command() const { return command_; }

    static std::string key_of(const std::string& flag);

private:
    struct Binding {
        std::string key;
        std::function<void(const nlohmann::json&)> load;
        std::function<void(nlohmann::json&, const std::string&)> dump;
    };
    void bind(const std::string& key, std::function<void(const nlohmann::json&)> load,
              std::function<void(nlohmann::json&, const std::string&)> dump);

    std::string command_;
    CLI::App app_;
    std::string config_path_;
    std::vector<Binding> bindings_;
};

}  // namespace binoise
