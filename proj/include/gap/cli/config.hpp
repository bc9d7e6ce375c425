#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gap/analysis/analysis.hpp"
#include "gap/models/model.hpp"
#include "gap/planner/cem.hpp"
#include "gap/theorylab/noise.hpp"
#include "gap/theorylab/theorem.hpp"

namespace gap::cli {

/// Bad config input. `what()` names the source and line when there is one.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class KeyType { integer, real, boolean, text, real_list, size_list };

struct KeySpec {
    std::string key;
    KeyType type;
    std::string default_value;
    std::string help;
};

/// Every accepted key with its type and default.
const std::vector<KeySpec>& known_keys();

/// Flat key=value settings, all values validated against their key's type.
class Config {
public:
    /// All defaults.
    Config();

    /// Throws ConfigError for an unknown key or a value of the wrong type.
    void set(std::string_view key, std::string_view value, const std::string& where = "override");

    const std::string& text(std::string_view key) const;
    std::int64_t integer(std::string_view key) const;
    std::size_t count(std::string_view key) const;  // non-negative integer
    double real(std::string_view key) const;
    bool boolean(std::string_view key) const;
    std::vector<double> reals(std::string_view key) const;
    std::vector<std::size_t> sizes(std::string_view key) const;

    const std::map<std::string, std::string>& values() const noexcept { return values_; }
    /// One "key = value" line per key, sorted; parse_config reads it back.
    std::string dump() const;

    planner::CemConfig cem() const;
    models::TrainConfig train() const;
    models::ModelConfig model(models::Variant v, const envs::Environment& env) const;
    theorylab::FuzzConfig fuzz() const;
    theorylab::NoiseSweepConfig noise(theorylab::NoiseTarget target) const;
    analysis::ErrorProfileConfig profile() const;

private:
    std::map<std::string, std::string> values_;
};

/// Reads `path` (may be empty for defaults only), then applies `overrides` in
/// order. Lines are `key = value`; blank lines and lines starting with '#'
/// are skipped. A key may appear at most once in the file.
Config parse_config(const std::filesystem::path& path,
                    const std::vector<std::pair<std::string, std::string>>& overrides = {});
Config parse_config_text(std::string_view text, const std::string& source,
                         const std::vector<std::pair<std::string, std::string>>& overrides = {});

}  // namespace gap::cli
