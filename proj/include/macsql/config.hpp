#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "macsql/llm_backend.hpp"
#include "macsql/orchestrator.hpp"

namespace macsql {

/// Resolved run settings. Layers are applied in order: defaults, config file, environment, flags.
struct Settings {
    std::string backend = "http";  // http | script
    std::string endpoint;
    std::string model;
    std::string api_key_env = "LLM_API_KEY";
    std::filesystem::path script;
    size_t context_window = 0;  // 0: backend default
    double pruning_fraction = kDefaultPruningFraction;
    int shots = 2;
    int max_rounds = kDefaultMaxRounds;
    std::chrono::milliseconds timeout = kDefaultQueryTimeout;
    size_t parallelism = 1;
    size_t max_in_flight = 0;
    int max_attempts = 3;
    double temperature = 0.0;
    bool deterministic = false;
};

/// Keys accepted in config files, as MACSQL_<KEY> environment variables and as flags.
const std::vector<std::string>& setting_keys();

/// Parses `value` for `key` into `settings`. Throws ConfigError naming `source`.
void apply_setting(Settings& settings, const std::string& key, const std::string& value, const std::string& source);

/// JSON object of setting keys. Credentials are rejected: they come only from the environment.
void apply_config_file(Settings& settings, const std::filesystem::path& path);

using EnvLookup = std::function<std::optional<std::string>(const std::string& name)>;

/// Reads the process environment.
EnvLookup process_environment();

void apply_environment(Settings& settings, const EnvLookup& env);

/// Range checks across the merged view. Throws ConfigError.
void validate_settings(const Settings& settings);

/// defaults -> file -> env -> flags, then validation.
Settings resolve_settings(const std::optional<std::filesystem::path>& config_file, const EnvLookup& env,
                          const std::map<std::string, std::string>& flags);

PipelineConfig pipeline_config(const Settings& settings);

/// Scripted or HTTP backend as configured. Throws ConfigError when required pieces are missing.
std::unique_ptr<LlmBackend> make_backend(const Settings& settings, const EnvLookup& env);

}  // namespace macsql
