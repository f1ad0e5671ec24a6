#include "macsql/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <json.hpp>

#include "macsql/errors.hpp"
#include "macsql/text_util.hpp"

namespace macsql {

using json = nlohmann::json;

const std::vector<std::string>& setting_keys() {
    static const std::vector<std::string> keys = {
        "backend",     "endpoint",   "model",         "api_key_env",  "script",      "context_window",
        "pruning_fraction", "shots", "max_rounds",    "timeout_ms",   "parallelism", "max_in_flight",
        "max_attempts", "temperature", "deterministic",
    };
    return keys;
}

namespace {

long long parse_integer(const std::string& key, const std::string& value, const std::string& source) {
    const std::string v = trim(value);
    size_t used = 0;
    long long out = 0;
    try {
        out = std::stoll(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (v.empty() || used != v.size()) throw ConfigError(source + ": " + key + " expects an integer, got '" + value + "'");
    return out;
}

double parse_real(const std::string& key, const std::string& value, const std::string& source) {
    const std::string v = trim(value);
    size_t used = 0;
    double out = 0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (v.empty() || used != v.size()) throw ConfigError(source + ": " + key + " expects a number, got '" + value + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& value, const std::string& source) {
    const std::string v = to_lower(trim(value));
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError(source + ": " + key + " expects a boolean, got '" + value + "'");
}

size_t parse_count(const std::string& key, const std::string& value, const std::string& source) {
    const long long n = parse_integer(key, value, source);
    if (n < 0) throw ConfigError(source + ": " + key + " must not be negative");
    return static_cast<size_t>(n);
}

}  // namespace

void apply_setting(Settings& s, const std::string& key, const std::string& value, const std::string& source) {
    if (key == "backend") {
        const std::string v = to_lower(trim(value));
        if (v != "http" && v != "script") throw ConfigError(source + ": backend must be http or script");
        s.backend = v;
    } else if (key == "endpoint") {
        s.endpoint = trim(value);
    } else if (key == "model") {
        s.model = trim(value);
    } else if (key == "api_key_env") {
        s.api_key_env = trim(value);
    } else if (key == "script") {
        s.script = value;
    } else if (key == "context_window") {
        s.context_window = parse_count(key, value, source);
    } else if (key == "pruning_fraction") {
        s.pruning_fraction = parse_real(key, value, source);
    } else if (key == "shots") {
        s.shots = static_cast<int>(parse_integer(key, value, source));
    } else if (key == "max_rounds") {
        s.max_rounds = static_cast<int>(parse_integer(key, value, source));
    } else if (key == "timeout_ms") {
        s.timeout = std::chrono::milliseconds(parse_integer(key, value, source));
    } else if (key == "parallelism") {
        s.parallelism = parse_count(key, value, source);
    } else if (key == "max_in_flight") {
        s.max_in_flight = parse_count(key, value, source);
    } else if (key == "max_attempts") {
        s.max_attempts = static_cast<int>(parse_integer(key, value, source));
    } else if (key == "temperature") {
        s.temperature = parse_real(key, value, source);
    } else if (key == "deterministic") {
        s.deterministic = parse_bool(key, value, source);
    } else {
        throw ConfigError(source + ": unknown setting '" + key + "'");
    }
}

void apply_config_file(Settings& settings, const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const std::runtime_error& e) {
        throw ConfigError(e.what());
    }
    const json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ConfigError(path.string() + ": expected a JSON object");
    const std::string source = path.string();
    for (const auto& [key, value] : j.items()) {
        if (key == "api_key" || key == "token" || key == "password") {
            throw ConfigError(source + ": credentials are read only from the environment (see api_key_env)");
        }
        if (value.is_string()) {
            apply_setting(settings, key, value.get<std::string>(), source);
        } else if (value.is_number() || value.is_boolean()) {
            apply_setting(settings, key, value.dump(), source);
        } else {
            throw ConfigError(source + ": " + key + " must be a string, number or boolean");
        }
    }
}

EnvLookup process_environment() {
    return [](const std::string& name) -> std::optional<std::string> {
        if (const char* v = std::getenv(name.c_str())) return std::string(v);
        return std::nullopt;
    };
}

void apply_environment(Settings& settings, const EnvLookup& env) {
    for (const auto& key : setting_keys()) {
        std::string name = "MACSQL_" + key;
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::toupper(c); });
        if (const auto value = env(name)) apply_setting(settings, key, *value, name);
    }
}

void validate_settings(const Settings& s) {
    if (s.shots < 0 || s.shots > 2) throw ConfigError("shots must be 0, 1 or 2");
    if (s.max_rounds < 1) throw ConfigError("max_rounds must be at least 1");
    if (s.parallelism < 1) throw ConfigError("parallelism must be at least 1");
    if (s.max_attempts < 1) throw ConfigError("max_attempts must be at least 1");
    if (!(s.pruning_fraction > 0.0 && s.pruning_fraction <= 1.0)) {
        throw ConfigError("pruning_fraction must lie in (0, 1]");
    }
    if (s.timeout.count() <= 0) throw ConfigError("timeout_ms must be positive");
    if (!(s.temperature >= 0.0 && s.temperature <= 1.0)) throw ConfigError("temperature must lie in [0, 1]");
}

Settings resolve_settings(const std::optional<std::filesystem::path>& config_file, const EnvLookup& env,
                          const std::map<std::string, std::string>& flags) {
    Settings s;
    if (config_file) apply_config_file(s, *config_file);
    apply_environment(s, env);
    for (const auto& [key, value] : flags) apply_setting(s, key, value, "--" + key);
    validate_settings(s);
    return s;
}

PipelineConfig pipeline_config(const Settings& s) {
    PipelineConfig c;
    c.pruning_fraction = s.pruning_fraction;
    c.context_window = s.context_window;
    c.shots = s.shots;
    c.max_rounds = s.max_rounds;
    c.query_timeout = s.timeout;
    c.deterministic = s.deterministic;
    c.model_name = s.model;
    c.temperature = s.temperature;
    return c;
}

std::unique_ptr<LlmBackend> make_backend(const Settings& s, const EnvLookup& env) {
    if (s.backend == "script") {
        if (s.script.empty()) throw ConfigError("the script backend needs a script file (--script)");
        return std::make_unique<ScriptedBackend>(Script::load(s.script),
                                                 s.context_window ? s.context_window : kDefaultContextWindow);
    }
    if (s.endpoint.empty()) throw ConfigError("the http backend needs an endpoint (--endpoint or MACSQL_ENDPOINT)");
    if (s.model.empty()) throw ConfigError("the http backend needs a model name (--model)");
    HttpBackendConfig c;
    c.endpoint = s.endpoint;
    c.model = s.model;
    c.api_key_env = s.api_key_env;
    if (const auto key = env(s.api_key_env)) c.api_key = *key;
    if (c.api_key.empty()) throw ConfigError("environment variable " + s.api_key_env + " holds no API key");
    c.retry.max_attempts = s.max_attempts;
    if (s.context_window) c.context_window = s.context_window;
    c.max_in_flight = s.max_in_flight;
    return std::make_unique<HttpBackend>(std::move(c));
}

}  // namespace macsql
