#include "macsql/llm_backend.hpp"

#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <json.hpp>
#include <sstream>
#include <thread>

#include "macsql/errors.hpp"
#include "macsql/schema_catalog.hpp"
#include "macsql/text_util.hpp"

namespace macsql {

using json = nlohmann::json;

ChatResponse LlmBackend::complete(const ChatRequest& request) {
    if (trim(request.user_text).empty()) throw InvalidRequest("chat request has empty user text");
    if (!(request.temperature >= 0.0 && request.temperature <= 1.0)) {
        throw InvalidRequest("temperature must lie in [0, 1]");
    }
    return dispatch(request);
}

AgentCall call_agent(LlmBackend& backend, std::string agent, const ChatRequest& request) {
    const auto started = std::chrono::steady_clock::now();
    ChatResponse response = backend.complete(request);
    AgentCall call;
    call.agent = std::move(agent);
    call.prompt = request.system_text.empty() ? request.user_text : request.system_text + "\n\n" + request.user_text;
    call.response = std::move(response.text);
    call.prompt_tokens = response.prompt_tokens;
    call.completion_tokens = response.completion_tokens;
    call.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
    call.attempts = response.attempts;
    return call;
}

Script Script::parse(std::string_view text) {
    Script script;
    std::istringstream in{std::string(text)};
    std::string line;
    Script::Entry current;
    bool in_body = false;
    std::vector<std::string> body;

    auto flush = [&] {
        std::string response;
        for (size_t i = 0; i < body.size(); ++i) {
            if (i) response += "\n";
            response += body[i];
        }
        current.response = std::move(response);
        script.entries.push_back(std::move(current));
        current = {};
        body.clear();
        in_body = false;
    };

    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.rfind("@@", 0) == 0) {
            const std::string directive = trim(std::string_view(line).substr(2));
            if (directive == "strict") {
                script.strict = true;
            } else if (directive.rfind("match:", 0) == 0) {
                if (in_body) throw ConfigError("script line " + std::to_string(line_no) + ": match inside a response");
                auto needle = trim(std::string_view(directive).substr(6));
                if (needle.empty()) throw ConfigError("script line " + std::to_string(line_no) + ": empty matcher");
                current.needles.push_back(std::move(needle));
            } else if (directive == "end") {
                if (current.needles.empty()) {
                    throw ConfigError("script line " + std::to_string(line_no) + ": response without matcher");
                }
                flush();
            } else {
                throw ConfigError("script line " + std::to_string(line_no) + ": unknown directive " + directive);
            }
            continue;
        }
        if (current.needles.empty()) {
            if (trim(line).empty() || line.rfind('#', 0) == 0) continue;
            throw ConfigError("script line " + std::to_string(line_no) + ": text outside an entry");
        }
        in_body = true;
        body.push_back(line);
    }
    if (!current.needles.empty()) throw ConfigError("script ends inside an entry (missing @@ end)");
    return script;
}

Script Script::load(const std::filesystem::path& path) {
    try {
        return parse(read_text_file(path));
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    } catch (const std::runtime_error& e) {
        throw ConfigError(e.what());
    }
}

ScriptedBackend::ScriptedBackend(Script script, size_t context_window)
    : script_(std::move(script)), context_window_(context_window) {}

ChatResponse ScriptedBackend::dispatch(const ChatRequest& request) {
    ++calls_;
    const Script::Entry* hit = nullptr;
    size_t hits = 0;
    for (const auto& entry : script_.entries) {
        bool all = true;
        for (const auto& needle : entry.needles) {
            if (request.user_text.find(needle) == std::string::npos) {
                all = false;
                break;
            }
        }
        if (!all) continue;
        if (!hit) hit = &entry;
        ++hits;
        if (!script_.strict) break;
    }
    if (script_.strict && hits != 1) {
        throw ScriptMiss(hits == 0 ? "no scripted response matches the request"
                                   : "request matches " + std::to_string(hits) + " scripted responses");
    }
    ChatResponse response;
    response.text = hit ? hit->response : std::string();
    response.prompt_tokens = estimate_tokens(request.system_text) + estimate_tokens(request.user_text);
    response.completion_tokens = estimate_tokens(response.text);
    return response;
}

std::chrono::milliseconds RetryPolicy::delay_before_retry(int retry) const {
    const double factor = std::pow(multiplier, std::max(0, retry - 1));
    return std::chrono::milliseconds(static_cast<long long>(static_cast<double>(base_delay.count()) * factor));
}

void HttpBackend::InFlightLimiter::acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return active_ < limit_; });
    ++active_;
}

void HttpBackend::InFlightLimiter::release() {
    {
        std::lock_guard lock(mutex_);
        --active_;
    }
    cv_.notify_one();
}

HttpBackend::HttpBackend(HttpBackendConfig config, SleepFn sleep, LogFn log)
    : config_(std::move(config)), sleep_(std::move(sleep)), log_(std::move(log)) {
    if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    if (config_.retry.max_attempts < 1) throw ConfigError("retry attempt cap must be at least 1");
    const auto scheme_end = config_.endpoint.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint must be an http(s) URL: " + config_.endpoint);
    const auto path_start = config_.endpoint.find('/', scheme_end + 3);
    scheme_host_port_ = config_.endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);
    if (config_.api_key.empty() && !config_.api_key_env.empty()) {
        if (const char* key = std::getenv(config_.api_key_env.c_str())) config_.api_key = key;
    }
    if (config_.max_in_flight > 0) limiter_ = std::make_unique<InFlightLimiter>(config_.max_in_flight);
}

namespace {

bool is_transient(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

ChatResponse HttpBackend::dispatch(const ChatRequest& request) {
    json messages = json::array();
    if (!request.system_text.empty()) messages.push_back({{"role", "system"}, {"content", request.system_text}});
    messages.push_back({{"role", "user"}, {"content", request.user_text}});
    const json body = {
        {"model", request.model_name.empty() ? config_.model : request.model_name},
        {"messages", messages},
        {"temperature", request.temperature},
        {"max_tokens", request.max_output_tokens},
    };
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    if (limiter_) limiter_->acquire();
    struct Release {
        InFlightLimiter* limiter;
        ~Release() {
            if (limiter) limiter->release();
        }
    } release{limiter_.get()};

    RequestLog record;
    const auto started = std::chrono::steady_clock::now();
    auto finish = [&](bool ok, std::string error) {
        record.ok = ok;
        record.error = std::move(error);
        record.latency =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
        if (log_) log_(record);
    };

    std::string last_error;
    for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
        if (attempt > 1) sleep_(config_.retry.delay_before_retry(attempt - 1));
        record.attempts = attempt;

        httplib::Client client(scheme_host_port_);
        client.set_connection_timeout(config_.request_timeout);
        client.set_read_timeout(config_.request_timeout);
        client.set_write_timeout(config_.request_timeout);
        auto result = client.Post(path_, headers, payload, "application/json");
        if (!result) {
            record.last_status = 0;
            last_error = "transport error: " + httplib::to_string(result.error());
            continue;
        }
        record.last_status = result->status;
        if (is_transient(result->status)) {
            last_error = "HTTP " + std::to_string(result->status);
            continue;
        }
        if (result->status < 200 || result->status >= 300) {
            const std::string msg = "HTTP " + std::to_string(result->status) + ": " + result->body.substr(0, 500);
            finish(false, msg);
            throw BackendUnavailable(msg, attempt);
        }

        ChatResponse response;
        try {
            const json reply = json::parse(result->body);
            const auto& content = reply.at("choices").at(0).at("message").at("content");
            response.text = content.is_string() ? content.get<std::string>() : std::string();
            if (reply.contains("usage") && reply["usage"].is_object()) {
                response.prompt_tokens = reply["usage"].value("prompt_tokens", size_t{0});
                response.completion_tokens = reply["usage"].value("completion_tokens", size_t{0});
            }
        } catch (const json::exception& e) {
            const std::string msg = std::string("malformed chat-completion reply: ") + e.what();
            finish(false, msg);
            throw BackendUnavailable(msg, attempt);
        }
        response.attempts = attempt;
        finish(true, {});
        response.latency = record.latency;
        return response;
    }
    finish(false, last_error);
    throw BackendUnavailable("chat endpoint unavailable after " + std::to_string(config_.retry.max_attempts) +
                                 " attempts (" + last_error + ")",
                             config_.retry.max_attempts);
}

}  // namespace macsql
