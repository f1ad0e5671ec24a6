#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace macsql {

struct ChatRequest {
    std::string system_text;
    std::string user_text;
    double temperature = 0.0;
    size_t max_output_tokens = 2048;
    std::string model_name;
};

struct ChatResponse {
    std::string text;
    size_t prompt_tokens = 0;
    size_t completion_tokens = 0;
    std::chrono::milliseconds latency{0};
    int attempts = 1;
};

inline constexpr size_t kDefaultContextWindow = 32768;

/// One traced LLM call made by an agent.
struct AgentCall {
    std::string agent;  // selector, decomposer or refiner
    std::string prompt;
    std::string response;
    size_t prompt_tokens = 0;
    size_t completion_tokens = 0;
    std::chrono::milliseconds latency{0};
    int attempts = 1;
};

/// Chat-completion endpoint. Implementations must tolerate concurrent complete() calls.
class LlmBackend {
public:
    virtual ~LlmBackend() = default;

    /// Validates the request (non-empty user text, temperature in [0, 1]) and dispatches it.
    /// Throws InvalidRequest, BackendUnavailable, or ScriptMiss.
    ChatResponse complete(const ChatRequest& request);

    virtual size_t context_window() const { return kDefaultContextWindow; }

protected:
    virtual ChatResponse dispatch(const ChatRequest& request) = 0;
};

/// Matcher/response pairs for ScriptedBackend. An entry matches when every one of its
/// substrings occurs in the request's user text.
///
/// Text format:
///
///     @@ strict                  (optional, before the first entry)
///     @@ match: <substring>      (one or more per entry)
///     <response lines>
///     @@ end
struct Script {
    struct Entry {
        std::vector<std::string> needles;
        std::string response;
    };
    std::vector<Entry> entries;
    bool strict = false;

    static Script parse(std::string_view text);
    static Script load(const std::filesystem::path& path);
};

/// Deterministic backend: the same request always yields the same response.
/// Strict scripts require exactly one matching entry per request; lenient ones take the first
/// match and answer with empty text when nothing matches.
class ScriptedBackend : public LlmBackend {
public:
    explicit ScriptedBackend(Script script, size_t context_window = kDefaultContextWindow);

    size_t context_window() const override { return context_window_; }
    const Script& script() const { return script_; }
    size_t calls() const { return calls_.load(); }

protected:
    ChatResponse dispatch(const ChatRequest& request) override;

private:
    Script script_;
    size_t context_window_;
    std::atomic<size_t> calls_{0};
};

/// complete() plus a trace record with wall-clock latency.
AgentCall call_agent(LlmBackend& backend, std::string agent, const ChatRequest& request);

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds base_delay{1000};
    double multiplier = 2.0;

    /// Delay before retry number `retry` (1-based): base * multiplier^(retry-1).
    std::chrono::milliseconds delay_before_retry(int retry) const;
};

/// One record per complete() call on the HTTP backend.
struct RequestLog {
    int attempts = 0;
    int last_status = 0;  // 0 when the transport failed
    bool ok = false;
    std::chrono::milliseconds latency{0};
    std::string error;
};

struct HttpBackendConfig {
    std::string endpoint;  // full URL, e.g. https://api.example.com/v1/chat/completions
    std::string model;
    std::string api_key_env = "LLM_API_KEY";
    std::string api_key;  // resolved from api_key_env when empty
    RetryPolicy retry;
    std::chrono::seconds request_timeout{120};
    size_t context_window = kDefaultContextWindow;
    size_t max_in_flight = 0;  // 0 = unlimited
};

/// Speaks the common chat-completion wire protocol: POST {model, messages, temperature, max_tokens},
/// reads choices[0].message.content and usage.{prompt,completion}_tokens.
class HttpBackend : public LlmBackend {
public:
    using SleepFn = std::function<void(std::chrono::milliseconds)>;
    using LogFn = std::function<void(const RequestLog&)>;

    explicit HttpBackend(HttpBackendConfig config, SleepFn sleep = {}, LogFn log = {});

    size_t context_window() const override { return config_.context_window; }
    const HttpBackendConfig& config() const { return config_; }

protected:
    ChatResponse dispatch(const ChatRequest& request) override;

private:
    class InFlightLimiter {
    public:
        explicit InFlightLimiter(size_t limit) : limit_(limit) {}
        void acquire();
        void release();

    private:
        size_t limit_;
        size_t active_ = 0;
        std::mutex mutex_;
        std::condition_variable cv_;
    };

    HttpBackendConfig config_;
    SleepFn sleep_;
    LogFn log_;
    std::string scheme_host_port_;
    std::string path_;
    std::unique_ptr<InFlightLimiter> limiter_;
};

}  // namespace macsql
