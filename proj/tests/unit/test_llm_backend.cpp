#include <doctest.h>
#include <httplib.h>

#include <json.hpp>
#include <thread>

#include "fixtures.hpp"
#include "macsql/errors.hpp"
#include "macsql/llm_backend.hpp"

using namespace macsql;
using namespace macsql::testing;
using namespace std::chrono_literals;

namespace {

ChatRequest ask(std::string text) {
    ChatRequest r;
    r.user_text = std::move(text);
    return r;
}

/// Local chat endpoint that fails the first `failures` requests with `status`.
class FakeEndpoint {
public:
    FakeEndpoint(int failures, int status) : failures_(failures), status_(status) {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            const int n = ++hits_;
            last_auth_ = req.get_header_value("Authorization");
            last_body_ = req.body;
            if (n <= failures_) {
                res.status = status_;
                res.set_content("{\"error\": \"busy\"}", "application/json");
                return;
            }
            const nlohmann::json reply = {
                {"choices", {{{"message", {{"role", "assistant"}, {"content", "pong"}}}}}},
                {"usage", {{"prompt_tokens", 7}, {"completion_tokens", 1}}}};
            res.set_content(reply.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeEndpoint() {
        server_.stop();
        thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
    int hits() const { return hits_.load(); }
    std::string last_auth() const { return last_auth_; }
    std::string last_body() const { return last_body_; }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    int failures_;
    int status_;
    std::atomic<int> hits_{0};
    std::string last_auth_;
    std::string last_body_;
};

HttpBackendConfig config_for(const FakeEndpoint& endpoint) {
    HttpBackendConfig c;
    c.endpoint = endpoint.url();
    c.model = "test-model";
    c.api_key = "secret";
    c.retry.base_delay = 5ms;
    c.request_timeout = 5s;
    return c;
}

}  // namespace

TEST_SUITE("llm_backend") {
    TEST_CASE("script format") {
        const auto script = Script::parse(
            "# comment\n@@ strict\n@@ match: alpha\n@@ match: beta\nline one\n\nline three\n@@ end\n"
            "@@ match: gamma\n@@ end\n");
        CHECK(script.strict);
        REQUIRE(script.entries.size() == 2);
        CHECK(script.entries[0].needles == std::vector<std::string>{"alpha", "beta"});
        CHECK(script.entries[0].response == "line one\n\nline three");
        CHECK(script.entries[1].response.empty());

        CHECK_THROWS_AS(Script::parse("@@ match: a\nbody\n"), ConfigError);
        CHECK_THROWS_AS(Script::parse("stray text\n"), ConfigError);
        CHECK_THROWS_AS(Script::parse("@@ end\n"), ConfigError);
        CHECK_THROWS_AS(Script::parse("@@ bogus\n"), ConfigError);
        CHECK_THROWS_AS(Script::load("/definitely/not/here.script"), ConfigError);
    }

    TEST_CASE("worked-example script loads") {
        const auto script = Script::load(fixture_dir() / "worked_example.script");
        CHECK(script.strict);
        CHECK(script.entries.size() == 2);
    }

    TEST_CASE("strict scripts require exactly one match") {
        ScriptedBackend backend(Script::parse("@@ strict\n@@ match: a\nA\n@@ end\n@@ match: b\nB\n@@ end\n"));
        CHECK(backend.complete(ask("xa")).text == "A");
        CHECK(backend.complete(ask("xa")).text == "A");
        CHECK_THROWS_AS(backend.complete(ask("zzz")), ScriptMiss);
        CHECK_THROWS_AS(backend.complete(ask("ab")), ScriptMiss);
        CHECK(backend.calls() == 4);
    }

    TEST_CASE("lenient scripts take the first match or answer empty") {
        ScriptedBackend backend(Script::parse("@@ match: a\nA\n@@ end\n@@ match: b\nB\n@@ end\n"));
        CHECK(backend.complete(ask("ab")).text == "A");
        CHECK(backend.complete(ask("zzz")).text.empty());
    }

    TEST_CASE("request validation") {
        ScriptedBackend backend(Script{});
        CHECK_THROWS_AS(backend.complete(ask("  ")), InvalidRequest);
        auto hot = ask("x");
        hot.temperature = 1.5;
        CHECK_THROWS_AS(backend.complete(hot), InvalidRequest);
    }

    TEST_CASE("agent call trace") {
        ScriptedBackend backend(Script::parse("@@ match: hello\nworld\n@@ end\n"), 4096);
        ChatRequest r = ask("hello there");
        r.system_text = "sys";
        const auto call = call_agent(backend, "selector", r);
        CHECK(call.agent == "selector");
        CHECK(call.prompt == "sys\n\nhello there");
        CHECK(call.response == "world");
        CHECK(call.completion_tokens == 2);
        CHECK(backend.context_window() == 4096);
    }

    TEST_CASE("retry delays grow exponentially") {
        RetryPolicy p;
        p.base_delay = 100ms;
        CHECK(p.delay_before_retry(1) == 100ms);
        CHECK(p.delay_before_retry(2) == 200ms);
        CHECK(p.delay_before_retry(3) == 400ms);
    }

    TEST_CASE("http backend retries transient failures then succeeds") {
        FakeEndpoint endpoint(2, 503);
        std::vector<std::chrono::milliseconds> sleeps;
        std::vector<RequestLog> logs;
        HttpBackend backend(
            config_for(endpoint), [&](std::chrono::milliseconds d) { sleeps.push_back(d); },
            [&](const RequestLog& log) { logs.push_back(log); });
        ChatRequest r = ask("ping");
        r.system_text = "be brief";
        const auto reply = backend.complete(r);
        CHECK(reply.text == "pong");
        CHECK(reply.attempts == 3);
        CHECK(reply.prompt_tokens == 7);
        CHECK(endpoint.hits() == 3);
        CHECK(sleeps == std::vector<std::chrono::milliseconds>{5ms, 10ms});
        REQUIRE(logs.size() == 1);
        CHECK(logs[0].ok);
        CHECK(logs[0].attempts == 3);
        CHECK(endpoint.last_auth() == "Bearer secret");
        const auto body = nlohmann::json::parse(endpoint.last_body());
        CHECK(body["model"] == "test-model");
        CHECK(body["messages"].size() == 2);
        CHECK(body["messages"][0]["role"] == "system");
    }

    TEST_CASE("http backend gives up at the attempt cap") {
        FakeEndpoint endpoint(100, 429);
        auto config = config_for(endpoint);
        config.retry.max_attempts = 4;
        std::vector<RequestLog> logs;
        HttpBackend backend(config, [](std::chrono::milliseconds) {}, [&](const RequestLog& l) { logs.push_back(l); });
        try {
            backend.complete(ask("ping"));
            FAIL("expected BackendUnavailable");
        } catch (const BackendUnavailable& e) {
            CHECK(e.attempts() == 4);
        }
        CHECK(endpoint.hits() == 4);
        REQUIRE(logs.size() == 1);
        CHECK_FALSE(logs[0].ok);
        CHECK(logs[0].last_status == 429);
    }

    TEST_CASE("http backend does not retry client errors") {
        FakeEndpoint endpoint(100, 400);
        HttpBackend backend(config_for(endpoint), [](std::chrono::milliseconds) {});
        CHECK_THROWS_AS(backend.complete(ask("ping")), BackendUnavailable);
        CHECK(endpoint.hits() == 1);
    }

    TEST_CASE("http backend survives concurrent callers with an in-flight limit") {
        FakeEndpoint endpoint(0, 200);
        auto config = config_for(endpoint);
        config.max_in_flight = 2;
        HttpBackend backend(config);
        std::vector<std::thread> workers;
        std::atomic<int> ok{0};
        for (int i = 0; i < 6; ++i) {
            workers.emplace_back([&] {
                if (backend.complete(ask("ping")).text == "pong") ++ok;
            });
        }
        for (auto& w : workers) w.join();
        CHECK(ok == 6);
    }

    TEST_CASE("unreachable endpoint and bad configuration") {
        HttpBackendConfig c;
        c.endpoint = "http://127.0.0.1:1/v1/chat/completions";
        c.retry.max_attempts = 2;
        c.request_timeout = 1s;
        HttpBackend backend(c, [](std::chrono::milliseconds) {});
        CHECK_THROWS_AS(backend.complete(ask("ping")), BackendUnavailable);
        c.endpoint = "not a url";
        CHECK_THROWS_AS(HttpBackend{c}, ConfigError);
    }
}
