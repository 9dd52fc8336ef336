#pragma once

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "cok/encoder.hpp"
#include "cok/errors.hpp"
#include "cok/llm.hpp"
#include "cok/rng.hpp"

namespace cok {

struct SplitUrl {
    std::string base;  // scheme://host[:port]
    std::string path;  // /path, defaults to "/"
};

inline SplitUrl split_url(const std::string& url) {
    const std::size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("endpoint url must start with http:// or https://: " + url);
    }
    const std::size_t path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

// Single-token bucket refilling at requests_per_minute; acquire() blocks
// until a token is available. requests_per_minute <= 0 disables limiting.
class RateLimiter {
public:
    explicit RateLimiter(double requests_per_minute)
        : interval_(requests_per_minute > 0.0 ? 60.0 / requests_per_minute : 0.0) {}

    void acquire() {
        if (interval_ <= 0.0) return;
        std::unique_lock lock(mutex_);
        const auto now = std::chrono::steady_clock::now();
        const auto ready = last_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                       std::chrono::duration<double>(interval_));
        if (!primed_) {
            primed_ = true;
            last_ = now;
            return;
        }
        if (now < ready) {
            lock.unlock();
            std::this_thread::sleep_for(ready - now);
            lock.lock();
            last_ = ready;
        } else {
            last_ = now;
        }
    }

private:
    double interval_;
    bool primed_ = false;
    std::chrono::steady_clock::time_point last_{};
    std::mutex mutex_;
};

struct BackendConfig {
    std::string endpoint_url;
    std::string model;
    double requests_per_minute = 0.0;
    double timeout_s = 60.0;
};

inline BackendConfig load_backend_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open backend config " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": invalid JSON: " + e.what());
    }
    BackendConfig config;
    if (!doc.contains("endpoint_url") || !doc.contains("model")) {
        throw DataError(path + ": endpoint_url and model are required");
    }
    config.endpoint_url = doc["endpoint_url"].get<std::string>();
    config.model = doc["model"].get<std::string>();
    if (doc.contains("requests_per_minute")) {
        config.requests_per_minute = doc["requests_per_minute"].get<double>();
    }
    if (doc.contains("timeout_s")) config.timeout_s = doc["timeout_s"].get<double>();
    return config;
}

inline std::string api_key_from_env() {
    const char* key = std::getenv("COK_API_KEY");
    return key ? key : "";
}

// Chat-completions style backend: one round trip per request, n samples via
// the API's sample-count field, bounded retries with exponential backoff and
// jitter on 429/5xx/transport failures.
class HttpBackend final : public LLMBackend {
public:
    explicit HttpBackend(BackendConfig config, std::string api_key = api_key_from_env(),
                         double retry_base_delay_s = 0.5, int max_retries = 3)
        : config_(std::move(config)),
          api_key_(std::move(api_key)),
          retry_base_delay_s_(retry_base_delay_s),
          max_retries_(max_retries),
          limiter_(config_.requests_per_minute),
          jitter_(0x5eed) {}

    GenerationResponse complete(const GenerationRequest& request) override {
        request.params.validate();
        const SplitUrl url = split_url(config_.endpoint_url);
        nlohmann::json body;
        body["model"] = request.model.empty() ? config_.model : request.model;
        body["messages"] = nlohmann::json::array(
            {{{"role", "user"}, {"content", request.prompt}}});
        body["temperature"] = request.params.temperature;
        body["n"] = request.params.n_samples;
        body["max_tokens"] = request.params.max_tokens;
        const std::string payload = body.dump();

        std::string attempt_log;
        for (int attempt = 0; attempt <= max_retries_; ++attempt) {
            if (attempt > 0) backoff(attempt);
            limiter_.acquire();
            httplib::Client client(url.base);
            configure(client);
            auto res = client.Post(url.path, headers(), payload, "application/json");
            if (!res) {
                attempt_log += " attempt " + std::to_string(attempt + 1) + ": " +
                               httplib::to_string(res.error()) + ";";
                continue;
            }
            if (res->status == 429 || res->status >= 500) {
                attempt_log += " attempt " + std::to_string(attempt + 1) + ": HTTP " +
                               std::to_string(res->status) + ";";
                continue;
            }
            if (res->status != 200) {
                throw TransportError("backend returned HTTP " +
                                     std::to_string(res->status) + ": " +
                                     res->body.substr(0, 200));
            }
            return parse_response(res->body, request.params.n_samples);
        }
        throw TransportError("backend unreachable after " +
                             std::to_string(max_retries_ + 1) + " attempts:" +
                             attempt_log);
    }

    std::string name() const override { return "http(" + config_.model + ")"; }

private:
    void configure(httplib::Client& client) const {
        const auto seconds = static_cast<time_t>(config_.timeout_s);
        const auto micros = static_cast<time_t>((config_.timeout_s - seconds) * 1e6);
        client.set_connection_timeout(seconds, micros);
        client.set_read_timeout(seconds, micros);
        client.set_write_timeout(seconds, micros);
    }

    httplib::Headers headers() const {
        httplib::Headers h;
        if (!api_key_.empty()) h.emplace("Authorization", "Bearer " + api_key_);
        return h;
    }

    void backoff(int attempt) {
        double jitter;
        {
            std::lock_guard lock(mutex_);
            jitter = jitter_.uniform();
        }
        const double delay =
            retry_base_delay_s_ * static_cast<double>(1 << (attempt - 1)) *
            (1.0 + 0.25 * jitter);
        std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }

    static GenerationResponse parse_response(const std::string& body, int n_samples) {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception& e) {
            throw TransportError(std::string("backend returned invalid JSON: ") +
                                 e.what());
        }
        GenerationResponse out;
        if (!doc.contains("choices") || !doc["choices"].is_array()) {
            throw TransportError("backend response missing choices array");
        }
        for (const auto& choice : doc["choices"]) {
            if (choice.contains("message") && choice["message"].contains("content")) {
                out.texts.push_back(choice["message"]["content"].get<std::string>());
            } else if (choice.contains("text")) {
                out.texts.push_back(choice["text"].get<std::string>());
            } else {
                throw TransportError("backend choice has neither message nor text");
            }
        }
        if (static_cast<int>(out.texts.size()) != n_samples) {
            throw TransportError("backend returned " + std::to_string(out.texts.size()) +
                                 " completions, expected " + std::to_string(n_samples));
        }
        if (doc.contains("usage")) {
            const auto& usage = doc["usage"];
            out.usage.prompt_tokens = usage.value("prompt_tokens", 0L);
            out.usage.completion_tokens = usage.value("completion_tokens", 0L);
            out.usage.total_tokens = usage.value("total_tokens", 0L);
        }
        return out;
    }

    BackendConfig config_;
    std::string api_key_;
    double retry_base_delay_s_;
    int max_retries_;
    RateLimiter limiter_;
    Rng jitter_;
    std::mutex mutex_;
};

// Remote sentence encoder: POST {"texts": [...]} and read back equal-length
// vectors, L2-normalized client side.
class HttpEncoder final : public TextEncoder {
public:
    explicit HttpEncoder(const std::string& endpoint_url, double timeout_s = 60.0)
        : url_(split_url(endpoint_url)), timeout_s_(timeout_s) {}

    SparseVec encode(std::string_view text) const override {
        nlohmann::json body;
        body["texts"] = nlohmann::json::array({std::string(text)});
        httplib::Client client(url_.base);
        const auto seconds = static_cast<time_t>(timeout_s_);
        client.set_connection_timeout(seconds, 0);
        client.set_read_timeout(seconds, 0);
        auto res = client.Post(url_.path, body.dump(), "application/json");
        if (!res || res->status != 200) {
            throw TransportError("encoder endpoint failed: " +
                                 (res ? "HTTP " + std::to_string(res->status)
                                      : httplib::to_string(res.error())));
        }
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw TransportError(std::string("encoder returned invalid JSON: ") +
                                 e.what());
        }
        if (!doc.contains("vectors") || !doc["vectors"].is_array() ||
            doc["vectors"].empty()) {
            throw TransportError("encoder response missing vectors");
        }
        const auto& raw = doc["vectors"][0];
        SparseVec vec;
        vec.dim = static_cast<std::uint32_t>(raw.size());
        {
            std::lock_guard lock(mutex_);
            if (dim_ == 0) dim_ = vec.dim;
            if (vec.dim != dim_) {
                throw TransportError("encoder dimension changed between calls");
            }
        }
        for (std::uint32_t i = 0; i < vec.dim; ++i) {
            const double v = raw[i].get<double>();
            if (v != 0.0) vec.items.emplace_back(i, v);
        }
        vec.normalize();
        return vec;
    }

    std::uint32_t dim() const override {
        std::lock_guard lock(mutex_);
        return dim_;
    }

private:
    SplitUrl url_;
    double timeout_s_;
    mutable std::uint32_t dim_ = 0;
    mutable std::mutex mutex_;
};

}  // namespace cok
