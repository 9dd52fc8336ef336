#pragma once

#include <cstdint>
#include <deque>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cok/errors.hpp"
#include "cok/hashing.hpp"
#include "cok/io.hpp"

namespace cok {

// Paper-aligned defaults: greedy decoding at temperature 0, 512 output
// tokens, 10 sampled paths under self-consistency.
inline constexpr double kDefaultTemperature = 0.0;
inline constexpr int kDefaultMaxTokens = 512;
inline constexpr int kDefaultSelfConsistencySamples = 10;

struct DecodingParams {
    double temperature = kDefaultTemperature;
    int max_tokens = kDefaultMaxTokens;
    int n_samples = 1;

    void validate() const {
        if (temperature < 0.0) throw ConfigError("temperature must be >= 0");
        if (max_tokens < 1) throw ConfigError("max_tokens must be positive");
        if (n_samples < 1) throw ConfigError("n_samples must be positive");
        if (n_samples > 1 && temperature <= 0.0) {
            throw ConfigError("sampling multiple completions requires temperature > 0");
        }
    }
};

struct GenerationRequest {
    std::string prompt;
    DecodingParams params;
    std::string model;
};

struct Usage {
    long prompt_tokens = 0;
    long completion_tokens = 0;
    long total_tokens = 0;
};

struct GenerationResponse {
    std::vector<std::string> texts;  // exactly n_samples entries on success
    Usage usage;
};

// Stable 64-bit key over (prompt bytes, decoding params); replay records and
// mock scripts are addressed by it.
inline std::uint64_t prompt_fingerprint(std::string_view prompt,
                                        const DecodingParams& params) {
    std::uint64_t h = fnv1a64(prompt);
    h = hash_mix(h, std::bit_cast<std::uint64_t>(params.temperature));
    h = hash_mix(h, static_cast<std::uint64_t>(params.max_tokens));
    h = hash_mix(h, static_cast<std::uint64_t>(params.n_samples));
    return h;
}

class LLMBackend {
public:
    virtual ~LLMBackend() = default;
    virtual GenerationResponse complete(const GenerationRequest& request) = 0;
    virtual std::string name() const = 0;
};

// Deterministic scripted backend. Responses are queued either globally (served
// in order to any request) or per prompt fingerprint; fingerprint scripts win
// when both exist. An empty queue is a test bug and throws.
class MockBackend final : public LLMBackend {
public:
    void script(std::vector<std::string> texts) {
        std::lock_guard lock(mutex_);
        global_.push_back(std::move(texts));
    }

    void script_for(std::string_view prompt, const DecodingParams& params,
                    std::vector<std::string> texts) {
        std::lock_guard lock(mutex_);
        keyed_[prompt_fingerprint(prompt, params)].push_back(std::move(texts));
    }

    GenerationResponse complete(const GenerationRequest& request) override {
        request.params.validate();
        std::lock_guard lock(mutex_);
        const std::uint64_t fp = prompt_fingerprint(request.prompt, request.params);
        std::vector<std::string> texts;
        if (auto it = keyed_.find(fp); it != keyed_.end() && !it->second.empty()) {
            texts = std::move(it->second.front());
            it->second.pop_front();
        } else if (!global_.empty()) {
            texts = std::move(global_.front());
            global_.pop_front();
        } else {
            throw ScriptExhausted("mock backend script exhausted for fingerprint " +
                                  std::to_string(fp));
        }
        if (static_cast<int>(texts.size()) != request.params.n_samples) {
            throw ScriptExhausted("scripted response has " +
                                  std::to_string(texts.size()) + " texts, request wants " +
                                  std::to_string(request.params.n_samples));
        }
        ++request_count_;
        completion_count_ += static_cast<long>(texts.size());
        GenerationResponse response;
        response.texts = std::move(texts);
        return response;
    }

    std::string name() const override { return "mock"; }

    long request_count() const {
        std::lock_guard lock(mutex_);
        return request_count_;
    }

    long completion_count() const {
        std::lock_guard lock(mutex_);
        return completion_count_;
    }

private:
    mutable std::mutex mutex_;
    std::deque<std::vector<std::string>> global_;
    std::unordered_map<std::uint64_t, std::deque<std::vector<std::string>>> keyed_;
    long request_count_ = 0;
    long completion_count_ = 0;
};

// --- append-only replay log ---
//
// Header: "COKR", u16 version. Records: u64 fingerprint, f64 temperature,
// u32 max_tokens, u32 n_samples, u32 text count, then length-prefixed texts.

inline constexpr std::string_view kReplayLogMagic = "COKR";
inline constexpr std::uint16_t kReplayLogVersion = 1;

struct ReplayRecord {
    std::uint64_t fingerprint = 0;
    DecodingParams params;
    std::vector<std::string> texts;
};

inline std::string encode_replay_record(const ReplayRecord& record) {
    std::string out;
    put_u64(out, record.fingerprint);
    put_f64(out, record.params.temperature);
    put_u32(out, static_cast<std::uint32_t>(record.params.max_tokens));
    put_u32(out, static_cast<std::uint32_t>(record.params.n_samples));
    put_u32(out, static_cast<std::uint32_t>(record.texts.size()));
    for (const auto& t : record.texts) put_str(out, t);
    return out;
}

inline std::vector<ReplayRecord> load_replay_log(const std::string& path) {
    const std::string bytes = read_file_bytes(path);
    ByteReader r(bytes, path);
    if (r.remaining() < 6 || r.raw(4) != kReplayLogMagic) {
        throw DataError(path + ": not a replay log");
    }
    const std::uint16_t version = r.u16();
    if (version != kReplayLogVersion) {
        throw UnsupportedVersion(path + ": unsupported replay log version " +
                                 std::to_string(version));
    }
    std::vector<ReplayRecord> records;
    while (!r.done()) {
        ReplayRecord record;
        record.fingerprint = r.u64();
        record.params.temperature = r.f64();
        record.params.max_tokens = static_cast<int>(r.u32());
        record.params.n_samples = static_cast<int>(r.u32());
        const std::uint32_t count = r.u32();
        record.texts.reserve(count);
        for (std::uint32_t i = 0; i < count; ++i) record.texts.push_back(r.str());
        records.push_back(std::move(record));
    }
    return records;
}

// Passes requests through to an inner backend and appends every response to
// the log so the run can later be replayed bit-for-bit.
class RecordingBackend final : public LLMBackend {
public:
    RecordingBackend(LLMBackend& inner, std::string path)
        : inner_(&inner), path_(std::move(path)) {
        std::ifstream probe(path_, std::ios::binary);
        const bool fresh = !probe || probe.peek() == std::ifstream::traits_type::eof();
        probe.close();
        out_.open(path_, std::ios::binary | std::ios::app);
        if (!out_) throw DataError("cannot open replay log for append: " + path_);
        if (fresh) {
            std::string header;
            header.append(kReplayLogMagic);
            put_u16(header, kReplayLogVersion);
            out_.write(header.data(), static_cast<std::streamsize>(header.size()));
        }
    }

    GenerationResponse complete(const GenerationRequest& request) override {
        GenerationResponse response = inner_->complete(request);
        ReplayRecord record;
        record.fingerprint = prompt_fingerprint(request.prompt, request.params);
        record.params = request.params;
        record.texts = response.texts;
        const std::string bytes = encode_replay_record(record);
        {
            std::lock_guard lock(mutex_);
            out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
            out_.flush();
            if (!out_) throw DataError("short write to replay log " + path_);
        }
        return response;
    }

    std::string name() const override { return "record(" + inner_->name() + ")"; }

private:
    LLMBackend* inner_;
    std::string path_;
    std::ofstream out_;
    std::mutex mutex_;
};

// Serves recorded responses by prompt fingerprint, in recorded order; a miss
// is an error naming the fingerprint. Makes runs deterministic and free of
// network calls.
class ReplayBackend final : public LLMBackend {
public:
    explicit ReplayBackend(const std::string& path) {
        for (auto& record : load_replay_log(path)) {
            queues_[record.fingerprint].push_back(std::move(record.texts));
        }
    }

    GenerationResponse complete(const GenerationRequest& request) override {
        request.params.validate();
        const std::uint64_t fp = prompt_fingerprint(request.prompt, request.params);
        std::lock_guard lock(mutex_);
        auto it = queues_.find(fp);
        if (it == queues_.end() || it->second.empty()) {
            throw ReplayMiss(fp, "replay log has no response for fingerprint " +
                                     std::to_string(fp));
        }
        GenerationResponse response;
        response.texts = std::move(it->second.front());
        it->second.pop_front();
        return response;
    }

    std::string name() const override { return "replay"; }

private:
    std::mutex mutex_;
    std::unordered_map<std::uint64_t, std::deque<std::vector<std::string>>> queues_;
};

}  // namespace cok
