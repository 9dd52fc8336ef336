#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cok/errors.hpp"
#include "cok/hashing.hpp"
#include "cok/io.hpp"
#include "cok/text.hpp"

namespace cok {

// Unit-norm sparse vector; indices strictly increasing.
struct SparseVec {
    std::uint32_t dim = 0;
    std::vector<std::pair<std::uint32_t, double>> items;

    double dot(const SparseVec& other) const {
        double s = 0.0;
        std::size_t i = 0;
        std::size_t j = 0;
        while (i < items.size() && j < other.items.size()) {
            if (items[i].first < other.items[j].first) {
                ++i;
            } else if (items[i].first > other.items[j].first) {
                ++j;
            } else {
                s += items[i].second * other.items[j].second;
                ++i;
                ++j;
            }
        }
        return s;
    }

    double norm() const {
        double s = 0.0;
        for (const auto& [idx, v] : items) s += v * v;
        return std::sqrt(s);
    }

    void normalize() {
        const double n = norm();
        if (n > 0.0) {
            for (auto& [idx, v] : items) v /= n;
        }
    }
};

inline double cosine(const SparseVec& a, const SparseVec& b) { return a.dot(b); }

// Sentence encoder contract: deterministic, fixed dimension, unit norm.
class TextEncoder {
public:
    virtual ~TextEncoder() = default;
    virtual SparseVec encode(std::string_view text) const = 0;
    virtual std::uint32_t dim() const = 0;
};

// Default dependency-free encoder: signed feature hashing of word unigrams
// and character 3-grams of the case-folded text into 2^15 buckets.
class HashedNgramEncoder final : public TextEncoder {
public:
    static constexpr std::uint32_t kDim = 1u << 15;

    SparseVec encode(std::string_view text) const override {
        std::map<std::uint32_t, double> acc;
        const std::string folded = fold_key(text);
        for (const auto& word : tokenize_words(folded)) {
            bump(acc, "w:" + word);
        }
        // 3-grams over bytes of the folded string, including spaces, so that
        // nearby words still share features.
        if (folded.size() >= 3) {
            for (std::size_t i = 0; i + 3 <= folded.size(); ++i) {
                bump(acc, "c3:" + std::string(folded.substr(i, 3)));
            }
        } else if (!folded.empty()) {
            bump(acc, "c3:" + folded);
        }
        SparseVec out;
        out.dim = kDim;
        for (const auto& [idx, v] : acc) {
            if (v != 0.0) out.items.emplace_back(idx, v);
        }
        if (out.items.empty()) {
            // Degenerate input still yields a deterministic unit vector.
            out.items.emplace_back(0, 1.0);
            return out;
        }
        out.normalize();
        return out;
    }

    std::uint32_t dim() const override { return kDim; }

private:
    static void bump(std::map<std::uint32_t, double>& acc, const std::string& feature) {
        const std::uint64_t h = fnv1a64(feature);
        const auto bucket = static_cast<std::uint32_t>(h & (kDim - 1));
        const double sign = ((h >> 32) & 1) ? 1.0 : -1.0;
        acc[bucket] += sign;
    }
};

// --- precomputed embedding file ---
//
// Layout: magic "COKV", u16 version, u32 dim, u32 count, then per entry a
// length-prefixed UTF-8 text followed by dim little-endian f64 components.

inline constexpr std::string_view kEmbeddingFileMagic = "COKV";

inline void write_embedding_file(
    const std::string& path, std::uint32_t dim,
    const std::vector<std::pair<std::string, std::vector<double>>>& entries) {
    std::string out;
    out.append(kEmbeddingFileMagic);
    put_u16(out, 1);
    put_u32(out, dim);
    put_u32(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& [text, vec] : entries) {
        if (vec.size() != dim) {
            throw ContractViolation("embedding entry for \"" + text +
                                    "\" has dimension " + std::to_string(vec.size()) +
                                    ", expected " + std::to_string(dim));
        }
        put_str(out, text);
        for (double v : vec) put_f64(out, v);
    }
    write_file_bytes(path, out);
}

// Serves vectors recorded ahead of time, keyed by a stable hash of the exact
// query text. Vectors are normalized on load. A lookup miss is a data error:
// the file does not cover the corpus.
class PrecomputedEncoder final : public TextEncoder {
public:
    explicit PrecomputedEncoder(const std::string& path) {
        const std::string bytes = read_file_bytes(path);
        ByteReader r(bytes, path);
        if (r.remaining() < 4 || r.raw(4) != kEmbeddingFileMagic) {
            throw DataError(path + ": not an embedding file");
        }
        const auto version = r.u16();
        if (version != 1) {
            throw UnsupportedVersion(path + ": embedding file version " +
                                     std::to_string(version));
        }
        dim_ = r.u32();
        const std::uint32_t count = r.u32();
        for (std::uint32_t i = 0; i < count; ++i) {
            const std::string text = r.str();
            SparseVec vec;
            vec.dim = dim_;
            vec.items.reserve(dim_);
            for (std::uint32_t j = 0; j < dim_; ++j) {
                const double v = r.f64();
                if (v != 0.0) vec.items.emplace_back(j, v);
            }
            vec.normalize();
            table_.emplace(fnv1a64(text), std::move(vec));
        }
    }

    SparseVec encode(std::string_view text) const override {
        auto it = table_.find(fnv1a64(text));
        if (it == table_.end()) {
            throw DataError("no precomputed embedding for text: \"" +
                            std::string(text.substr(0, 80)) + "\"");
        }
        return it->second;
    }

    std::uint32_t dim() const override { return dim_; }

private:
    std::uint32_t dim_ = 0;
    std::unordered_map<std::uint64_t, SparseVec> table_;
};

}  // namespace cok
