#pragma once

#include <unistd.h>

#include <cctype>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "cok/linalg.hpp"
#include "cok/triple.hpp"

namespace testsupport {

inline std::string data_dir() {
#ifdef COK_DATA_DIR
    return COK_DATA_DIR;
#else
    return "data";
#endif
}

inline std::string data_path(const std::string& rel) {
    return data_dir() + "/" + rel;
}

// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        auto base = std::filesystem::temp_directory_path();
        std::random_device rd;
        path_ = base / (tag + "-" + std::to_string(rd()) + "-" +
                        std::to_string(::getpid()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
}

// --- independent oracles (deliberately not using the library code paths) ---

// Straight-line evaluation of ||s M + c - o M||^2 + alpha ||c - r||^2.
inline double oracle_energy(const std::vector<double>& s, const std::vector<double>& r,
                            const std::vector<double>& c, const std::vector<double>& o,
                            const std::vector<std::vector<double>>& m, double alpha) {
    const std::size_t d = s.size();
    double translation = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        double sm = 0.0;
        double om = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            sm += s[i] * m[i][j];
            om += o[i] * m[i][j];
        }
        const double diff = sm + c[j] - om;
        translation += diff * diff;
    }
    double cluster = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        const double diff = c[j] - r[j];
        cluster += diff * diff;
    }
    return translation + alpha * cluster;
}

// Whitespace/casing normalization re-implemented from the stated rules, for
// the exact-verification membership oracle.
inline std::string oracle_fold(const std::string& raw) {
    std::string out;
    bool pending = false;
    bool started = false;
    for (char ch : raw) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            pending = started;
            continue;
        }
        if (pending) {
            out.push_back(' ');
            pending = false;
        }
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        started = true;
    }
    return out;
}

inline std::string oracle_triple_key(const std::string& s, const std::string& r,
                                     const std::string& o) {
    return oracle_fold(s) + "\x1f" + oracle_fold(r) + "\x1f" + oracle_fold(o);
}

}  // namespace testsupport
