#pragma once

#include <cstdint>
#include <random>

namespace cok {

// Seeded RNG with hand-rolled distributions so that streams are identical
// across standard library implementations (std distributions are not
// guaranteed to produce the same sequences).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform index in [0, n). n must be > 0.
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(gen_() % n);
    }

    bool coin() { return (gen_() & 1) != 0; }

    // Fisher-Yates shuffle, stable across platforms.
    template <typename Container>
    void shuffle(Container& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[index(i)]);
        }
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace cok
