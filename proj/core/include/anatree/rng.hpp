#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace anatree {

// Deterministic RNG helpers. std::uniform_int_distribution is
// implementation-defined, so seeded code paths draw bounded values through
// rejection sampling on the raw mt19937_64 stream instead. Same seed, same
// sequence, on any toolchain.

class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    // uniform in [0, n)
    uint64_t below(uint64_t n) {
        if (n <= 1) return 0;
        uint64_t limit = std::numeric_limits<uint64_t>::max() - std::numeric_limits<uint64_t>::max() % n;
        for (;;) {
            uint64_t x = engine_();
            if (x < limit) return x % n;
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    std::vector<size_t> permutation(size_t n) {
        std::vector<size_t> p(n);
        for (size_t i = 0; i < n; ++i) p[i] = i;
        shuffle(p);
        return p;
    }

    uint64_t raw() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

} // namespace anatree
