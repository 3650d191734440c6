#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>
#include <vector>

#include "wpfed/common.hpp"

namespace wpfed {

/// splitmix64 finalizer; used to derive independent sub-seeds from one master seed.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<uint8_t>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Deterministic sub-seed derivation. Streams keyed by (purpose, ids...) are
/// independent of the order in which other streams are consumed, which keeps
/// simulation results independent of client execution order.
inline uint64_t derive_seed(uint64_t base, std::string_view purpose,
                            std::initializer_list<uint64_t> ids = {}) {
    uint64_t s = mix64(base ^ fnv1a64(purpose));
    for (uint64_t id : ids) {
        s = mix64(s ^ mix64(id));
    }
    return s;
}

/// Seeded random stream. Thin wrapper over mt19937_64 with the draw helpers
/// the simulation needs.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    double uniform() {
        return std::uniform_real_distribution<double>(0.0, 1.0)(eng_);
    }

    /// Uniform integer in [lo, hi], inclusive.
    int uniform_int(int lo, int hi) {
        return std::uniform_int_distribution<int>(lo, hi)(eng_);
    }

    double normal(double mean = 0.0, double stddev = 1.0) {
        return std::normal_distribution<double>(mean, stddev)(eng_);
    }

    std::array<uint8_t, 16> bytes16() {
        std::array<uint8_t, 16> out{};
        for (int i = 0; i < 2; ++i) {
            uint64_t w = eng_();
            for (int j = 0; j < 8; ++j) {
                out[i * 8 + j] = static_cast<uint8_t>(w >> (8 * j));
            }
        }
        return out;
    }

    /// Uniform sample of k items without replacement (partial Fisher-Yates).
    std::vector<int> sample_without_replacement(std::vector<int> items, size_t k) {
        if (k > items.size()) {
            throw InvalidInputError("sample size exceeds population");
        }
        for (size_t i = 0; i < k; ++i) {
            size_t j = i + static_cast<size_t>(uniform_int(0, static_cast<int>(items.size() - i - 1)));
            std::swap(items[i], items[j]);
        }
        items.resize(k);
        return items;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        std::shuffle(v.begin(), v.end(), eng_);
    }

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
};

}  // namespace wpfed
