#pragma once

// Sign-random-projection LSH over flattened model parameters. All clients
// derive the same basis from the public network seed, so codes published on
// the board are directly comparable via Hamming distance.

#include <cmath>
#include <string>
#include <vector>

#include "wpfed/model.hpp"
#include "wpfed/rng.hpp"

namespace wpfed {

/// Fixed-length bit vector summarizing a parameter vector.
/// Hex serialization is most-significant bit first; when the bit count is
/// not a nibble multiple, the final nibble is zero-padded in its low bits.
struct LshCode {
    std::vector<uint8_t> bits;  // each entry 0 or 1

    int size() const { return static_cast<int>(bits.size()); }

    bool operator==(const LshCode& o) const { return bits == o.bits; }

    std::string to_hex() const {
        static const char* digits = "0123456789abcdef";
        std::string out;
        out.reserve((bits.size() + 3) / 4);
        for (size_t i = 0; i < bits.size(); i += 4) {
            int nibble = 0;
            for (size_t j = 0; j < 4; ++j) {
                nibble <<= 1;
                if (i + j < bits.size() && bits[i + j]) nibble |= 1;
            }
            out.push_back(digits[nibble]);
        }
        return out;
    }

    static LshCode from_hex(const std::string& hex, int bit_count) {
        if (static_cast<int>(hex.size()) != (bit_count + 3) / 4) {
            throw InvalidInputError("lsh code hex length does not match bit count");
        }
        LshCode code;
        code.bits.resize(bit_count);
        for (int i = 0; i < bit_count; ++i) {
            int nibble = hex_nibble(hex[i / 4]);
            code.bits[i] = static_cast<uint8_t>((nibble >> (3 - i % 4)) & 1);
        }
        return code;
    }
};

/// Shared projection basis: b Gaussian unit directions drawn from the public
/// network seed, identical on every client.
struct LshBasis {
    int dim = 0;
    int bits = 0;
    uint64_t seed = 0;
    std::vector<std::vector<double>> hyperplanes;
};

inline LshBasis make_basis(int param_dim, int b, uint64_t network_seed) {
    if (b < 1) throw InvalidInputError("make_basis: bit count must be >= 1");
    if (param_dim < 1) throw InvalidInputError("make_basis: parameter dimension must be >= 1");
    LshBasis basis{param_dim, b, network_seed, {}};
    basis.hyperplanes.resize(b);
    Rng rng(derive_seed(network_seed, "lsh-basis"));
    for (auto& h : basis.hyperplanes) {
        h.resize(param_dim);
        double norm2 = 0.0;
        for (double& x : h) {
            x = rng.normal();
            norm2 += x * x;
        }
        double inv = 1.0 / std::sqrt(std::max(norm2, 1e-300));
        for (double& x : h) x *= inv;
    }
    return basis;
}

/// Bit k is 1 iff the flattened parameters have non-negative projection on
/// hyperplane k. Zero projections encode as 1 so the rule is deterministic.
inline LshCode encode(const std::vector<double>& flat, const LshBasis& basis) {
    if (static_cast<int>(flat.size()) != basis.dim) {
        throw InvalidInputError("encode: parameter dimension does not match basis");
    }
    LshCode code;
    code.bits.resize(basis.bits);
    for (int k = 0; k < basis.bits; ++k) {
        const auto& h = basis.hyperplanes[k];
        double dot = 0.0;
        for (int j = 0; j < basis.dim; ++j) {
            dot += flat[j] * h[j];
        }
        code.bits[k] = dot >= 0.0 ? 1 : 0;
    }
    return code;
}

inline LshCode encode(const ModelParams& params, const LshBasis& basis) {
    return encode(flatten(params), basis);
}

/// Count of differing bits.
inline int hamming(const LshCode& a, const LshCode& b) {
    if (a.size() != b.size()) {
        throw InvalidInputError("hamming: code lengths differ");
    }
    int d = 0;
    for (size_t i = 0; i < a.bits.size(); ++i) {
        d += a.bits[i] != b.bits[i];
    }
    return d;
}

}  // namespace wpfed
