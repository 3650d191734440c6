#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace wpfed {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kHashAlgorithm = "sha256";

/// Thrown when an operation receives arguments that violate its contract
/// (shape mismatches, out-of-range values, empty inputs).
class InvalidInputError : public std::runtime_error {
public:
    explicit InvalidInputError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Thrown when a scenario or data configuration is infeasible.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Thrown on protocol-level violations (non-finite peer losses, malformed records).
class ProtocolError : public std::runtime_error {
public:
    explicit ProtocolError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Thrown when training produces a non-finite loss or gradient.
class NumericError : public std::runtime_error {
public:
    NumericError(const std::string& msg, int round) : std::runtime_error(msg), round_(round) {}
    int round() const { return round_; }

private:
    int round_;
};

/// Thrown when the announcement board rejects a record (duplicate or wrong phase).
class BoardError : public std::runtime_error {
public:
    explicit BoardError(const std::string& msg) : std::runtime_error(msg) {}
};

inline std::string to_hex(const uint8_t* data, size_t n) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(n * 2);
    for (size_t i = 0; i < n; ++i) {
        out.push_back(digits[data[i] >> 4]);
        out.push_back(digits[data[i] & 0x0f]);
    }
    return out;
}

inline std::string to_hex(const std::vector<uint8_t>& data) {
    return to_hex(data.data(), data.size());
}

template <size_t N>
std::string to_hex(const std::array<uint8_t, N>& data) {
    return to_hex(data.data(), N);
}

inline int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw InvalidInputError(std::string("invalid hex character '") + c + "'");
}

inline std::vector<uint8_t> from_hex(const std::string& hex) {
    if (hex.size() % 2 != 0) {
        throw InvalidInputError("hex string has odd length");
    }
    std::vector<uint8_t> out(hex.size() / 2);
    for (size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<uint8_t>((hex_nibble(hex[2 * i]) << 4) | hex_nibble(hex[2 * i + 1]));
    }
    return out;
}

}  // namespace wpfed
