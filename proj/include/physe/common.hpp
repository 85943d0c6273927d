#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace physe {

/// Dimension mismatch between tensors or against an operation's contract.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

/// Input lies outside an operation's numeric domain (log of non-positive,
/// division by zero, singular physical constants, degenerate norms).
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

/// A documented precondition was violated by the caller.
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed external data (CSV rows, checkpoint files, report files).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid run configuration (unknown key, out-of-range value).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

/// Deterministic 64-bit RNG used across the project.  Every stochastic
/// component (init, augmentation, dropout, shuffling) owns one of these,
/// seeded explicitly, so runs are reproducible bit for bit.
using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double gaussian(Rng& rng, double mean, double stddev) {
    return std::normal_distribution<double>(mean, stddev)(rng);
}

/// Derives an independent stream seed from a base seed and a stream tag.
/// splitmix64 finalizer; avoids correlated mt19937 states from nearby seeds.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// FNV-1a over a byte string; stable across platforms and runs, used for
/// config hashes in reports.
inline std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace physe
