#pragma once

#include <complex>
#include <cstdint>
#include <string_view>

namespace katolab {

/// Counter-based random stream (splitmix64 over a keyed counter).
///
/// Every draw is a pure function of (seed, stream label, counter), so
/// ensembles are reproducible across runs, platforms and call order.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::string_view label);

    std::uint64_t bits(std::uint64_t counter) const;

    /// Uniform in [0, 1) with 53-bit resolution.
    double u01(std::uint64_t counter) const;

    /// Standard normal via Box-Muller (two uniforms per draw, no rejection).
    double gauss(std::uint64_t counter) const;

    /// Complex standard normal, unit variance per component.
    std::complex<double> cgauss(std::uint64_t counter) const;

    std::uint64_t key() const { return key_; }

private:
    std::uint64_t key_;
};

/// FNV-1a over bytes; also used for config digests.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

} // namespace katolab
