#include "katolab/rng.hpp"

#include <cmath>
#include <numbers>

namespace katolab {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

RngStream::RngStream(std::uint64_t seed, std::string_view label)
    : key_(splitmix64(seed ^ fnv1a(label))) {}

std::uint64_t RngStream::bits(std::uint64_t counter) const {
    return splitmix64(key_ ^ splitmix64(counter));
}

double RngStream::u01(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
}

double RngStream::gauss(std::uint64_t counter) const {
    // distinct sub-counters for the two uniforms
    const double u1 = static_cast<double>((bits(2 * counter) >> 11) + 1) * 0x1.0p-53;
    const double u2 = u01(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::complex<double> RngStream::cgauss(std::uint64_t counter) const {
    return {gauss(2 * counter), gauss(2 * counter + 1)};
}

} // namespace katolab
