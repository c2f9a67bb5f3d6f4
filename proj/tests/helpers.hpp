#pragma once

#include "katolab/lattice.hpp"
#include "katolab/rng.hpp"

#include <numbers>

namespace katolab::testing {

/// Band-limited random function (no Nyquist content), unit spectral norm.
inline GridFunction random_bandlimited(std::shared_ptr<const Grid> grid, std::uint64_t seed,
                                       int kmax = 0, bool mean_free = false) {
    const Grid& g = *grid;
    if (kmax == 0) kmax = std::max(1, g.points_per_side() / 4);
    RngStream rng(seed, "tests/bandlimited");
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(g.n_sites());
    double norm_sq = 0.0;
    std::uint64_t ctr = 0;
    const int ky_lo = g.dim() == 2 ? -kmax : 0;
    const int ky_hi = g.dim() == 2 ? kmax : 0;
    for (int kx = -kmax; kx <= kmax; ++kx) {
        for (int ky = ky_lo; ky <= ky_hi; ++ky) {
            if (mean_free && kx == 0 && ky == 0) {
                ++ctr;
                continue;
            }
            const std::complex<double> c = rng.cgauss(ctr++);
            norm_sq += std::norm(c);
            for (std::size_t i = 0; i < g.n_sites(); ++i) {
                Eigen::VectorXd x = g.site_position(i);
                double arg = 2 * std::numbers::pi * kx * x[0] / g.side();
                if (g.dim() == 2) arg += 2 * std::numbers::pi * ky * x[1] / g.side();
                v[i] += c * std::exp(std::complex<double>(0, arg));
            }
        }
    }
    v /= std::sqrt(norm_sq);
    return GridFunction(grid, v);
}

inline GridFunction plane_wave(std::shared_ptr<const Grid> grid, int k) {
    const Grid& g = *grid;
    Eigen::VectorXcd v(g.n_sites());
    for (std::size_t i = 0; i < g.n_sites(); ++i)
        v[i] = std::exp(std::complex<double>(
            0, 2 * std::numbers::pi * k * g.site_position(i)[0] / g.side()));
    return GridFunction(grid, v);
}

inline VectorField random_vector_field(std::shared_ptr<const Grid> grid, std::uint64_t seed) {
    const Grid& g = *grid;
    RngStream rng(seed, "tests/vector");
    Eigen::MatrixXcd v(g.n_sites(), g.dim());
    for (std::size_t i = 0; i < g.n_sites(); ++i)
        for (int d = 0; d < g.dim(); ++d) v(i, d) = rng.cgauss(i * 4 + d);
    return VectorField(grid, v);
}

} // namespace katolab::testing
