#pragma once

#include "katolab/lattice.hpp"

#include <Eigen/Dense>

namespace katolab {

/// Unnormalized forward DFT of the site values (FFTW sign convention,
/// exp(-2*pi*i*k*x/P)). Bin b holds integer frequency k per axis with the
/// usual wrap ordering.
Eigen::VectorXcd fft_forward(const Grid& grid, const Eigen::VectorXcd& values);

/// Inverse of fft_forward (includes the 1/N normalization).
Eigen::VectorXcd fft_backward(const Grid& grid, const Eigen::VectorXcd& spectrum);

/// Signed integer frequency vector of a spectrum bin; components in
/// (-P/2, P/2] with the Nyquist bin mapped to +P/2.
std::array<int, 2> bin_frequency(const Grid& grid, std::size_t bin);

/// True if any component of the bin frequency sits on the Nyquist line.
bool bin_has_nyquist(const Grid& grid, std::size_t bin);

/// Apply a Fourier multiplier given per-bin factors.
GridFunction apply_multiplier(const GridFunction& f, const Eigen::VectorXcd& factors);

/// Circular convolution (kernel * f)(x) = sum_y kernel(x-y) f(y) h^dim,
/// with the kernel given by its values on the grid (offset from site 0).
GridFunction circular_convolve(const GridFunction& kernel, const GridFunction& f);

} // namespace katolab
