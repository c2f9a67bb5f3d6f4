#pragma once

#include "katolab/elliptic.hpp"

namespace katolab {

/// Log-spaced midpoint nodes for integrals against dt/t, with the scalar
/// calibration constant that makes
///   c_norm * int t^3 e^{-2 t^2 z} z^2 dt/t = sqrt(z)
/// hold exactly (c_norm = 8 sqrt(2) / sqrt(pi)).
struct QuadratureScheme {
    Eigen::VectorXd nodes;
    double dlog = 0.0;
    double t_min = 0.0, t_max = 0.0;
    double c_norm = 0.0;

    /// Nodes spanning the operator spectrum: t_min = lo_factor/sqrt(mu_max),
    /// t_max = hi_factor/sqrt(mu_min+), with at least m nodes.
    static QuadratureScheme spanning(const Operator& op, int m, double lo_factor = 0.1,
                                     double hi_factor = 10.0);
    static QuadratureScheme explicit_window(double t_min, double t_max, int m);
};

/// Principal square root through the cached eigendecomposition; eigenvalues
/// with tiny negative real part are clamped to zero.
Operator spectral_sqrt(const Operator& op);

/// Square root of L applied to f by quadrature:
///   c_norm * sum_nodes t^3 e^{-2 t^2 L} L^2 f  (dt/t midpoint weights).
/// Throws if the scheme does not span the spectrum.
GridFunction quadrature_sqrt_apply(const Operator& op, const GridFunction& f,
                                   const QuadratureScheme& scheme);

/// |L^{1/2} f|_{L2(w)} / edge-weighted |grad f|_{L2(w)}, with f w-centered
/// first. Throws on (numerically) constant f.
double kato_ratio(const Operator& op, const GridFunction& f);

/// Signed slack of each link in the chain reducing the lower Kato bound to
/// the upper one:
///   [0] lambda^{-1} Re a(f,f) - |grad f|_{edge,w}^2
///   [1] -(|Re a(f,f) - Re <Lf,f>_w|)                (identity)
///   [2] -(|<Lf,f>_w - <L^{1/2}f,(L^{1/2})*f>_w|)    (identity)
///   [3] |L^{1/2}f| |(L^{1/2})*f| - |<L^{1/2}f,(L^{1/2})*f>_w|
/// All should be >= -tolerance.
std::array<double, 4> duality_chain_check(const Operator& op, const GridFunction& f);

/// Operator distance |(L^{1/2})*_w - (L*)^{1/2}|_F / |L^{1/2}|_F, both sides
/// computed spectrally.
double sqrt_adjoint_commutation(const Operator& op);

} // namespace katolab
