#include "katolab/functional.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace katolab {

namespace {

Eigen::VectorXd log_midpoints(double t_min, double t_max, int m) {
    Eigen::VectorXd nodes(m);
    const double span = std::log(t_max / t_min);
    for (int i = 0; i < m; ++i)
        nodes[i] = t_min * std::exp(span * (i + 0.5) / m);
    return nodes;
}

std::complex<double> clamped(std::complex<double> z, double scale) {
    if (z.real() < 0.0 && z.real() > -1e-12 * scale) return {0.0, z.imag()};
    return z;
}

} // namespace

QuadratureScheme QuadratureScheme::explicit_window(double t_min, double t_max, int m) {
    if (!(t_min < t_max)) throw std::invalid_argument("quadrature: t_min must be < t_max");
    if (m < 16) throw std::invalid_argument("quadrature: need at least 16 nodes");
    QuadratureScheme q;
    q.t_min = t_min;
    q.t_max = t_max;
    q.nodes = log_midpoints(t_min, t_max, m);
    q.dlog = std::log(t_max / t_min) / m;
    q.c_norm = 8.0 * std::sqrt(2.0) / std::sqrt(std::numbers::pi);
    return q;
}

QuadratureScheme QuadratureScheme::spanning(const Operator& op, int m, double lo_factor,
                                            double hi_factor) {
    const double mu_max = op.spectral_max();
    const double mu_min = op.smallest_nonzero_eigenvalue();
    // The lower cutoff controls the truncation floor (~(t_min sqrt(mu_max))^3/3),
    // so it deepens with the node budget; the coverage requirement
    // t_min <= lo_factor / sqrt(mu_max) stays satisfied.
    const double lo_eff = lo_factor * std::min(0.25, 50.0 / m);
    return explicit_window(lo_eff / std::sqrt(mu_max), hi_factor / std::sqrt(mu_min), m);
}

Operator spectral_sqrt(const Operator& op) {
    Eigen::VectorXcd roots;
    if (op.backend() == SpectralBackend::diagonal) {
        const double scale = std::max(1.0, op.spectral_max());
        for (Eigen::Index i = 0; i < op.eigenvalues().size(); ++i) {
            if (op.eigenvalues()[i].real() < -1e-12 * scale)
                throw std::runtime_error(
                    "spectral_sqrt: eigenvalue with substantially negative real part");
        }
        roots.resize(op.eigenvalues().size());
        for (Eigen::Index i = 0; i < roots.size(); ++i)
            roots[i] = std::sqrt(clamped(op.eigenvalues()[i], scale));
    }
    return op.derived(op.sqrt_matrix(), std::move(roots));
}

GridFunction quadrature_sqrt_apply(const Operator& op, const GridFunction& f,
                                   const QuadratureScheme& scheme) {
    const double mu_max = op.spectral_max();
    const double mu_min = op.smallest_nonzero_eigenvalue();
    const double want_lo = 0.1 / std::sqrt(mu_max);
    const double want_hi = 10.0 / std::sqrt(mu_min);
    if (scheme.t_min > want_lo * (1 + 1e-9) || scheme.t_max < want_hi * (1 - 1e-9))
        throw std::invalid_argument(
            "quadrature_sqrt_apply: scheme does not span the spectrum; need t_min <= " +
            std::to_string(want_lo) + " and t_max >= " + std::to_string(want_hi));

    Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(f.values.size());
    if (op.backend() == SpectralBackend::diagonal) {
        for (Eigen::Index i = 0; i < scheme.nodes.size(); ++i) {
            const double t = scheme.nodes[i];
            GridFunction term = op.spectral_apply(
                [t](std::complex<double> z) {
                    return t * t * t * z * z * std::exp(-2.0 * t * t * z);
                },
                f);
            acc += term.values;
        }
    } else {
        const Eigen::VectorXcd l2f = op.matrix() * (op.matrix() * f.values);
        for (Eigen::Index i = 0; i < scheme.nodes.size(); ++i) {
            const double t = scheme.nodes[i];
            acc += t * t * t * (op.heat_matrix(2 * t * t) * l2f);
        }
    }
    acc *= scheme.c_norm * scheme.dlog;
    return GridFunction(f.grid, std::move(acc));
}

double kato_ratio(const Operator& op, const GridFunction& f) {
    GridFunction fc = center_w(f, op.weight());
    const double denom = grad_norm_edge_w(fc, op.weight());
    const double fscale = std::sqrt(std::abs(inner_w(f, f, op.weight())));
    if (denom <= 1e-13 * std::max(1.0, fscale))
        throw std::invalid_argument("kato_ratio: constant test function has zero gradient");
    GridFunction root(fc.grid, op.sqrt_matrix() * fc.values);
    const double num = std::sqrt(std::abs(inner_w(root, root, op.weight())));
    return num / denom;
}

std::array<double, 4> duality_chain_check(const Operator& op, const GridFunction& f) {
    const Weight& w = op.weight();
    GridFunction fc = center_w(f, w);
    if (!op.field()) throw std::runtime_error("duality_chain_check: operator has no field");

    const std::complex<double> aff = sesquilinear_form(*op.field(), fc, fc);
    const double grad_sq = std::pow(grad_norm_edge_w(fc, w), 2);
    const double lambda = op.field()->lambda_decl;

    GridFunction lf = op.apply(fc);
    const std::complex<double> lff = inner_w(lf, fc, w);

    Operator root = spectral_sqrt(op);
    GridFunction rf = GridFunction(fc.grid, root.matrix() * fc.values);
    GridFunction rstarf = GridFunction(fc.grid, root.w_adjoint_matrix() * fc.values);
    const std::complex<double> pairing = inner_w(rf, rstarf, w);
    const double norm_rf = std::sqrt(std::abs(inner_w(rf, rf, w)));
    const double norm_rsf = std::sqrt(std::abs(inner_w(rstarf, rstarf, w)));

    return {
        aff.real() / lambda - grad_sq,
        -std::abs(aff.real() - lff.real()),
        -std::abs(lff - pairing),
        norm_rf * norm_rsf - std::abs(pairing),
    };
}

double sqrt_adjoint_commutation(const Operator& op) {
    Operator root = spectral_sqrt(op);
    Eigen::MatrixXcd lhs = root.w_adjoint_matrix();
    Operator star = adjoint(op);
    Eigen::MatrixXcd rhs = spectral_sqrt(star).matrix();
    return (lhs - rhs).norm() / std::max(1e-300, root.matrix().norm());
}

} // namespace katolab
