#include "katolab/semigroup.hpp"

#include "katolab/fit.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace katolab {

GridFunction heat_apply(const Operator& op, double t, const GridFunction& f,
                        ExpMethod method) {
    if (t < 0.0) throw std::invalid_argument("heat_apply: t must be nonnegative");
    if (method == ExpMethod::spectral &&
        op.backend() == SpectralBackend::diagonal) {
        return op.spectral_apply(
            [t](std::complex<double> z) { return std::exp(-t * z); }, f);
    }
    Eigen::MatrixXcd e = (-t * op.matrix()).exp();
    return GridFunction(f.grid, e * f.values);
}

HeatKernel heat_kernel(const Operator& op, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("heat_kernel: t must be positive");
    HeatKernel k;
    k.t = t;
    k.k = op.heat_matrix(t);
    k.k /= op.grid().cell_measure();
    return k;
}

Eigen::MatrixXcd vt_matrix(const Operator& op, double t) {
    if (op.backend() == SpectralBackend::diagonal) {
        return op.spectral_matrix(
            [t](std::complex<double> z) { return -2.0 * t * z * std::exp(-t * t * z); });
    }
    return -2.0 * t * (op.matrix() * op.heat_matrix(t * t));
}

GridFunction vt_apply(const Operator& op, double t, const GridFunction& f) {
    if (op.backend() == SpectralBackend::diagonal) {
        return op.spectral_apply(
            [t](std::complex<double> z) { return -2.0 * t * z * std::exp(-t * t * z); }, f);
    }
    Eigen::VectorXcd hf = op.heat_matrix(t * t) * f.values;
    return GridFunction(f.grid, -2.0 * t * (op.matrix() * hf));
}

VtKernel vt_kernel(const Operator& op, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("vt_kernel: t must be positive");
    VtKernel k;
    k.t = t;
    k.k = vt_matrix(op, t);
    k.k /= op.grid().cell_measure();
    return k;
}

double conservation_residual(const HeatKernel& k, const Grid& grid) {
    const Eigen::VectorXcd rows = k.k.rowwise().sum() * grid.cell_measure();
    return (rows.array() - 1.0).abs().maxCoeff();
}

double zero_moment_residual(const VtKernel& k, const Grid& grid) {
    const Eigen::VectorXcd rows = k.k.rowwise().sum() * grid.cell_measure();
    return rows.cwiseAbs().maxCoeff();
}

namespace {

// displacement cut for envelope sampling: interior quarter of the torus
constexpr double kInteriorFraction = 0.25;
// samples this far (relatively) below the per-t kernel peak are treated as
// round-off noise and excluded from envelope fits
constexpr double kNoiseFloor = 1e-9;

struct EnvelopeSamples {
    std::vector<double> u; // d^2 / t  (or d^2 / s^2 for the V kernel)
    std::vector<double> v; // log(|K| t^{n/2})  (or log(|V| s^{n+1}))
};

void collect_kernel_samples(const Grid& g, const Eigen::MatrixXcd& k, double tpow_scale,
                            double u_denom, double d_cap, EnvelopeSamples& out) {
    // interior cut against wraparound; diffusive cut d <= t/h against the
    // lattice large-deviation tail, which decays slower than any Gaussian
    const double dmax = std::min(kInteriorFraction * g.side(), d_cap);
    double peak = 0.0;
    for (std::size_t i = 0; i < g.n_sites(); ++i)
        peak = std::max(peak, std::abs(k(i, i)));
    const double floor_v = kNoiseFloor * peak;
    for (std::size_t i = 0; i < g.n_sites(); ++i) {
        for (std::size_t j = 0; j < g.n_sites(); ++j) {
            const double d = g.torus_distance(i, j);
            if (d > dmax) continue;
            const double mag = std::abs(k(i, j));
            if (mag <= floor_v) continue;
            out.u.push_back(d * d / u_denom);
            out.v.push_back(std::log(mag * tpow_scale));
        }
    }
}

} // namespace

GaussianDecayFit gaussian_fit(const Operator& op, const std::vector<double>& t_list) {
    const Grid& g = op.grid();
    const double h = g.spacing();
    const double lo = 4 * h * h, hi = std::pow(g.side() / 8, 2);
    if (t_list.empty()) throw std::invalid_argument("gaussian_fit: empty trust window");
    for (double t : t_list)
        if (t < lo * (1 - 1e-12) || t > hi * (1 + 1e-12))
            throw std::invalid_argument("gaussian_fit: t outside trust window [4h^2,(S/8)^2]");

    GaussianDecayFit fit;
    fit.t_lo = *std::min_element(t_list.begin(), t_list.end());
    fit.t_hi = *std::max_element(t_list.begin(), t_list.end());
    const double n_half = g.dim() / 2.0;

    EnvelopeSamples pooled;
    std::vector<Eigen::MatrixXcd> kernels;
    kernels.reserve(t_list.size());
    for (double t : t_list) {
        HeatKernel k = heat_kernel(op, t);
        kernels.push_back(k.k);
        EnvelopeSamples per;
        collect_kernel_samples(g, k.k, std::pow(t, n_half), t, t / h, per);
        MajorantLine line = envelope_line_fit(per.u, per.v);
        fit.per_t.push_back({t, std::exp(line.intercept), -line.slope, line.max_slack});
        pooled.u.insert(pooled.u.end(), per.u.begin(), per.u.end());
        pooled.v.insert(pooled.v.end(), per.v.begin(), per.v.end());
    }
    MajorantLine wline = envelope_line_fit(pooled.u, pooled.v);
    fit.c2 = -wline.slope;
    fit.c1 = std::exp(wline.intercept);
    fit.max_slack = wline.max_slack;

    // Hoelder continuity in x with nearest-neighbor shifts: the constraint
    // 2|shift| <= sqrt(t) + d holds throughout the trust window.
    {
        std::vector<double> xs, ys;
        for (std::size_t ti = 0; ti < t_list.size(); ++ti) {
            const double t = t_list[ti];
            const Eigen::MatrixXcd& k = kernels[ti];
            // core region: the difference quotient is dominated by the
            // Hoelder ratio there, not by the Gaussian tail
            const double dmax = std::min(kInteriorFraction * g.side(), 3 * std::sqrt(t));
            double peak = 0.0;
            for (std::size_t i = 0; i < g.n_sites(); ++i)
                peak = std::max(peak, std::abs(k(i, i)));
            for (std::size_t i = 0; i < g.n_sites(); ++i) {
                for (std::size_t j = 0; j < g.n_sites(); ++j) {
                    const double d = g.torus_distance(i, j);
                    if (d > dmax) continue;
                    for (int ax = 0; ax < g.dim(); ++ax) {
                        auto c = g.site_coords(i);
                        c[ax] = (c[ax] + 1) % g.points_per_side();
                        const double diff =
                            std::abs(k(g.site_index(c[0], c[1]), j) - k(i, j));
                        if (diff <= kNoiseFloor * peak) continue;
                        const double envelope =
                            std::pow(t, -n_half) * std::exp(-fit.c2 * d * d / t);
                        const double rho = h / (std::sqrt(t) + d);
                        xs.push_back(std::log(rho));
                        ys.push_back(std::log(diff / envelope));
                    }
                }
            }
        }
        if (!xs.empty()) {
            MajorantLine hl = envelope_line_fit_rising(xs, ys, 1e-3, 1.0);
            fit.mu = hl.slope;
            fit.mu_prefactor = std::exp(hl.intercept);
        }
    }

    // V-kernel envelope and Hoelder exponent at s = sqrt(t) (length units)
    {
        EnvelopeSamples vs;
        std::vector<double> xs, ys;
        for (double t : t_list) {
            const double s = std::sqrt(t);
            VtKernel vk = vt_kernel(op, s);
            collect_kernel_samples(g, vk.k, std::pow(s, g.dim() + 1), s * s, s * s / h, vs);
            const double dmax = std::min(kInteriorFraction * g.side(), 3 * s);
            double peak = 0.0;
            for (std::size_t i = 0; i < g.n_sites(); ++i)
                peak = std::max(peak, std::abs(vk.k(i, i)));
            for (std::size_t i = 0; i < g.n_sites(); ++i) {
                for (std::size_t j = 0; j < g.n_sites(); ++j) {
                    const double d = g.torus_distance(i, j);
                    if (d > dmax) continue;
                    for (int ax = 0; ax < g.dim(); ++ax) {
                        auto c = g.site_coords(i);
                        c[ax] = (c[ax] + 1) % g.points_per_side();
                        const double diff =
                            std::abs(vk.k(g.site_index(c[0], c[1]), j) - vk.k(i, j));
                        if (diff <= kNoiseFloor * peak) continue;
                        xs.push_back(std::log(h / (s + d)));
                        ys.push_back(std::log(diff * std::pow(s, g.dim() + 1) *
                                              std::exp(fit.c2 * d * d / (s * s))));
                    }
                }
            }
        }
        MajorantLine vline = envelope_line_fit(vs.u, vs.v);
        fit.v_c2 = -vline.slope;
        fit.v_c1 = std::exp(vline.intercept);
        if (!xs.empty()) {
            MajorantLine al = envelope_line_fit_rising(xs, ys, 1e-3, 1.0);
            fit.alpha = al.slope;
            fit.alpha_prefactor = std::exp(al.intercept);
        }
    }
    return fit;
}

VectorField gamma_t(const Operator& op, double t) {
    const Grid& g = op.grid();
    if (!(t > 0.0 && t <= g.side() / 8))
        throw std::invalid_argument("gamma_t: t outside the displacement trust window (0, S/8]");
    VtKernel vk = vt_kernel(op, t);
    const Eigen::VectorXd axis = odd_axis_displacement(g);
    const int p = g.points_per_side();
    Eigen::MatrixXcd out(g.n_sites(), g.dim());
    for (std::size_t i = 0; i < g.n_sites(); ++i) {
        // gamma(x) = -sum_y V(x,y) disp(x,y) h^dim = +sum_y V(x,y) disp(y,x) h^dim
        const auto ci = g.site_coords(i);
        std::complex<double> acc[2] = {0.0, 0.0};
        for (std::size_t y = 0; y < g.n_sites(); ++y) {
            const auto cy = g.site_coords(y);
            const std::complex<double> v = vk.k(i, y);
            for (int d = 0; d < g.dim(); ++d)
                acc[d] += v * axis[((cy[d] - ci[d]) % p + p) % p];
        }
        for (int d = 0; d < g.dim(); ++d) out(i, d) = acc[d] * g.cell_measure();
    }
    return VectorField(op.grid_ptr(), std::move(out));
}

std::vector<VectorField> gamma_table(const Operator& op, const std::vector<double>& t_nodes) {
    std::vector<VectorField> out;
    out.reserve(t_nodes.size());
    for (double t : t_nodes) out.push_back(gamma_t(op, t));
    return out;
}

} // namespace katolab
