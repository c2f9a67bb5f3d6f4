#include "katolab/squarefunc.hpp"

#include "katolab/fit.hpp"
#include "katolab/semigroup.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace katolab {

TimeGrid TimeGrid::window(double lo, double hi, double dlog_max) {
    if (!(lo > 0.0 && hi > lo)) throw std::invalid_argument("time grid: need 0 < t_lo < t_hi");
    TimeGrid tg;
    tg.t_lo = lo;
    tg.t_hi = hi;
    const double span = std::log(hi / lo);
    const int m = std::max(2, static_cast<int>(std::ceil(span / dlog_max)));
    tg.dlog = span / m;
    tg.nodes.resize(m);
    for (int i = 0; i < m; ++i) tg.nodes[i] = lo * std::exp(span * (i + 0.5) / m);
    return tg;
}

TimeGrid TimeGrid::trusted(const Grid& grid, double dlog_max) {
    return window(grid.spacing(), grid.side() / 8, dlog_max);
}

double Mollifier::profile(double r) const {
    if (r >= 1.0) return 0.0;
    const double c = std::cos(0.5 * std::numbers::pi * r);
    return c * c;
}

GridFunction Mollifier::kernel(std::shared_ptr<const Grid> grid, double t) const {
    const Grid& g = *grid;
    if (!(t > 0.0)) throw std::invalid_argument("mollifier: scale must be positive");
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(g.n_sites());
    double total = 0.0;
    for (std::size_t o = 0; o < g.n_sites(); ++o) {
        auto c = g.site_coords(o);
        double d2 = 0.0;
        for (int d = 0; d < g.dim(); ++d) {
            const double dx = g.axis_disp(c[d], 0);
            d2 += dx * dx;
        }
        const double val = profile(std::sqrt(d2) / t);
        v[o] = val;
        total += val;
    }
    if (total <= 0.0) throw std::runtime_error("mollifier: empty discrete support");
    v /= total * g.cell_measure(); // sum p_t h^dim = 1 exactly
    return GridFunction(std::move(grid), std::move(v));
}

GridFunction Mollifier::apply(const GridFunction& f, double t) const {
    return circular_convolve(kernel(f.grid, t), f);
}

namespace {

constexpr double kDogNarrow = 0.5; // exponents of the difference of Gaussians
constexpr double kDogWide = 2.0;

double dog_profile(double u) {
    // normalized so int psihat(u)^2 du/u = 1: raw integral is log(5/4)
    static const double c = 1.0 / std::sqrt(std::log(5.0 / 4.0));
    const double u2 = u * u;
    return c * (std::exp(-kDogNarrow * u2) - std::exp(-kDogWide * u2));
}

double physical_freq(const Grid& g, const std::array<int, 2>& k) {
    double s = 0.0;
    for (int d = 0; d < g.dim(); ++d) s += static_cast<double>(k[d]) * k[d];
    return 2.0 * std::numbers::pi * std::sqrt(s) / g.side();
}

} // namespace

LPFilter LPFilter::continuum() { return LPFilter{}; }

double LPFilter::profile(double u) const { return dog_profile(u); }

LPFilter LPFilter::per_frequency(std::shared_ptr<const Grid> grid, const TimeGrid& tg) {
    LPFilter f;
    f.mode_ = Normalization::per_frequency;
    f.grid_ = grid;
    const Grid& g = *grid;
    f.freq_factor_ = Eigen::VectorXd::Ones(g.n_sites());
    for (std::size_t b = 0; b < g.n_sites(); ++b) {
        const double xi = physical_freq(g, bin_frequency(g, b));
        if (xi == 0.0) continue;
        double sum = 0.0;
        for (Eigen::Index i = 0; i < tg.nodes.size(); ++i) {
            const double m = dog_profile(tg.nodes[i] * xi);
            sum += m * m * tg.dlog;
        }
        if (sum >= 0.5) f.freq_factor_[b] = std::sqrt(sum);
    }
    return f;
}

Eigen::VectorXcd LPFilter::multipliers(const Grid& grid, double s) const {
    Eigen::VectorXcd m(grid.n_sites());
    for (std::size_t b = 0; b < grid.n_sites(); ++b) {
        const double xi = physical_freq(grid, bin_frequency(grid, b));
        double v = dog_profile(s * xi);
        if (mode_ == Normalization::per_frequency) {
            if (grid_ && grid_->n_sites() != grid.n_sites())
                throw std::invalid_argument("lp filter: normalized for a different grid");
            v /= freq_factor_[b];
        }
        m[b] = v;
    }
    return m;
}

GridFunction LPFilter::apply(const GridFunction& f, double s) const {
    return apply_multiplier(f, multipliers(*f.grid, s));
}

LPFilter::CalderonStatus LPFilter::status(const Grid& grid, const TimeGrid& tg) const {
    CalderonStatus st;
    st.raw_sum.resize(grid.n_sites());
    st.resolved.resize(grid.n_sites());
    for (std::size_t b = 0; b < grid.n_sites(); ++b) {
        const double xi = physical_freq(grid, bin_frequency(grid, b));
        double raw = 0.0, normed = 0.0;
        for (Eigen::Index i = 0; i < tg.nodes.size(); ++i) {
            const double m = dog_profile(tg.nodes[i] * xi);
            raw += m * m * tg.dlog;
        }
        if (mode_ == Normalization::per_frequency && xi != 0.0 && raw >= 0.5)
            normed = 1.0; // exact by construction
        else
            normed = raw;
        st.raw_sum[b] = raw;
        st.resolved[b] = raw >= 0.5 ? 1 : 0;
        if (st.resolved[b] && xi != 0.0)
            st.worst_resolved_dev = std::max(st.worst_resolved_dev, std::abs(normed - 1.0));
    }
    return st;
}

GridFunction convolve(const GridFunction& f, const GridFunction& kernel) {
    return circular_convolve(kernel, f);
}

GridFunction riesz(const GridFunction& f, int j) {
    const Grid& g = *f.grid;
    if (j < 1 || j > g.dim()) throw std::invalid_argument("riesz: component out of range");
    Eigen::VectorXcd m(g.n_sites());
    for (std::size_t b = 0; b < g.n_sites(); ++b) {
        auto k = bin_frequency(g, b);
        double mag = 0.0;
        for (int d = 0; d < g.dim(); ++d) mag += static_cast<double>(k[d]) * k[d];
        mag = std::sqrt(mag);
        m[b] = mag == 0.0 ? std::complex<double>(0.0)
                          : std::complex<double>(0.0, -k[j - 1] / mag);
    }
    return apply_multiplier(f, m);
}

GridFunction maximal(const GridFunction& f) {
    const Grid& g = *f.grid;
    const int p = g.points_per_side();
    Eigen::VectorXd best = Eigen::VectorXd::Zero(g.n_sites());
    for (int k = 0; k <= g.levels(); ++k) {
        const int bsize = p >> k;
        const int blocks = 1 << k;
        const int nshift = (k == g.levels()) ? 1 : (1 << g.dim());
        for (int mask = 0; mask < nshift; ++mask) {
            const int offx = (mask & 1) ? bsize / 2 : 0;
            const int offy = (mask & 2) ? bsize / 2 : 0;
            // per-block mean of |f| over the (shifted) level-k tiling
            Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(blocks, g.dim() == 2 ? blocks : 1);
            for (std::size_t i = 0; i < g.n_sites(); ++i) {
                auto c = g.site_coords(i);
                const int bx = (((c[0] - offx) % p + p) % p) / bsize;
                const int by = g.dim() == 2 ? (((c[1] - offy) % p + p) % p) / bsize : 0;
                sums(bx, by) += std::abs(f.values[i]);
            }
            const double cells = std::pow(static_cast<double>(bsize), g.dim());
            for (std::size_t i = 0; i < g.n_sites(); ++i) {
                auto c = g.site_coords(i);
                const int bx = (((c[0] - offx) % p + p) % p) / bsize;
                const int by = g.dim() == 2 ? (((c[1] - offy) % p + p) % p) / bsize : 0;
                best[i] = std::max(best[i], sums(bx, by) / cells);
            }
        }
    }
    return GridFunction(f.grid, best.cast<std::complex<double>>());
}

GridFunction dyadic_avg(const GridFunction& f, double t) {
    const Grid& g = *f.grid;
    const int k = containing_level(g, t);
    const int p = g.points_per_side();
    const int bsize = p >> k;
    const int blocks = 1 << k;
    Eigen::MatrixXcd sums = Eigen::MatrixXcd::Zero(blocks, g.dim() == 2 ? blocks : 1);
    for (std::size_t i = 0; i < g.n_sites(); ++i) {
        auto c = g.site_coords(i);
        sums(c[0] / bsize, g.dim() == 2 ? c[1] / bsize : 0) += f.values[i];
    }
    const double cells = std::pow(static_cast<double>(bsize), g.dim());
    Eigen::VectorXcd out(g.n_sites());
    for (std::size_t i = 0; i < g.n_sites(); ++i) {
        auto c = g.site_coords(i);
        out[i] = sums(c[0] / bsize, g.dim() == 2 ? c[1] / bsize : 0) / cells;
    }
    return GridFunction(f.grid, std::move(out));
}

namespace {

double weighted_sq(const GridFunction& f, const Weight& w) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < f.values.size(); ++i)
        s += std::norm(f.values[i]) * w.values[i];
    return s * f.grid->cell_measure();
}

} // namespace

SfResult vertical_sf(const Operator& op, const GridFunction& g, const TimeGrid& tg) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < tg.nodes.size(); ++i) {
        const double t = tg.nodes[i];
        GridFunction tv = vt_apply(op, t, g);
        tv.values *= t;
        acc += weighted_sq(tv, op.weight()) * tg.dlog;
    }
    const double ref = weighted_sq(g, op.weight());
    return {acc, ref > 0.0 ? acc / ref : 0.0};
}

SfResult gfunction_sf(const GridFunction& f, const LPFilter& filter, const Weight& w,
                      const TimeGrid& tg) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < tg.nodes.size(); ++i) {
        GridFunction qf = filter.apply(f, tg.nodes[i]);
        acc += weighted_sq(qf, w) * tg.dlog;
    }
    const double ref = weighted_sq(f, w);
    return {acc, ref > 0.0 ? acc / ref : 0.0};
}

SfResult pa_sf(const GridFunction& f, const Weight& w, const TimeGrid& tg,
               const Mollifier& moll) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < tg.nodes.size(); ++i) {
        const double t = tg.nodes[i];
        GridFunction pf = moll.apply(f, t);
        GridFunction af = dyadic_avg(f, t);
        GridFunction diff(f.grid, pf.values - af.values);
        acc += weighted_sq(diff, w) * tg.dlog;
    }
    const double ref = weighted_sq(f, w);
    return {acc, ref > 0.0 ? acc / ref : 0.0};
}

SfResult taylor_sf(const Operator& op, const GridFunction& f, const TimeGrid& tg,
                   const Mollifier& moll) {
    const Grid& g = op.grid();
    if (tg.t_hi > g.side() / 8 * (1 + 1e-12))
        throw std::invalid_argument("taylor_sf: time window exceeds S/8");
    VectorField gf = grad(f);
    GridFunction ones = GridFunction::constant(f.grid, 1.0);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < tg.nodes.size(); ++i) {
        const double t = tg.nodes[i];
        // sum_y V_t(x,y) [f(y) - f(x) - (y-x).(p_t*grad f)(x)] dy
        //   = (V_t f)(x) - f(x)(V_t 1)(x) - gamma_t(x).(p_t*grad f)(x)
        GridFunction vf = vt_apply(op, t, f);
        GridFunction v1 = vt_apply(op, t, ones);
        VectorField gam = gamma_t(op, t);
        Eigen::VectorXcd u = vf.values - f.values.cwiseProduct(v1.values);
        for (int d = 0; d < g.dim(); ++d) {
            GridFunction comp(f.grid, gf.values.col(d).eval());
            GridFunction sm = moll.apply(comp, t);
            u -= gam.values.col(d).cwiseProduct(sm.values);
        }
        GridFunction uu(f.grid, std::move(u));
        acc += weighted_sq(uu, op.weight()) * tg.dlog;
    }
    const double ref = std::pow(weighted_norm(f, op.weight(), NormKind::GradL2w), 2);
    return {acc, ref > 0.0 ? acc / ref : 0.0};
}

double op_norm_w(const Eigen::MatrixXcd& m, const Weight& w) {
    const Eigen::VectorXcd ws = w.values.cwiseSqrt().cast<std::complex<double>>();
    Eigen::MatrixXcd sym = ws.asDiagonal() * m * ws.cwiseInverse().asDiagonal();
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(sym);
    return svd.singularValues()[0];
}

OpNormDecayFit opnorm_decay(const Operator& op, const LPFilter& filter,
                            const std::vector<double>& s_list,
                            const std::vector<double>& t_list) {
    const Grid& g = op.grid();
    OpNormDecayFit fit;
    std::vector<double> xs, ys;
    std::vector<Eigen::MatrixXcd> qs_list;
    qs_list.reserve(s_list.size());
    for (double s : s_list) {
        // Q_s columns via FFT of unit vectors
        Eigen::MatrixXcd qs(g.n_sites(), g.n_sites());
        const Eigen::VectorXcd mult = filter.multipliers(g, s);
        Eigen::VectorXcd e = Eigen::VectorXcd::Zero(g.n_sites());
        for (std::size_t j = 0; j < g.n_sites(); ++j) {
            e[j] = 1.0;
            GridFunction col = apply_multiplier(GridFunction(op.grid_ptr(), e), mult);
            qs.col(j) = col.values;
            e[j] = 0.0;
        }
        qs_list.push_back(std::move(qs));
    }
    for (double t : t_list) {
        const Eigen::MatrixXcd rt = t * vt_matrix(op, t);
        for (std::size_t si = 0; si < s_list.size(); ++si) {
            const double s = s_list[si];
            const double nrm = op_norm_w(rt * qs_list[si], op.weight());
            fit.samples.push_back({s, t, nrm});
            if (nrm > 0.0) {
                xs.push_back(std::log(std::min(t / s, s / t)));
                ys.push_back(std::log(nrm));
            }
        }
    }
    if (xs.empty()) throw std::runtime_error("opnorm_decay: all norms vanished");
    MajorantLine line = envelope_line_fit_clamped(xs, ys, 0.0, 1e6, 8);
    fit.alpha = line.slope;
    fit.K = std::exp(line.intercept);
    fit.max_slack = line.max_slack;
    return fit;
}

} // namespace katolab
