#include "katolab/carleson_tb.hpp"

#include "katolab/rng.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>

namespace katolab {

namespace {

DyadicCube cube_at(const Grid& g, int k, std::array<int, 2> index) {
    DyadicCube q;
    q.level = k;
    q.index = index;
    q.side_len = g.side() / (1 << k);
    const int bsize = g.points_per_side() >> k;
    IndexBlock blk;
    blk.start = {index[0] * bsize, index[1] * bsize};
    blk.len = {bsize, g.dim() == 2 ? bsize : 1};
    q.sites = block_sites(g, blk);
    return q;
}

// per-level dyadic block sums of a complex site array
std::vector<Eigen::MatrixXcd> block_sums(const Grid& g, const Eigen::VectorXcd& site_vals) {
    std::vector<Eigen::MatrixXcd> sums(g.levels() + 1);
    for (int k = 0; k <= g.levels(); ++k) {
        const int blocks = 1 << k;
        const int bsize = g.points_per_side() >> k;
        sums[k] = Eigen::MatrixXcd::Zero(blocks, g.dim() == 2 ? blocks : 1);
        for (std::size_t i = 0; i < g.n_sites(); ++i) {
            auto c = g.site_coords(i);
            sums[k](c[0] / bsize, g.dim() == 2 ? c[1] / bsize : 0) += site_vals[i];
        }
    }
    return sums;
}

double block_count(const Grid& g, int k) {
    return std::pow(static_cast<double>(g.points_per_side() >> k), g.dim());
}

// maximal dyadic subcubes of root whose sites are entirely inside the mask
std::vector<DyadicCube> maximal_cubes_of_mask(const Grid& g, const DyadicCube& root,
                                              const std::vector<char>& mask) {
    Eigen::VectorXcd vals(g.n_sites());
    for (std::size_t i = 0; i < g.n_sites(); ++i) vals[i] = mask[i] ? 1.0 : 0.0;
    auto counts = block_sums(g, vals);
    std::vector<DyadicCube> out;
    std::function<void(int, std::array<int, 2>)> scan = [&](int k, std::array<int, 2> idx) {
        const double cnt = counts[k](idx[0], g.dim() == 2 ? idx[1] : 0).real();
        if (cnt == 0.0) return;
        if (cnt >= block_count(g, k) - 0.5) {
            out.push_back(cube_at(g, k, idx));
            return;
        }
        if (k == g.levels()) return;
        for (int dy = 0; dy < (g.dim() == 2 ? 2 : 1); ++dy)
            for (int dx = 0; dx < 2; ++dx)
                scan(k + 1, {2 * idx[0] + dx, 2 * idx[1] + dy});
    };
    scan(root.level, root.index);
    return out;
}

} // namespace

CarlesonEstimate carleson_norm(const std::vector<VectorField>& gamma_by_t, const TimeGrid& tg,
                               const Weight& w) {
    if (gamma_by_t.empty() ||
        static_cast<Eigen::Index>(gamma_by_t.size()) != tg.nodes.size())
        throw std::invalid_argument("carleson_norm: gamma table does not match time grid");
    const Grid& g = *w.grid;

    // site integrand per node: |gamma_t(x)|^2 w(x)
    std::vector<Eigen::VectorXcd> g2w(gamma_by_t.size());
    for (std::size_t n = 0; n < gamma_by_t.size(); ++n) {
        Eigen::VectorXcd v(g.n_sites());
        for (std::size_t i = 0; i < g.n_sites(); ++i)
            v[i] = gamma_by_t[n].values.row(i).squaredNorm() * w.values[i];
        g2w[n] = std::move(v);
    }

    CarlesonEstimate est;
    est.t_lo = tg.t_lo;
    est.t_hi = tg.t_hi;
    const int p = g.points_per_side();
    for (int k = 3; k <= g.levels(); ++k) {
        const double side = g.side() / (1 << k);
        std::vector<std::size_t> nodes;
        for (Eigen::Index n = 0; n < tg.nodes.size(); ++n)
            if (tg.nodes[n] <= side) nodes.push_back(n);
        if (nodes.empty()) {
            if (side > tg.t_lo)
                throw std::invalid_argument("carleson_norm: no t nodes below cube side " +
                                            std::to_string(side));
            continue; // cubes below the time resolution carry empty boxes
        }
        const int blocks = 1 << k;
        const int bsize = p >> k;
        const int by_max = g.dim() == 2 ? blocks : 1;
        // dyadic tiling plus the half-shifted tilings (shifted feeds only the sup)
        for (int mask = 0; mask < (1 << g.dim()); ++mask) {
            if (mask != 0 && bsize < 2) continue;
            const int offx = (mask & 1) ? bsize / 2 : 0;
            const int offy = (mask & 2) ? bsize / 2 : 0;
            Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(blocks, by_max);
            Eigen::MatrixXd wsum = Eigen::MatrixXd::Zero(blocks, by_max);
            for (std::size_t i = 0; i < g.n_sites(); ++i) {
                auto c = g.site_coords(i);
                const int bx = (((c[0] - offx) % p + p) % p) / bsize;
                const int by = g.dim() == 2 ? (((c[1] - offy) % p + p) % p) / bsize : 0;
                wsum(bx, by) += w.values[i];
                double s = 0.0;
                for (auto n : nodes) s += g2w[n][i].real();
                acc(bx, by) += s;
            }
            for (int by = 0; by < by_max; ++by) {
                for (int bx = 0; bx < blocks; ++bx) {
                    const double val = acc(bx, by) * tg.dlog / wsum(bx, by);
                    if (mask == 0) {
                        est.table.push_back({k, {bx, by}, val});
                        if (val > est.sup) {
                            est.sup = val;
                            est.argmax_level = k;
                            est.argmax_index = {bx, by};
                        }
                    }
                    est.shifted_sup = std::max(est.shifted_sup, val);
                }
            }
        }
    }
    return est;
}

double journe_check(const std::vector<VectorField>& gamma_by_t, const TimeGrid& tg,
                    const GridFunction& f, const Weight& w, const Mollifier& moll) {
    const Grid& g = *w.grid;
    double numerator = 0.0;
    for (Eigen::Index n = 0; n < tg.nodes.size(); ++n) {
        GridFunction pf = moll.apply(f, tg.nodes[n]);
        double s = 0.0;
        for (std::size_t i = 0; i < g.n_sites(); ++i)
            s += std::norm(pf.values[i]) * gamma_by_t[n].values.row(i).squaredNorm() *
                 w.values[i];
        numerator += s * tg.dlog;
    }
    numerator *= g.cell_measure();
    const double cnorm = carleson_norm(gamma_by_t, tg, w).sup;
    const double fsq = std::pow(weighted_norm(f, w, NormKind::L2w), 2);
    if (cnorm <= 0.0) {
        if (numerator > 1e-20 * std::max(1.0, fsq))
            throw std::runtime_error("journe_check: zero Carleson norm with nonzero numerator");
        return 0.0;
    }
    return numerator / (cnorm * fsq);
}

bool in_cone(const Eigen::VectorXcd& z, const Eigen::VectorXcd& nu, double eps) {
    const std::complex<double> c = (z.array() * nu.array().conjugate()).sum();
    const double rem_sq = std::max(0.0, z.squaredNorm() - std::norm(c));
    return std::sqrt(rem_sq) < eps * std::abs(c);
}

ConeNet cone_net(int dim_complex, double eps, std::uint64_t seed) {
    if (!(eps > 0.0 && eps <= 0.125))
        throw std::invalid_argument("cone_net: eps must lie in (0, 1/8]");
    if (dim_complex != 1 && dim_complex != 2)
        throw std::invalid_argument("cone_net: only 1 or 2 complex dimensions supported");

    ConeNet net;
    net.eps = eps;
    if (dim_complex == 1) {
        Eigen::VectorXcd nu(1);
        nu[0] = 1.0;
        net.vectors.push_back(nu);
        return net;
    }

    // Cones are phase-invariant, so candidates live on the Bloch sphere:
    // nu(theta, phi) = (cos(theta/2), sin(theta/2) e^{i phi}); the
    // projective distance is half the Bloch central angle. A lat-long grid
    // with spacing below the greedy margin guarantees coverage.
    const double margin = std::atan(eps) - std::atan(eps / 2);
    const double spacing = 0.4 * margin;
    const int n_theta = static_cast<int>(std::ceil(std::numbers::pi / spacing)) + 1;
    std::vector<Eigen::VectorXcd> candidates;
    for (int it = 0; it <= n_theta; ++it) {
        const double theta = std::numbers::pi * it / n_theta;
        const int n_phi =
            std::max(1, static_cast<int>(std::ceil(2 * std::numbers::pi * std::sin(theta) / spacing)));
        for (int ip = 0; ip < n_phi; ++ip) {
            const double phi = 2 * std::numbers::pi * ip / n_phi;
            Eigen::VectorXcd nu(2);
            nu[0] = std::cos(theta / 2);
            nu[1] = std::sin(theta / 2) * std::exp(std::complex<double>(0, phi));
            candidates.push_back(std::move(nu));
        }
    }
    for (const auto& cand : candidates) {
        bool covered = false;
        for (const auto& nu : net.vectors) {
            if (in_cone(cand, nu, eps / 2)) {
                covered = true;
                break;
            }
        }
        if (!covered) net.vectors.push_back(cand);
    }

    // independent verification sample
    RngStream rng(seed, "cone_net/verify");
    for (std::uint64_t v = 0; v < 4000; ++v) {
        Eigen::VectorXcd z(2);
        z[0] = rng.cgauss(2 * v);
        z[1] = rng.cgauss(2 * v + 1);
        if (z.norm() < 1e-6) continue;
        bool covered = false;
        for (const auto& nu : net.vectors) {
            if (in_cone(z, nu, eps)) {
                covered = true;
                break;
            }
        }
        if (!covered) throw std::runtime_error("cone_net: coverage verification failed");
    }
    return net;
}

TbState make_fq(const Operator& op, const DyadicCube& q, double eps) {
    const Grid& g = op.grid();
    if (!(eps > 0.0 && eps <= 0.125))
        throw std::invalid_argument("make_fq: eps must lie in (0, 1/8]");
    if (q.side_len > g.side() / 16 * (1 + 1e-12))
        throw std::invalid_argument("make_fq: cube side must be at most S/16");

    TbState st;
    st.grid = op.grid_ptr();
    st.cube = q;
    st.eps = eps;

    const double tau = eps * eps * q.side_len * q.side_len;
    // E(x,y) = [e^{-tau L}]_{xy}; G(x) = sum_y E(x,y) disp(y,x)
    const Eigen::MatrixXcd e =
        op.spectral_matrix([tau](std::complex<double> z) { return std::exp(-tau * z); });
    const Eigen::VectorXd axis = odd_axis_displacement(g);
    const int p = g.points_per_side();
    st.displacement.resize(g.n_sites(), g.dim());
    for (std::size_t i = 0; i < g.n_sites(); ++i) {
        const auto ci = g.site_coords(i);
        std::complex<double> acc[2] = {0.0, 0.0};
        for (std::size_t y = 0; y < g.n_sites(); ++y) {
            const auto cy = g.site_coords(y);
            const std::complex<double> v = e(i, y);
            for (int d = 0; d < g.dim(); ++d)
                acc[d] += v * axis[((cy[d] - ci[d]) % p + p) % p];
        }
        for (int d = 0; d < g.dim(); ++d) st.displacement(i, d) = acc[d];
    }

    // grad F = I + grad G (forward differences of the periodic part)
    const double h = g.spacing();
    st.grad_f = Eigen::MatrixXcd::Zero(g.n_sites(), g.dim() * g.dim());
    for (std::size_t i = 0; i < g.n_sites(); ++i) {
        auto c = g.site_coords(i);
        for (int k = 0; k < g.dim(); ++k) {
            auto cp = c;
            cp[k] = (cp[k] + 1) % p;
            const std::size_t ip = g.site_index(cp[0], cp[1]);
            for (int j = 0; j < g.dim(); ++j) {
                st.grad_f(i, k * g.dim() + j) =
                    (k == j ? 1.0 : 0.0) +
                    (st.displacement(ip, j) - st.displacement(i, j)) / h;
            }
        }
    }
    return st;
}

TbState synthetic_tb_state(std::shared_ptr<const Grid> grid, const DyadicCube& q, double eps,
                           const Eigen::MatrixXcd& grad_f) {
    TbState st;
    st.grid = grid;
    st.cube = q;
    st.eps = eps;
    st.displacement = Eigen::MatrixXcd::Zero(grid->n_sites(), grid->dim());
    st.grad_f = grad_f;
    return st;
}

TbHypotheses tb_hypotheses(const Operator& op, const TbState& st) {
    const Grid& g = op.grid();
    const Weight& w = op.weight();
    const double wq = weighted_measure(w, st.cube);
    const double len = st.cube.side_len;
    TbHypotheses out;

    auto five = block_sites(g, enlarged_block(g, st.cube, 5));
    double s = 0.0;
    for (auto i : five) s += st.grad_f.row(i).squaredNorm() * w.values[i];
    out.c_i = s * g.cell_measure() / wq;

    // L F_Q = L phi + L G, both periodic
    const Eigen::MatrixXcd lphi = coordinate_action(op);
    Eigen::MatrixXcd lf = lphi;
    for (int d = 0; d < g.dim(); ++d) lf.col(d) += op.matrix() * st.displacement.col(d);
    auto ten = block_sites(g, enlarged_block(g, st.cube, 10));
    s = 0.0;
    for (auto i : ten) s += lf.row(i).squaredNorm() * w.values[i];
    out.c_ii = len * len * s * g.cell_measure() / wq;

    double sup = 0.0;
    for (std::size_t i = 0; i < g.n_sites(); ++i)
        sup = std::max(sup, st.displacement.row(i).norm());
    out.g_bound = sup / (st.eps * len);
    return out;
}

double lemma21_check(const TbState& st) {
    const Grid& g = *st.grid;
    Eigen::VectorXcd avg = Eigen::VectorXcd::Zero(g.dim() * g.dim());
    for (auto i : st.cube.sites) avg += st.grad_f.row(i).transpose();
    avg /= static_cast<double>(st.cube.sites.size());
    for (int k = 0; k < g.dim(); ++k) avg[k * g.dim() + k] -= 1.0;
    return avg.norm() / st.eps;
}

void stopping_time(TbState& st, const Eigen::VectorXcd& nu) {
    const Grid& g = *st.grid;
    if (nu.size() != g.dim()) throw std::invalid_argument("stopping_time: direction dim mismatch");

    NuState ns;
    ns.nu = nu;
    ns.in_bad.assign(g.n_sites(), 0);
    ns.processed = true;

    // grad F_{Q,nu} components, nu.grad, and |grad|
    Eigen::VectorXcd q1(g.n_sites());
    Eigen::VectorXcd q2(g.n_sites());
    for (std::size_t i = 0; i < g.n_sites(); ++i) {
        std::complex<double> dir = 0.0;
        double norm_sq = 0.0;
        for (int k = 0; k < g.dim(); ++k) {
            std::complex<double> comp = 0.0;
            for (int j = 0; j < g.dim(); ++j)
                comp += st.grad_f(i, k * g.dim() + j) * std::conj(nu[j]);
            dir += nu[k] * comp;
            norm_sq += std::norm(comp);
        }
        q1[i] = dir;
        q2[i] = std::sqrt(norm_sq);
    }
    auto sums1 = block_sums(g, q1);
    auto sums2 = block_sums(g, q2);

    const double thresh2 = 1.0 / (8.0 * st.eps);
    std::function<void(int, std::array<int, 2>, bool, bool)> scan =
        [&](int k, std::array<int, 2> idx, bool anc1, bool anc2) {
            const int iy = g.dim() == 2 ? idx[1] : 0;
            const double cnt = block_count(g, k);
            const bool viol1 = !anc1 && sums1[k](idx[0], iy).real() / cnt <= 0.75;
            const bool viol2 = !anc2 && sums2[k](idx[0], iy).real() / cnt > thresh2;
            if (viol1) {
                ns.s1.push_back(cube_at(g, k, idx));
                for (auto s : ns.s1.back().sites) ns.in_bad[s] = 1;
            }
            if (viol2) {
                ns.s2.push_back(cube_at(g, k, idx));
                for (auto s : ns.s2.back().sites) ns.in_bad[s] = 1;
            }
            if ((anc1 || viol1) && (anc2 || viol2)) return;
            if (k == g.levels()) return;
            for (int dy = 0; dy < (g.dim() == 2 ? 2 : 1); ++dy)
                for (int dx = 0; dx < 2; ++dx)
                    scan(k + 1, {2 * idx[0] + dx, 2 * idx[1] + dy}, anc1 || viol1,
                         anc2 || viol2);
        };
    scan(st.cube.level, st.cube.index, false, false);
    st.nus.push_back(std::move(ns));
}

void finalize_good_sets(TbState& st) {
    const Grid& g = *st.grid;
    if (st.nus.empty()) throw std::runtime_error("finalize_good_sets: no direction processed");
    st.in_eq.assign(g.n_sites(), 0);
    std::vector<char> in_q(g.n_sites(), 0);
    for (auto i : st.cube.sites) in_q[i] = 1;
    for (auto i : st.cube.sites) {
        for (const auto& ns : st.nus) {
            if (!ns.in_bad[i]) {
                st.in_eq[i] = 1;
                break;
            }
        }
    }
    std::vector<char> bad(g.n_sites(), 0);
    for (auto i : st.cube.sites)
        if (!st.in_eq[i]) bad[i] = 1;
    st.bad_maximal = maximal_cubes_of_mask(g, st.cube, bad);
}

double density_eta(std::span<const TbState> states, const Weight& w) {
    double eta = std::numeric_limits<double>::infinity();
    for (const auto& st : states) {
        if (st.in_eq.empty()) throw std::runtime_error("density_eta: good sets not finalized");
        double we = 0.0;
        for (auto i : st.cube.sites)
            if (st.in_eq[i]) we += w.values[i];
        const double wq = weighted_measure(w, st.cube);
        eta = std::min(eta, we * w.grid->cell_measure() / wq);
    }
    return eta;
}

SawtoothResult sawtooth_carleson(const TbState& st, const ConeNet& net,
                                 const std::vector<VectorField>& gamma_by_t,
                                 const TimeGrid& tg, const Weight& w) {
    const Grid& g = *st.grid;
    if (st.nus.size() != net.vectors.size())
        throw std::invalid_argument("sawtooth_carleson: stopping data does not match cone net");
    if (st.in_eq.empty())
        throw std::runtime_error("sawtooth_carleson: good sets not finalized");

    const double len = st.cube.side_len;
    const double wq = weighted_measure(w, st.cube);
    const std::size_t n_nu = st.nus.size();

    // per-nu gradient component block sums and removal depths
    std::vector<std::array<std::vector<Eigen::MatrixXcd>, 2>> comp_sums(n_nu);
    std::vector<Eigen::VectorXd> depth_nu(n_nu);
    for (std::size_t j = 0; j < n_nu; ++j) {
        const auto& nu = st.nus[j].nu;
        for (int k = 0; k < g.dim(); ++k) {
            Eigen::VectorXcd comp(g.n_sites());
            for (std::size_t i = 0; i < g.n_sites(); ++i) {
                std::complex<double> c = 0.0;
                for (int jj = 0; jj < g.dim(); ++jj)
                    c += st.grad_f(i, k * g.dim() + jj) * std::conj(nu[jj]);
                comp[i] = c;
            }
            comp_sums[j][k] = block_sums(g, comp);
        }
        depth_nu[j] = Eigen::VectorXd::Zero(g.n_sites());
        for (const auto& c : maximal_cubes_of_mask(g, st.cube, st.nus[j].in_bad))
            for (auto s : c.sites) depth_nu[j][s] = c.side_len;
    }
    Eigen::VectorXd depth_u = Eigen::VectorXd::Zero(g.n_sites());
    for (const auto& c : st.bad_maximal)
        for (auto s : c.sites) depth_u[s] = c.side_len;

    SawtoothResult res;
    res.forced_margin = std::numeric_limits<double>::infinity();
    const double thresh2 = 1.0 / (8.0 * st.eps);

    // A_t grad F_{Q,nu}(x): average of the gradient over Q_t(x)
    auto avg_grad = [&](std::size_t j, int kt, std::size_t site, Eigen::VectorXcd& out) {
        const int bsize = g.points_per_side() >> kt;
        auto c = g.site_coords(site);
        const int bx = c[0] / bsize;
        const int by = g.dim() == 2 ? c[1] / bsize : 0;
        const double cnt = block_count(g, kt);
        for (int k = 0; k < g.dim(); ++k) out[k] = comp_sums[j][k][kt](bx, by) / cnt;
    };

    std::size_t covered = 0, sawtooth_nodes = 0;
    double lhs = 0.0;
    std::vector<double> rhs_nu(n_nu, 0.0);
    Eigen::VectorXcd avg(g.dim()), z(g.dim());

    for (Eigen::Index n = 0; n < tg.nodes.size(); ++n) {
        const double t = tg.nodes[n];
        if (t > len) continue;
        const int kt = containing_level(g, t);
        const VectorField& gam = gamma_by_t[n];
        for (auto x : st.cube.sites) {
            // forced bounds on each per-nu sawtooth
            for (std::size_t j = 0; j < n_nu; ++j) {
                if (t <= depth_nu[j][x]) continue;
                avg_grad(j, kt, x, avg);
                std::complex<double> dir = 0.0;
                for (int k = 0; k < g.dim(); ++k) dir += st.nus[j].nu[k] * avg[k];
                const double m1 = dir.real() - 0.75;
                const double m2 = thresh2 - avg.norm();
                if (m1 <= 0.0 || m2 < 0.0)
                    throw std::logic_error(
                        "sawtooth_carleson: forced stopping bound violated on the sawtooth");
                res.forced_margin = std::min(res.forced_margin, std::min(m1, m2));
            }
            // full-box right-hand side
            for (int k = 0; k < g.dim(); ++k) z[k] = gam.values(x, k);
            for (std::size_t j = 0; j < n_nu; ++j) {
                avg_grad(j, kt, x, avg);
                std::complex<double> dot = 0.0;
                for (int k = 0; k < g.dim(); ++k) dot += z[k] * avg[k];
                rhs_nu[j] += std::norm(dot) * w.values[x] * tg.dlog;
            }
            // union sawtooth: left-hand side and cone domination
            if (t > depth_u[x]) {
                ++sawtooth_nodes;
                const double zsq = z.squaredNorm();
                lhs += zsq * w.values[x] * tg.dlog;
                if (zsq == 0.0) {
                    ++covered;
                } else {
                    for (std::size_t j = 0; j < n_nu; ++j) {
                        if (t <= depth_nu[j][x]) continue;
                        if (!in_cone(z, st.nus[j].nu, st.eps)) continue;
                        avg_grad(j, kt, x, avg);
                        std::complex<double> dot = 0.0;
                        for (int k = 0; k < g.dim(); ++k) dot += z[k] * avg[k];
                        if (std::norm(dot) * 4.0 >= zsq) {
                            ++covered;
                            break;
                        }
                    }
                }
            }
        }
    }

    res.lhs = lhs * g.cell_measure() / wq;
    double rhs = 0.0;
    for (double r : rhs_nu) rhs += r;
    res.rhs = 4.0 * rhs * g.cell_measure() / wq;
    res.coverage = sawtooth_nodes == 0
                       ? 1.0
                       : static_cast<double>(covered) / static_cast<double>(sawtooth_nodes);
    double sup = 0.0;
    for (const auto& gam : gamma_by_t)
        for (Eigen::Index i = 0; i < gam.values.rows(); ++i)
            sup = std::max(sup, gam.values.row(i).norm());
    res.sup_gamma_inf = sup;

    double we = 0.0;
    for (auto i : st.cube.sites)
        if (st.in_eq[i]) we += w.values[i];
    res.eta_q = we * g.cell_measure() / wq;
    if (!std::isfinite(res.forced_margin)) res.forced_margin = 0.0;
    return res;
}

} // namespace katolab
