#include "katolab/weights.hpp"

#include "katolab/fit.hpp"
#include "katolab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace katolab {

Weight::Weight(std::shared_ptr<const Grid> g, Eigen::VectorXd v, std::string fam, double p)
    : grid(std::move(g)), values(std::move(v)), family(std::move(fam)), param(p) {
    if (static_cast<std::size_t>(values.size()) != grid->n_sites())
        throw std::invalid_argument("weight: value count does not match site count");
    if (!values.allFinite() || values.minCoeff() <= 0.0)
        throw std::invalid_argument("weight: values must be finite and strictly positive");
}

Weight constant_weight(std::shared_ptr<const Grid> grid, double c) {
    Eigen::VectorXd v = Eigen::VectorXd::Constant(grid->n_sites(), c);
    return Weight(std::move(grid), std::move(v), "constant", c);
}

Weight power_weight(std::shared_ptr<const Grid> grid, double a, std::size_t x0) {
    if (!(a > -grid->dim() && a < grid->dim()))
        throw std::invalid_argument("power_weight: exponent must satisfy -dim < a < dim");
    const double floor_d = grid->spacing() / 2;
    Eigen::VectorXd v(grid->n_sites());
    for (std::size_t i = 0; i < grid->n_sites(); ++i)
        v[i] = std::pow(std::max(grid->torus_distance(i, x0), floor_d), a);
    return Weight(std::move(grid), std::move(v), "power", a);
}

Weight power_weight(std::shared_ptr<const Grid> grid, double a) {
    const int p = grid->points_per_side();
    const std::size_t center = grid->site_index(p / 2, grid->dim() == 2 ? p / 2 : 0);
    return power_weight(std::move(grid), a, center);
}

Weight two_valued_weight(std::shared_ptr<const Grid> grid, double lo, double hi) {
    const int p = grid->points_per_side();
    Eigen::VectorXd v(grid->n_sites());
    for (std::size_t i = 0; i < grid->n_sites(); ++i)
        v[i] = grid->site_coords(i)[0] < p / 2 ? lo : hi;
    return Weight(std::move(grid), std::move(v), "two_valued", hi / lo);
}

Weight smooth_weight(std::shared_ptr<const Grid> grid, double amplitude) {
    Eigen::VectorXd v(grid->n_sites());
    for (std::size_t i = 0; i < grid->n_sites(); ++i) {
        Eigen::VectorXd x = grid->site_position(i);
        double s = std::sin(2 * std::numbers::pi * x[0] / grid->side());
        if (grid->dim() == 2) s += std::sin(2 * std::numbers::pi * x[1] / grid->side());
        v[i] = std::exp(amplitude * s);
    }
    return Weight(std::move(grid), std::move(v), "smooth", amplitude);
}

namespace {

// (avg w)(avg 1/w) over a site list
double a2_product(const Weight& w, std::span<const std::size_t> sites) {
    double sw = 0.0, swi = 0.0;
    for (auto s : sites) {
        sw += w.values[s];
        swi += 1.0 / w.values[s];
    }
    const double n = static_cast<double>(sites.size());
    return (sw / n) * (swi / n);
}

} // namespace

A2Report a2_constant(const Weight& w) {
    const Grid& g = *w.grid;
    A2Report rep;
    rep.per_level_max.assign(g.levels() + 1, 0.0);
    const int nshift = 1 << g.dim();
    for (int k = 0; k <= g.levels(); ++k) {
        double level_max = 0.0;
        auto cubes = dyadic_cubes(g, k);
        for (int shift = 0; shift < nshift; ++shift) {
            // half-shifting a singleton tiling reproduces it
            if (shift != 0 && k == g.levels()) continue;
            for (const auto& q : cubes) {
                double val;
                if (shift == 0) {
                    val = a2_product(w, q.sites);
                } else {
                    auto blk = shifted_cube_block(g, k, q.index, shift);
                    auto sites = block_sites(g, blk);
                    val = a2_product(w, sites);
                }
                level_max = std::max(level_max, val);
                if (val > rep.value) {
                    rep.value = val;
                    rep.argmax_level = k;
                    rep.argmax_shift = shift;
                    rep.argmax_index = q.index;
                }
                if (shift == 0) rep.dyadic_only = std::max(rep.dyadic_only, val);
            }
        }
        rep.per_level_max[k] = level_max;
    }
    return rep;
}

AinftyParams ainfty_fit(const Weight& w, std::uint64_t seed) {
    const Grid& g = *w.grid;
    RngStream rng(seed, "ainfty/subsets");

    // sample pairs (|E|/|Q|, w(E)/w(Q)) on dyadic cubes at all levels
    std::vector<double> leb_ratio, w_ratio;
    std::uint64_t draw = 0;
    for (int k = 0; k < g.levels(); ++k) {
        for (const auto& q : dyadic_cubes(g, k)) {
            const std::size_t n = q.sites.size();
            if (n < 2) continue;
            const double wq = weighted_measure(w, q);

            std::vector<std::size_t> by_weight = q.sites;
            std::sort(by_weight.begin(), by_weight.end(), [&](std::size_t a, std::size_t b) {
                return w.values[a] > w.values[b];
            });

            auto push_subset = [&](std::span<const std::size_t> e) {
                if (e.empty()) return;
                leb_ratio.push_back(static_cast<double>(e.size()) / n);
                w_ratio.push_back(weighted_measure(w, e) / wq);
            };

            // the full cube pins the (1,1) corner
            push_subset(q.sites);
            for (std::size_t cnt : {n / 4, n / 2, (3 * n) / 4, std::size_t{1}}) {
                if (cnt == 0 || cnt > n) continue;
                // extreme-value subsets: heaviest and lightest sites
                push_subset(std::span(by_weight).first(cnt));
                push_subset(std::span(by_weight).last(cnt));
                // random subset of the same size
                std::vector<std::size_t> pool = q.sites;
                for (std::size_t i = 0; i < cnt; ++i) {
                    const std::size_t j =
                        i + static_cast<std::size_t>(rng.u01(draw++) * (pool.size() - i));
                    std::swap(pool[i], pool[std::min(j, pool.size() - 1)]);
                }
                push_subset(std::span(pool).first(cnt));
            }
        }
    }

    // majorant line in log-log space: log(w-ratio) <= log(alpha) + delta log(leb-ratio).
    // The exponent is pinned at the E ~ Q corner: the steepest origin-anchored
    // line below every sample (slope = min y/x), snapped down to the trial
    // grid; the prefactor is then the exact majorant at that slope.
    std::vector<double> lx(leb_ratio.size()), ly(leb_ratio.size());
    for (std::size_t i = 0; i < leb_ratio.size(); ++i) {
        lx[i] = std::log(leb_ratio[i]);
        ly[i] = std::log(w_ratio[i]);
    }
    auto corner_slope = [](std::span<const double> x, std::span<const double> y) {
        double s = 1.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            if (x[i] < -1e-12) s = std::min(s, y[i] / x[i]);
        // snap down to the 0.05 trial grid, keeping the slope admissible
        return std::max(0.05, std::floor(s / 0.05 + 1e-9) * 0.05);
    };

    AinftyParams p;
    p.samples = leb_ratio.size();
    p.delta = corner_slope(lx, ly);
    auto fwd = majorant_with_slope(lx, ly, p.delta);
    p.alpha = std::exp(fwd.intercept);
    p.max_slack_fwd = fwd.max_slack;
    p.eps = corner_slope(ly, lx);
    auto rev = majorant_with_slope(ly, lx, p.eps);
    p.beta = std::exp(rev.intercept);
    p.max_slack_rev = rev.max_slack;
    return p;
}

double weighted_measure(const Weight& w, std::span<const std::size_t> sites) {
    if (sites.empty()) throw std::invalid_argument("weighted_measure: empty site set");
    double s = 0.0;
    for (auto i : sites) s += w.values[i];
    return s * w.grid->cell_measure();
}

double weighted_measure(const Weight& w, const DyadicCube& q) {
    return weighted_measure(w, std::span<const std::size_t>(q.sites));
}

double weighted_norm(const GridFunction& f, const Weight& w, NormKind kind) {
    const Grid& g = *f.grid;
    const double meas = g.cell_measure();
    auto l2sq = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < g.n_sites(); ++i) s += std::norm(f.values[i]) * w.values[i];
        return s * meas;
    };
    auto gradsq = [&] {
        const int p = g.points_per_side();
        const double h = g.spacing();
        double s = 0.0;
        for (std::size_t i = 0; i < g.n_sites(); ++i) {
            auto c = g.site_coords(i);
            for (int d = 0; d < g.dim(); ++d) {
                auto cc = c;
                cc[d] = (cc[d] + 1) % p;
                const auto j = g.site_index(cc[0], cc[1]);
                s += std::norm((f.values[j] - f.values[i]) / h) * w.values[i];
            }
        }
        return s * meas;
    };
    switch (kind) {
        case NormKind::L2w:
            return std::sqrt(l2sq());
        case NormKind::GradL2w:
            return std::sqrt(gradsq());
        case NormKind::H1w:
            return std::sqrt(l2sq() + gradsq());
    }
    throw std::invalid_argument("weighted_norm: unknown kind");
}

std::complex<double> inner_w(const GridFunction& f, const GridFunction& g, const Weight& w) {
    std::complex<double> s = 0.0;
    for (Eigen::Index i = 0; i < f.values.size(); ++i)
        s += f.values[i] * std::conj(g.values[i]) * w.values[i];
    return s * f.grid->cell_measure();
}

GridFunction center_w(const GridFunction& f, const Weight& w) {
    const double wtot = w.values.sum() * w.grid->cell_measure();
    const std::complex<double> mean =
        inner_w(f, GridFunction::constant(f.grid, 1.0), w) / wtot;
    return GridFunction(f.grid, f.values.array() - mean);
}

} // namespace katolab
