#include "katolab/semigroup.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <numbers>

using namespace katolab;
using katolab::testing::plane_wave;
using katolab::testing::random_bandlimited;

namespace {

Operator laplacian(std::shared_ptr<const Grid> g) {
    return assemble(make_field(g, constant_weight(g), FieldKind::identity));
}

} // namespace

TEST_SUITE("semigroup") {

TEST_CASE("heat flow basics: identity at t=0, conservation, eigenmode decay") {
    auto g = make_grid(1, 6, 1.0);
    Operator op = laplacian(g);
    GridFunction f = random_bandlimited(g, 3);

    GridFunction f0 = heat_apply(op, 0.0, f);
    CHECK((f0.values - f.values).cwiseAbs().maxCoeff() < 1e-12);

    GridFunction ones = GridFunction::constant(g, 1.0);
    GridFunction h1 = heat_apply(op, 0.37, ones);
    CHECK((h1.values.array() - 1.0).abs().maxCoeff() < 1e-10);

    const double h = g->spacing();
    const double mu1 = std::pow(2.0 / h * std::sin(std::numbers::pi * h), 2);
    GridFunction wave = plane_wave(g, 1);
    const double t = 3e-4;
    GridFunction ht = heat_apply(op, t, wave);
    for (std::size_t i = 0; i < g->n_sites(); ++i)
        CHECK(std::abs(ht.values[i] - std::exp(-t * mu1) * wave.values[i]) < 1e-10);

    CHECK_THROWS_AS(heat_apply(op, -1.0, f), std::invalid_argument);
}

TEST_CASE("kernels: conservation and zero moment to round-off") {
    auto g = make_grid(1, 5, 1.0);
    Weight w = power_weight(g, 0.5);
    FieldParams p;
    p.amplitude = 0.5;
    Operator op = assemble(make_field(g, w, FieldKind::real_symmetric, p));
    for (double t : {1e-4, 1e-3, 1e-2}) {
        HeatKernel hk = heat_kernel(op, t);
        CHECK(conservation_residual(hk, *g) < 1e-10);
        VtKernel vk = vt_kernel(op, std::sqrt(t));
        CHECK(zero_moment_residual(vk, *g) < 1e-10);
    }
    CHECK_THROWS_AS(heat_kernel(op, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(vt_kernel(op, -0.1), std::invalid_argument);
}

TEST_CASE("semigroup law under the spectral method") {
    auto g = make_grid(1, 6, 1.0);
    Weight w = smooth_weight(g, 0.6);
    FieldParams p;
    p.amplitude = 0.4;
    Operator op = assemble(make_field(g, w, FieldKind::real_symmetric, p));
    GridFunction f = random_bandlimited(g, 5);
    const double s = 2e-4, t = 7e-4;
    GridFunction two_step = heat_apply(op, s, heat_apply(op, t, f));
    GridFunction one_step = heat_apply(op, s + t, f);
    CHECK((two_step.values - one_step.values).norm() < 1e-9 * one_step.values.norm());
}

TEST_CASE("spectral and scaling-squaring exponentials agree") {
    auto g = make_grid(1, 6, 1.0);
    Weight w = power_weight(g, 0.4);
    FieldParams p;
    p.amplitude = 0.5;
    Operator op = assemble(make_field(g, w, FieldKind::real_symmetric, p));
    const double t = 5e-4;
    // operator-norm comparison through the full kernel matrices
    Eigen::MatrixXcd spec =
        op.spectral_matrix([t](std::complex<double> z) { return std::exp(-t * z); });
    Eigen::MatrixXcd e = Eigen::MatrixXcd::Zero(g->n_sites(), g->n_sites());
    Eigen::VectorXcd unit = Eigen::VectorXcd::Zero(g->n_sites());
    for (std::size_t j = 0; j < g->n_sites(); ++j) {
        unit[j] = 1.0;
        e.col(j) =
            heat_apply(op, t, GridFunction(g, unit), ExpMethod::scaling_squaring).values;
        unit[j] = 0.0;
    }
    CHECK((spec - e).norm() < 1e-8 * spec.norm());
}

TEST_CASE("V_t is the semigroup derivative (first-order difference check)") {
    auto g = make_grid(1, 6, 1.0);
    Operator op = laplacian(g);
    GridFunction f = random_bandlimited(g, 7);
    const double t = 0.02;
    GridFunction vt = GridFunction(g, vt_kernel(op, t).k * f.values * g->cell_measure());
    auto difference_error = [&](double delta) {
        GridFunction a = heat_apply(op, (t + delta) * (t + delta), f);
        GridFunction b = heat_apply(op, t * t, f);
        return ((a.values - b.values) / delta - vt.values).norm() / vt.values.norm();
    };
    const double e1 = difference_error(1e-4);
    const double e2 = difference_error(5e-5);
    CHECK(e1 < 0.05);
    CHECK(e2 / e1 == doctest::Approx(0.5).epsilon(0.2)); // first order in delta
}

TEST_CASE("flat-coefficient heat kernel matches the continuum Gaussian inside the window") {
    auto g = make_grid(1, 8, 1.0); // P = 256
    Operator op = laplacian(g);
    const double h = g->spacing();
    const double t = 64 * h * h;
    HeatKernel hk = heat_kernel(op, t);
    for (std::size_t i = 0; i < g->n_sites(); i += 17) {
        for (std::size_t j = 0; j < g->n_sites(); ++j) {
            const double d = g->torus_distance(i, j);
            if (d > 3 * std::sqrt(t)) continue;
            const double cont =
                std::exp(-d * d / (4 * t)) / std::sqrt(4 * std::numbers::pi * t);
            CHECK(std::abs(hk.k(i, j).real() - cont) < 0.02 * cont);
            CHECK(std::abs(hk.k(i, j).imag()) < 1e-12 / t);
        }
    }
}

TEST_CASE("gaussian envelope fit recovers the continuum rate for the flat Laplacian") {
    auto g = make_grid(1, 8, 1.0);
    Operator op = laplacian(g);
    const double h = g->spacing();
    const double lo = 4 * h * h, hi = std::pow(g->side() / 8, 2);
    std::vector<double> ts;
    for (int i = 0; i < 12; ++i) ts.push_back(lo * std::exp(std::log(hi / lo) * (i + 0.5) / 12));
    GaussianDecayFit fit = gaussian_fit(op, ts);
    CHECK(fit.c2 > 0.225);
    CHECK(fit.c2 < 0.275);
    CHECK(fit.c1 > 0.0);
    CHECK(fit.max_slack >= 0.0);
    // smooth kernel: Hoelder exponent 1 admissible
    CHECK(fit.mu > 0.75);
    CHECK(fit.mu <= 1.0);
    CHECK(fit.mu_prefactor > 0.0);
    CHECK(fit.alpha > 0.0);
    CHECK(fit.v_c1 > 0.0);
    CHECK(fit.v_c2 > 0.0);

    CHECK_THROWS_AS(gaussian_fit(op, {}), std::invalid_argument);
    CHECK_THROWS_AS(gaussian_fit(op, {hi * 4}), std::invalid_argument);
    CHECK_THROWS_AS(gaussian_fit(op, {h * h}), std::invalid_argument);
}

TEST_CASE("gaussian envelope exists for a weighted symmetric family") {
    auto g = make_grid(1, 7, 1.0);
    Weight w = power_weight(g, 0.5);
    FieldParams p;
    p.amplitude = 0.5;
    Operator op = assemble(make_field(g, w, FieldKind::real_symmetric, p));
    const double h = g->spacing();
    const double lo = 4 * h * h, hi = std::pow(g->side() / 8, 2);
    std::vector<double> ts;
    for (int i = 0; i < 8; ++i) ts.push_back(lo * std::exp(std::log(hi / lo) * (i + 0.5) / 8));
    GaussianDecayFit fit = gaussian_fit(op, ts);
    CHECK(std::isfinite(fit.c1));
    CHECK(fit.c1 > 0.0);
    CHECK(std::isfinite(fit.c2));
    CHECK(fit.per_t.size() == ts.size());
    for (const auto& row : fit.per_t) CHECK(row.max_slack >= 0.0);
}

TEST_CASE("gamma vanishes for the flat Laplacian and is finite for complex fields") {
    auto g = make_grid(1, 6, 1.0);
    Operator op = laplacian(g);
    for (double t : {0.02, 0.05, 0.12}) {
        VectorField gam = gamma_t(op, t);
        CHECK(gam.values.cwiseAbs().maxCoeff() < 1e-10);
    }
    CHECK_THROWS_AS(gamma_t(op, 0.2), std::invalid_argument); // above S/8

    Weight w = power_weight(g, 0.5);
    FieldParams p;
    p.kappa = 0.3;
    Operator cop = assemble(make_field(g, w, FieldKind::complex_perturbation, p));
    VectorField gam = gamma_t(cop, 0.05);
    const double sup = gam.values.cwiseAbs().maxCoeff();
    CHECK(sup > 1e-6);
    CHECK(std::isfinite(sup));
}

TEST_CASE("gamma sup is windowed-stable (bound independent of t)") {
    auto g = make_grid(1, 7, 1.0);
    Weight w = constant_weight(g);
    FieldParams p;
    p.amplitude = 0.5;
    Operator op = assemble(make_field(g, w, FieldKind::real_symmetric, p));
    std::vector<double> ts;
    const double lo = g->spacing(), hi = g->side() / 8;
    for (int i = 0; i < 16; ++i) ts.push_back(lo * std::exp(std::log(hi / lo) * (i + 0.5) / 16));
    auto gams = gamma_table(op, ts);
    double sup_all = 0.0, sup_half = 0.0;
    for (std::size_t n = 0; n < gams.size(); ++n) {
        const double s = gams[n].values.cwiseAbs().maxCoeff();
        sup_all = std::max(sup_all, s);
        if (ts[n] <= hi / 2) sup_half = std::max(sup_half, s);
    }
    CHECK(sup_all > 0.0);
    CHECK(sup_all < 2.0 * sup_half); // the windowed sup has saturated
}

} // TEST_SUITE
