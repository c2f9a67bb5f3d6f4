#include "katolab/functional.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <numbers>

using namespace katolab;
using katolab::testing::plane_wave;
using katolab::testing::random_bandlimited;

TEST_SUITE("functional") {

TEST_CASE("spectral square root: defining identity and discrete symbol") {
    auto g = make_grid(1, 5, 1.0);
    Operator op = assemble(make_field(g, constant_weight(g), FieldKind::identity));
    Operator root = spectral_sqrt(op);

    CHECK((root.matrix() * root.matrix() - op.matrix()).norm() < 1e-9 * op.matrix().norm());

    // eigenvalues (2/h)|sin(pi k / P)|
    const int p = g->points_per_side();
    std::vector<double> expected;
    for (int k = 0; k < p; ++k)
        expected.push_back(2.0 / g->spacing() *
                           std::abs(std::sin(std::numbers::pi * k / p)));
    std::sort(expected.begin(), expected.end());
    Eigen::VectorXd eigs = root.eigenvalues().real();
    std::sort(eigs.data(), eigs.data() + eigs.size());
    for (int k = 0; k < p; ++k)
        CHECK(eigs[k] == doctest::Approx(expected[k]).epsilon(1e-9));
}

TEST_CASE("square root scaling covariance") {
    auto g = make_grid(1, 5, 1.0);
    Operator op = assemble(make_field(g, smooth_weight(g, 0.4), FieldKind::identity));
    const double c = 3.7;
    Operator scaled = op.derived(c * op.matrix(), c * op.eigenvalues());
    Eigen::MatrixXcd lhs = spectral_sqrt(scaled).matrix();
    Eigen::MatrixXcd rhs = std::sqrt(c) * spectral_sqrt(op).matrix();
    CHECK((lhs - rhs).norm() < 1e-10 * rhs.norm());
}

TEST_CASE("quadrature calibration is exact on eigenfunctions") {
    auto g = make_grid(1, 5, 1.0);
    Operator op = assemble(make_field(g, constant_weight(g), FieldKind::identity));
    QuadratureScheme scheme = QuadratureScheme::spanning(op, 200);
    // single frequency: quadrature reproduces sqrt(mu) exactly up to node error
    const double h = g->spacing();
    for (int k : {1, 5, 12}) {
        const double mu = std::pow(2.0 / h * std::sin(std::numbers::pi * k / 32), 2);
        GridFunction e = plane_wave(g, k);
        GridFunction q = quadrature_sqrt_apply(op, e, scheme);
        const double ratio = (q.values.cwiseQuotient(e.values)).mean().real();
        // high modes carry the lower-cutoff truncation floor, within contract
        CHECK(ratio == doctest::Approx(std::sqrt(mu)).epsilon(1e-4));
    }
}

TEST_CASE("quadrature annihilates constants and matches the spectral oracle") {
    auto g = make_grid(1, 6, 1.0);
    Weight w = power_weight(g, 0.5);
    FieldParams p;
    p.amplitude = 0.5;
    Operator op = assemble(make_field(g, w, FieldKind::real_symmetric, p));
    QuadratureScheme scheme = QuadratureScheme::spanning(op, 200);

    GridFunction c = GridFunction::constant(g, 4.2);
    CHECK(quadrature_sqrt_apply(op, c, scheme).values.cwiseAbs().maxCoeff() < 1e-9);

    GridFunction f = center_w(random_bandlimited(g, 9), w);
    GridFunction quad = quadrature_sqrt_apply(op, f, scheme);
    Operator root = spectral_sqrt(op);
    GridFunction spec(g, root.matrix() * f.values);
    GridFunction diff(g, quad.values - spec.values);
    const double rel =
        weighted_norm(diff, w, NormKind::L2w) / weighted_norm(spec, w, NormKind::L2w);
    CHECK(rel < 1e-4);

    // doubling the node count improves the oracle error
    QuadratureScheme fine = QuadratureScheme::spanning(op, 400);
    GridFunction quad2 = quadrature_sqrt_apply(op, f, fine);
    GridFunction diff2(g, quad2.values - spec.values);
    const double rel2 =
        weighted_norm(diff2, w, NormKind::L2w) / weighted_norm(spec, w, NormKind::L2w);
    CHECK(rel2 < rel);

    // a scheme that does not span the spectrum is rejected with guidance
    QuadratureScheme narrow = QuadratureScheme::explicit_window(1e-3, 1e-2, 32);
    CHECK_THROWS_WITH_AS(quadrature_sqrt_apply(op, f, narrow),
                         doctest::Contains("does not span"), std::invalid_argument);
}

TEST_CASE("scheme invariants") {
    CHECK_THROWS_AS(QuadratureScheme::explicit_window(1.0, 0.5, 64), std::invalid_argument);
    CHECK_THROWS_AS(QuadratureScheme::explicit_window(0.1, 1.0, 8), std::invalid_argument);
    QuadratureScheme q = QuadratureScheme::explicit_window(0.1, 10.0, 64);
    CHECK(q.c_norm == doctest::Approx(8.0 * std::sqrt(2.0) / std::sqrt(std::numbers::pi)));
    CHECK(q.nodes.size() == 64);
    CHECK(q.nodes.minCoeff() > 0.1);
    CHECK(q.nodes.maxCoeff() < 10.0);
}

TEST_CASE("kato ratio is exactly one for the flat Laplacian") {
    auto g = make_grid(1, 6, 1.0);
    Operator op = assemble(make_field(g, constant_weight(g), FieldKind::identity));
    for (std::uint64_t s = 60; s < 66; ++s) {
        GridFunction f = random_bandlimited(g, s);
        CHECK(kato_ratio(op, f) == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK_THROWS_AS(kato_ratio(op, GridFunction::constant(g, 2.0)), std::invalid_argument);
}

TEST_CASE("kato ratio lies in the certified interval for Hermitian fields") {
    auto g = make_grid(1, 6, 1.0);
    Weight w = power_weight(g, 0.5);
    FieldParams p;
    p.amplitude = 0.55;
    Operator op = assemble(make_field(g, w, FieldKind::real_symmetric, p));
    auto [lo, hi] = op.edge_ellipticity();
    for (std::uint64_t s = 70; s < 80; ++s) {
        const double r = kato_ratio(op, random_bandlimited(g, s));
        CHECK(r >= std::sqrt(lo) - 1e-8);
        CHECK(r <= std::sqrt(hi) + 1e-8);
    }
}

TEST_CASE("kato ratio is finite and refinement-stable for the complex family") {
    FieldParams p;
    p.kappa = 0.3;
    std::vector<double> ratios;
    for (int m : {6, 7}) {
        auto g = make_grid(1, m, 1.0);
        Weight w = power_weight(g, 0.5);
        Operator op = assemble(make_field(g, w, FieldKind::complex_perturbation, p));
        // the same continuum test function at both resolutions
        ratios.push_back(kato_ratio(op, random_bandlimited(g, 81, 8)));
    }
    CHECK(std::isfinite(ratios[0]));
    CHECK(ratios[0] > 0.1);
    CHECK(ratios[0] < 10.0);
    CHECK(std::abs(ratios[1] - ratios[0]) / ratios[0] < 0.1);
}

TEST_CASE("Hermitian exactness: |L^(1/2) f|_w^2 equals Re a(f,f)") {
    auto g = make_grid(1, 6, 1.0);
    Weight w = smooth_weight(g, 0.7);
    FieldParams p;
    p.amplitude = 0.5;
    Operator op = assemble(make_field(g, w, FieldKind::real_symmetric, p));
    Operator root = spectral_sqrt(op);
    for (std::uint64_t s = 90; s < 94; ++s) {
        GridFunction f = random_bandlimited(g, s);
        GridFunction rf(g, root.matrix() * f.values);
        const double lhs = std::abs(inner_w(rf, rf, w));
        const double rhs = sesquilinear_form(*op.field(), f, f).real();
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
    }
}

TEST_CASE("duality chain slack is nonnegative for Hermitian and complex fields") {
    auto g = make_grid(1, 5, 1.0);
    Weight w = power_weight(g, 0.5);
    for (auto kind : {FieldKind::real_symmetric, FieldKind::complex_perturbation}) {
        FieldParams p;
        p.amplitude = 0.4;
        p.kappa = 0.3;
        Operator op = assemble(make_field(g, w, kind, p));
        for (std::uint64_t s = 100; s < 103; ++s) {
            GridFunction f = random_bandlimited(g, s);
            auto slack = duality_chain_check(op, f);
            for (double v : slack) CHECK(v >= -1e-10);
        }
    }
}

TEST_CASE("matrix-function backend: large complex operators stay usable") {
    auto g = make_grid(1, 8, 1.0); // P = 256: diagonalization is not trusted here
    Weight w = power_weight(g, 0.5);
    FieldParams p;
    p.kappa = 0.3;
    Operator op = assemble(make_field(g, w, FieldKind::complex_perturbation, p));
    CHECK(op.backend() == SpectralBackend::matrix_function);
    CHECK_THROWS_AS(op.eigenvalues(), std::logic_error);

    // Schur square root satisfies the defining identity
    const Eigen::MatrixXcd& root = op.sqrt_matrix();
    CHECK((root * root - op.matrix()).norm() < 1e-9 * op.matrix().norm());

    // heat flow by Pade exponential conserves constants
    Eigen::MatrixXcd e = op.heat_matrix(1e-4);
    Eigen::VectorXcd ones = Eigen::VectorXcd::Ones(g->n_sites());
    CHECK(((e * ones).array() - 1.0).abs().maxCoeff() < 1e-10);

    // kato ratio works through the cached root
    GridFunction f = random_bandlimited(g, 111, 8);
    const double r = kato_ratio(op, f);
    CHECK(std::isfinite(r));
    CHECK(r > 0.3);
    CHECK(r < 3.0);
}

TEST_CASE("adjoint of the root is the root of the adjoint") {
    auto g = make_grid(1, 5, 1.0);
    Weight w = smooth_weight(g, 0.5);
    FieldParams p;
    p.kappa = 0.3;
    Operator op = assemble(make_field(g, w, FieldKind::complex_perturbation, p));
    CHECK(sqrt_adjoint_commutation(op) < 1e-8);
}

} // TEST_SUITE
