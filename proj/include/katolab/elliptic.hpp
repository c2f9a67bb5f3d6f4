#pragma once

#include "katolab/lattice.hpp"
#include "katolab/weights.hpp"

#include <functional>
#include <optional>

namespace katolab {

enum class FieldKind { identity, real_symmetric, complex_perturbation };

struct FieldParams {
    double kappa = 0.0;      // complex_perturbation strength, in [0, 1)
    double amplitude = 0.0;  // real_symmetric modulation depth, in [0, 1)
};

/// Per-site dim x dim complex coefficient matrix A(x) with w(x)^-1 A(x)
/// bounded and elliptic: Re<A xi, xi> >= lambda w |xi|^2 and
/// |<A xi, eta>| <= Lambda w |xi||eta|, checked per site.
struct EllipticField {
    std::shared_ptr<const Grid> grid;
    Weight w;
    // a[k][l](x) = A_kl(x); only a[0][0] is used in dim 1
    std::array<std::array<Eigen::VectorXcd, 2>, 2> a;
    double lambda_decl = 1.0;
    double Lambda_decl = 1.0;
    FieldKind kind = FieldKind::identity;

    std::complex<double> entry(std::size_t site, int k, int l) const { return a[k][l][site]; }
};

EllipticField make_field(std::shared_ptr<const Grid> grid, const Weight& w, FieldKind kind,
                         FieldParams params = {});

/// Exact per-site scan: (min eigenvalue of the Hermitian part of w^-1 A,
/// max operator norm of w^-1 A).
std::pair<double, double> ellipticity_constants(const EllipticField& field);

/// Forward-difference gradient, one component per axis.
VectorField grad(const GridFunction& f);

/// Minus the adjoint of grad under the unweighted inner product
/// (backward differences), so sum div(v) conj(g) = -sum v . conj(grad g).
GridFunction divergence(const VectorField& v);

/// The sesquilinear form a(f,g): diagonal coefficients evaluated at edge
/// midpoints against forward differences, off-diagonal coefficients at sites
/// against centered differences. Equals <L_w f, g>_w exactly by construction.
std::complex<double> sesquilinear_form(const EllipticField& field, const GridFunction& f,
                                       const GridFunction& g);

/// Edge-weighted gradient norm: sum_k |D_k f|^2 (w(x)+w(x+e_k))/2 h^dim.
double grad_norm_edge_w(const GridFunction& f, const Weight& w);

/// How functions of the operator are evaluated. Hermitian forms (and small
/// verified complex operators) carry a full eigendecomposition; otherwise the
/// eigenvector matrix of the nearly defective high-frequency pairs is too
/// ill-conditioned, and functions are evaluated by dense matrix algorithms
/// (Pade exponential, Schur square root).
enum class SpectralBackend { diagonal, matrix_function };

/// The assembled discrete operator L_w = -w^-1 div A grad, dense with
/// cached spectral data.
class Operator {
public:
    Operator(Operator&&) = default;
    Operator& operator=(Operator&&) = default;
    Operator(const Operator& o);
    Operator& operator=(const Operator& o);

    const Grid& grid() const { return *grid_; }
    std::shared_ptr<const Grid> grid_ptr() const { return grid_; }
    const Weight& weight() const { return weight_; }
    const std::optional<EllipticField>& field() const { return field_; }
    const Eigen::MatrixXcd& matrix() const { return mat_; }
    bool hermitian_form() const { return hermitian_; }
    SpectralBackend backend() const { return backend_; }

    /// Throws for the matrix-function backend (no trustworthy eigenvectors).
    const Eigen::VectorXcd& eigenvalues() const;
    double spectral_max() const;
    double smallest_nonzero_eigenvalue() const;

    GridFunction apply(const GridFunction& f) const;

    /// phi(L) f through the cached eigendecomposition (diagonal backend only).
    GridFunction spectral_apply(const std::function<std::complex<double>(std::complex<double>)>& phi,
                                const GridFunction& f) const;

    /// phi(L) as a dense matrix (diagonal backend only).
    Eigen::MatrixXcd spectral_matrix(const std::function<std::complex<double>(std::complex<double>)>& phi) const;

    /// e^{-tL}, exact for either backend.
    Eigen::MatrixXcd heat_matrix(double t) const;

    /// Principal square root of L (lazily cached; Schur method for the
    /// matrix-function backend).
    const Eigen::MatrixXcd& sqrt_matrix() const;

    /// Operator with the given matrix sharing this operator's grid/weight and
    /// spectral frame (used for functional-calculus results).
    Operator derived(Eigen::MatrixXcd mat, Eigen::VectorXcd eigs) const;

    /// The w-adjoint as a matrix: W^-1 M^H W.
    Eigen::MatrixXcd w_adjoint_matrix() const;

    /// Certified two-sided form constants: in dim 1 the per-edge range of
    /// Re(a_e)/w_e; in dim 2 the per-site ellipticity constants (for which
    /// lambda |grad f|_edge^2 <= Re a(f,f) <= Lambda |grad f|_edge^2 holds
    /// exactly).
    std::pair<double, double> edge_ellipticity() const;

    friend Operator assemble(const EllipticField& field);

private:
    Operator() = default;
    std::shared_ptr<const Grid> grid_;
    Weight weight_;
    std::optional<EllipticField> field_;
    Eigen::MatrixXcd mat_;
    bool hermitian_ = false;
    SpectralBackend backend_ = SpectralBackend::diagonal;
    Eigen::VectorXcd eigs_;
    Eigen::MatrixXcd evecs_, evecs_inv_;
    mutable std::shared_ptr<const Eigen::MatrixXcd> sqrt_cache_; // set at most once
};

/// Build L_w from the coefficient field; caches the eigendecomposition
/// (Hermitian-symmetrized when the form is Hermitian) and verifies the form
/// identity on probe vectors.
Operator assemble(const EllipticField& field);

/// |a(f,g) - <L_w f, g>_w|.
double form_identity_check(const Operator& op, const GridFunction& f, const GridFunction& g);

/// The w-adjoint operator, assembled from the conjugate-transposed field.
Operator adjoint(const Operator& op);

/// L_w applied to the coordinate function phi(x) = x, one column per
/// component (computed from grad phi = identity, so it is periodic).
Eigen::MatrixXcd coordinate_action(const Operator& op);

} // namespace katolab
