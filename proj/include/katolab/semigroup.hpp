#pragma once

#include "katolab/elliptic.hpp"

namespace katolab {

enum class ExpMethod { spectral, scaling_squaring };

/// e^{-tL} f. The spectral method uses the operator's cached spectral
/// backend (eigendecomposition where available); scaling_squaring always
/// forms the dense matrix exponential of -tL.
GridFunction heat_apply(const Operator& op, double t, const GridFunction& f,
                        ExpMethod method = ExpMethod::spectral);

/// Heat kernel at heat time t: K(i,j) = [e^{-tL}]_ij / h^dim, so row sums
/// times h^dim equal 1 (conservation).
struct HeatKernel {
    double t = 0.0;
    Eigen::MatrixXcd k;
};

/// Kernel of V_t = -2 t L e^{-t^2 L} (t in length units); rows have zero
/// moment: row sums times h^dim vanish.
struct VtKernel {
    double t = 0.0;
    Eigen::MatrixXcd k;
};

HeatKernel heat_kernel(const Operator& op, double t);
VtKernel vt_kernel(const Operator& op, double t);

/// V_t = -2 t L e^{-t^2 L} as a matrix / applied to f (works for either
/// spectral backend).
Eigen::MatrixXcd vt_matrix(const Operator& op, double t);
GridFunction vt_apply(const Operator& op, double t, const GridFunction& f);

double conservation_residual(const HeatKernel& k, const Grid& grid);
double zero_moment_residual(const VtKernel& k, const Grid& grid);

struct PerTimeEnvelope {
    double t = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double max_slack = 0.0;
};

/// Majorant constants for the heat kernel and its derivative kernel:
///   |W_t(x,y)|  <= C1 t^{-n/2} exp(-C2 d^2 / t)
///   |dW|        <= C1 (|shift| / (sqrt(t)+d))^mu   * the same envelope
///   |V_s(x,y)|  <= vC1 s^{-(n+1)} exp(-vC2 d^2 / s^2)   (s = sqrt(t))
/// plus the V-kernel Hoelder exponent alpha. All fits are envelopes: no
/// sampled point exceeds the fitted bound.
struct GaussianDecayFit {
    double c1 = 0.0, c2 = 0.0;   // window-uniform heat kernel envelope
    double mu = 1.0;             // heat kernel Hoelder exponent, in (0,1]
    double alpha = 1.0;          // V-kernel Hoelder exponent, in (0,1]
    double v_c1 = 0.0, v_c2 = 0.0;
    double mu_prefactor = 0.0;   // envelope constant attached to mu
    double alpha_prefactor = 0.0;
    double max_slack = 0.0;      // worst envelope slack over all samples
    double t_lo = 0.0, t_hi = 0.0;
    std::vector<PerTimeEnvelope> per_t;
};

/// Envelope fit over heat times t_list, which must lie inside the trust
/// window [4h^2, (S/8)^2]. Displacements are restricted to d <= S/4 so
/// wraparound does not pollute the tails.
GaussianDecayFit gaussian_fit(const Operator& op, const std::vector<double>& t_list);

/// gamma_t = V_t phi with phi(x) = x, evaluated in displacement form
/// gamma_t(x) = -sum_y V_t(x,y) (x - y) h^dim using the odd displacement
/// table (the half-period offset carries no moment). Requires t <= S/8.
VectorField gamma_t(const Operator& op, double t);

/// gamma_t for every node of a time grid (nodes in length units).
std::vector<VectorField> gamma_table(const Operator& op, const std::vector<double>& t_nodes);

} // namespace katolab
