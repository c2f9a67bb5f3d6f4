#pragma once

#include "katolab/elliptic.hpp"
#include "katolab/squarefunc.hpp"
#include "katolab/weights.hpp"

#include <span>

namespace katolab {

struct CubeCarleson {
    int level = 0;
    std::array<int, 2> index{0, 0};
    double value = 0.0;
};

struct CarlesonEstimate {
    double sup = 0.0;
    int argmax_level = 0;
    std::array<int, 2> argmax_index{0, 0};
    std::vector<CubeCarleson> table;
    double shifted_sup = 0.0; // same scan over the half-shifted tilings
    double t_lo = 0.0, t_hi = 0.0;
};

/// Weighted Carleson norm of gamma over dyadic cubes with side <= S/8:
/// sup_Q (1/w(Q)) sum_{x in Q} sum_{t <= l(Q)} |gamma_t(x)|^2 w(x) h^dim dlog.
/// gamma_by_t must align with tg.nodes.
CarlesonEstimate carleson_norm(const std::vector<VectorField>& gamma_by_t, const TimeGrid& tg,
                               const Weight& w);

/// Embedding ratio: the double integral of |p_t*f|^2 |gamma_t|^2 w against
/// |gamma|_{C,w} |f|^2_{L2(w)}.
double journe_check(const std::vector<VectorField>& gamma_by_t, const TimeGrid& tg,
                    const GridFunction& f, const Weight& w, const Mollifier& moll = {});

/// Finite family of unit vectors whose cones
/// Gamma_nu = { z : |z - nu (z.conj(nu))| < eps |z.conj(nu)| } cover C^n.
struct ConeNet {
    double eps = 0.0;
    std::vector<Eigen::VectorXcd> vectors;
};

bool in_cone(const Eigen::VectorXcd& z, const Eigen::VectorXcd& nu, double eps);

/// Greedy net over a dense deterministic sample, verified on an independent
/// random sample. dim_complex = 1 needs a single direction.
ConeNet cone_net(int dim_complex, double eps, std::uint64_t seed = 7);

struct NuState {
    Eigen::VectorXcd nu;
    std::vector<DyadicCube> s1, s2; // maximal violating subcubes per criterion
    std::vector<char> in_bad;       // site mask of union(S1) union(S2)
    bool processed = false;
};

/// Per-cube test-function state: F_Q = e^{-eps^2 l(Q)^2 L} phi stored as its
/// periodic displacement part G = F_Q - x, the gradient I + grad G, and the
/// per-direction stopping data.
struct TbState {
    std::shared_ptr<const Grid> grid;
    DyadicCube cube;
    double eps = 0.0;
    Eigen::MatrixXcd displacement; // N x dim
    Eigen::MatrixXcd grad_f;       // N x dim*dim, entry (i, k*dim+j) = d_k F_j
    std::vector<NuState> nus;
    std::vector<char> in_eq;            // E_Q = union over nu of Q \ B_nu
    std::vector<DyadicCube> bad_maximal; // maximal cubes of Q \ E_Q
};

/// Requires l(Q) <= S/16 (so 5Q and 10Q do not self-overlap) and
/// eps in (0, 1/8].
TbState make_fq(const Operator& op, const DyadicCube& q, double eps);

/// State with a prescribed gradient field (no operator), for stopping-time
/// stress tests.
TbState synthetic_tb_state(std::shared_ptr<const Grid> grid, const DyadicCube& q, double eps,
                           const Eigen::MatrixXcd& grad_f);

struct TbHypotheses {
    double c_i = 0.0;     // int_5Q |grad F_Q|^2 w / w(Q)
    double c_ii = 0.0;    // l^2 int_10Q |L F_Q|^2 w / w(Q)
    double g_bound = 0.0; // sup |F_Q - x| / (eps l(Q))
};

TbHypotheses tb_hypotheses(const Operator& op, const TbState& st);

/// |avg_Q(grad F_Q - I)|_F / eps.
double lemma21_check(const TbState& st);

/// Top-down maximal-subcube selection against the thresholds 3/4 and
/// 1/(8 eps), root included; fills the NuState for nu.
void stopping_time(TbState& st, const Eigen::VectorXcd& nu);

/// E_Q and the maximal-cube decomposition of Q \ E_Q (after every nu ran).
void finalize_good_sets(TbState& st);

/// min over states of w(E_Q)/w(Q).
double density_eta(std::span<const TbState> states, const Weight& w);

struct SawtoothResult {
    double lhs = 0.0;          // (1/w(Q)) integral of |gamma|^2 over the sawtooth
    double rhs = 0.0;          // 4 sum_nu full-box integral of |gamma . A_t grad F_nu|^2
    double forced_margin = 0.0; // min over per-nu sawtooth points of
                                // min(Re nu.A_t gradF - 3/4, 1/(8 eps) - |A_t gradF|)
    double coverage = 1.0;      // fraction of sawtooth nodes with a certified cone
    double sup_gamma_inf = 0.0;
    double eta_q = 0.0;         // w(E_Q)/w(Q) for this cube
};

/// Verifies the forced stopping bounds on each per-nu sawtooth and the cone
/// domination, then evaluates both sides of the sawtooth Carleson estimate.
/// Throws if a forced bound is violated (a stopping-time bug).
SawtoothResult sawtooth_carleson(const TbState& st, const ConeNet& net,
                                 const std::vector<VectorField>& gamma_by_t,
                                 const TimeGrid& tg, const Weight& w);

} // namespace katolab
