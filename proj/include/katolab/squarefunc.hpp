#pragma once

#include "katolab/elliptic.hpp"
#include "katolab/fft.hpp"
#include "katolab/weights.hpp"

namespace katolab {

/// Log-spaced midpoint nodes with dt/t weight dlog per node.
struct TimeGrid {
    Eigen::VectorXd nodes;
    double dlog = 0.0;
    double t_lo = 0.0, t_hi = 0.0;

    /// Kernel-trusted window [h, S/8].
    static TimeGrid trusted(const Grid& grid, double dlog_max = 0.25);

    /// Explicit window for spectrally exact quantities (no kernel trust
    /// constraint applies there).
    static TimeGrid window(double lo, double hi, double dlog_max = 0.25);
};

/// Nonnegative, radial, decreasing profile with support radius 1, discretized
/// per scale and renormalized to unit mass.
class Mollifier {
public:
    /// cos^2(pi r / 2) bump.
    Mollifier() = default;

    /// Discrete kernel p_t by offset from the origin site; sums to h^-dim
    /// exactly after renormalization (so p_t * 1 = 1).
    GridFunction kernel(std::shared_ptr<const Grid> grid, double t) const;

    GridFunction apply(const GridFunction& f, double t) const;

    double profile(double r) const;
};

/// Zero-mean radial band-pass family given by its Fourier profile, a
/// difference of Gaussians normalized so int_0^inf psihat(u)^2 du/u = 1.
class LPFilter {
public:
    enum class Normalization { continuum, per_frequency };

    static LPFilter continuum();
    /// Additionally divides per grid frequency by the discrete Calderon sum
    /// over the time grid wherever that sum exceeds 1/2 (the resolved band),
    /// making the discrete reproducing sum exactly 1 there.
    static LPFilter per_frequency(std::shared_ptr<const Grid> grid, const TimeGrid& tg);

    double profile(double u) const;
    /// Per-bin multiplier vector for scale s.
    Eigen::VectorXcd multipliers(const Grid& grid, double s) const;
    GridFunction apply(const GridFunction& f, double s) const;

    struct CalderonStatus {
        std::vector<double> raw_sum;     // discrete Calderon sum per bin (pre-normalization)
        std::vector<char> resolved;      // raw_sum >= 1/2
        double worst_resolved_dev = 0.0; // max |sum-1| after normalization over resolved bins
    };
    CalderonStatus status(const Grid& grid, const TimeGrid& tg) const;

private:
    Normalization mode_ = Normalization::continuum;
    std::shared_ptr<const Grid> grid_;
    Eigen::VectorXd freq_factor_; // per-bin normalization when per_frequency
};

/// p_t * f or psi_s * f on the torus (circular convolution via FFT).
GridFunction convolve(const GridFunction& f, const GridFunction& kernel);

/// Riesz transform: multiplier -i k_j/|k| on signed integer frequencies,
/// 0 at k = 0. Self-conjugate (Nyquist) bins keep the full-modulus factor,
/// so the involution and isometry identities hold on every bin.
GridFunction riesz(const GridFunction& f, int j);

/// Hardy-Littlewood maximal function over dyadic and half-shifted cubes
/// containing each site.
GridFunction maximal(const GridFunction& f);

/// A_t f: average over the containing dyadic cube Q_t(x).
GridFunction dyadic_avg(const GridFunction& f, double t);

struct SfResult {
    double value = 0.0; // the weighted double integral
    double ratio = 0.0; // value / reference squared norm
};

/// int |t V_t g|^2 w dx dt/t against |g|^2_{L2(w)}.
SfResult vertical_sf(const Operator& op, const GridFunction& g, const TimeGrid& tg);

/// int |psi_s * f|^2 w dx ds/s against |f|^2_{L2(w)}.
SfResult gfunction_sf(const GridFunction& f, const LPFilter& filter, const Weight& w,
                      const TimeGrid& tg);

/// int |(P_t - A_t) f|^2 w dx dt/t against |f|^2_{L2(w)}.
SfResult pa_sf(const GridFunction& f, const Weight& w, const TimeGrid& tg,
               const Mollifier& moll = {});

/// Taylor-remainder square function against |grad f|^2_{L2(w)}:
/// the V_t integral of f(y)-f(x)-(y-x).(p_t*grad f)(x).
SfResult taylor_sf(const Operator& op, const GridFunction& f, const TimeGrid& tg,
                   const Mollifier& moll = {});

/// Exact L2(w) operator norm: largest singular value of W^(1/2) M W^(-1/2).
double op_norm_w(const Eigen::MatrixXcd& m, const Weight& w);

struct OpNormSample {
    double s = 0.0, t = 0.0, norm = 0.0;
};

/// Majorant fit of |(tV_t) Q_s|_{B(L2(w))} <= K min(t/s, s/t)^alpha.
struct OpNormDecayFit {
    double K = 0.0;
    double alpha = 0.0;
    double max_slack = 0.0;
    std::vector<OpNormSample> samples;
};

OpNormDecayFit opnorm_decay(const Operator& op, const LPFilter& filter,
                            const std::vector<double>& s_list,
                            const std::vector<double>& t_list);

} // namespace katolab
