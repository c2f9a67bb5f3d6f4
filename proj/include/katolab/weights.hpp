#pragma once

#include "katolab/lattice.hpp"

#include <complex>
#include <span>
#include <string>

namespace katolab {

/// Strictly positive field on the grid.
struct Weight {
    std::shared_ptr<const Grid> grid;
    Eigen::VectorXd values;
    std::string family;
    double param = 0.0;

    Weight() = default;
    Weight(std::shared_ptr<const Grid> g, Eigen::VectorXd v, std::string fam, double p);
};

Weight constant_weight(std::shared_ptr<const Grid> grid, double c = 1.0);

/// w(x) = max(d_T(x, x0), h/2)^a, torus distance to the pole site.
/// Requires -dim < a < dim (the range where the comparability constant
/// stays finite under refinement).
Weight power_weight(std::shared_ptr<const Grid> grid, double a, std::size_t x0);
Weight power_weight(std::shared_ptr<const Grid> grid, double a); // pole at center site

/// lo on the sites with x-coordinate in the left half, hi on the rest.
Weight two_valued_weight(std::shared_ptr<const Grid> grid, double lo, double hi);

/// exp(amplitude * sin(2 pi x/S)) (times the same factor in y for dim 2).
Weight smooth_weight(std::shared_ptr<const Grid> grid, double amplitude);

struct A2Report {
    double value = 1.0;                 // sup over scanned cubes of (avg w)(avg 1/w)
    int argmax_level = 0;
    int argmax_shift = 0;               // bit per axis: half-shifted tiling
    std::array<int, 2> argmax_index{0, 0};
    std::vector<double> per_level_max;  // dyadic + shifted max per level
    double dyadic_only = 1.0;           // sup restricted to the unshifted tiling
};

/// Muckenhoupt constant measured over all dyadic cubes at every level plus
/// the 2^dim half-shifted copies of each tiling.
A2Report a2_constant(const Weight& w);

struct AinftyParams {
    double delta = 1.0;  // w(E)/w(Q) <= alpha (|E|/|Q|)^delta
    double alpha = 1.0;
    double eps = 1.0;    // |E|/|Q| <= beta (w(E)/w(Q))^eps
    double beta = 1.0;
    double max_slack_fwd = 0.0;
    double max_slack_rev = 0.0;
    std::size_t samples = 0;
};

/// Fit the comparability exponents over sampled (Q, E subset of Q) pairs;
/// the fit is a majorant (both inequalities hold on every sampled pair).
AinftyParams ainfty_fit(const Weight& w, std::uint64_t seed = 1);

double weighted_measure(const Weight& w, std::span<const std::size_t> sites);
double weighted_measure(const Weight& w, const DyadicCube& q);

enum class NormKind { L2w, H1w, GradL2w };

/// Discrete norms with forward-difference gradients and site weights.
double weighted_norm(const GridFunction& f, const Weight& w, NormKind kind);

/// <f, g>_w = sum f conj(g) w h^dim.
std::complex<double> inner_w(const GridFunction& f, const GridFunction& g, const Weight& w);

/// Subtract the w-mean: f - <f,1>_w / w(grid).
GridFunction center_w(const GridFunction& f, const Weight& w);

} // namespace katolab
