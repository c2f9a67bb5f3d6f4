#include "katolab/lattice.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace katolab {

Grid::Grid(int dim, int levels, double side)
    : dim_(dim), levels_(levels), pps_(1 << levels), side_(side),
      h_(side / pps_), cellmeas_(std::pow(h_, dim)),
      n_(static_cast<std::size_t>(std::pow(pps_, dim))) {}

std::shared_ptr<const Grid> Grid::make(int dim, int levels, double side) {
    if (dim != 1 && dim != 2)
        throw std::invalid_argument("grid: dim must be 1 or 2, got " + std::to_string(dim));
    const int max_m = dim == 1 ? 12 : 7;
    if (levels < 3 || levels > max_m)
        throw std::invalid_argument("grid: levels must be in [3," + std::to_string(max_m) +
                                    "] for dim " + std::to_string(dim) + ", got " +
                                    std::to_string(levels));
    if (!(side > 0.0)) throw std::invalid_argument("grid: side length must be positive");
    return std::shared_ptr<const Grid>(new Grid(dim, levels, side));
}

std::shared_ptr<const Grid> make_grid(int dim, int levels, double side) {
    return Grid::make(dim, levels, side);
}

std::size_t Grid::site_index(int ix, int iy) const {
    return static_cast<std::size_t>(iy) * pps_ + ix;
}

std::array<int, 2> Grid::site_coords(std::size_t idx) const {
    return {static_cast<int>(idx % pps_), static_cast<int>(idx / pps_)};
}

Eigen::VectorXd Grid::site_position(std::size_t idx) const {
    auto c = site_coords(idx);
    Eigen::VectorXd p(dim_);
    for (int d = 0; d < dim_; ++d) p[d] = (c[d] + 0.5) * h_;
    return p;
}

double Grid::axis_disp(int ci, int cj) const {
    int d = (ci - cj) % pps_;
    if (d <= -pps_ / 2) d += pps_;
    if (d > pps_ / 2) d -= pps_;
    return d * h_;
}

double Grid::torus_distance(std::size_t i, std::size_t j) const {
    auto a = site_coords(i), b = site_coords(j);
    double s = 0.0;
    for (int d = 0; d < dim_; ++d) {
        const double dx = axis_disp(a[d], b[d]);
        s += dx * dx;
    }
    return std::sqrt(s);
}

GridFunction::GridFunction(std::shared_ptr<const Grid> g, Eigen::VectorXcd v)
    : grid(std::move(g)), values(std::move(v)) {
    if (static_cast<std::size_t>(values.size()) != grid->n_sites())
        throw std::invalid_argument("grid function: value count does not match site count");
    if (!values.allFinite())
        throw std::invalid_argument("grid function: non-finite entry");
}

GridFunction GridFunction::zero(std::shared_ptr<const Grid> g) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(g->n_sites());
    return GridFunction(std::move(g), std::move(v));
}

GridFunction GridFunction::constant(std::shared_ptr<const Grid> g, std::complex<double> c) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Constant(g->n_sites(), c);
    return GridFunction(std::move(g), std::move(v));
}

VectorField::VectorField(std::shared_ptr<const Grid> g, Eigen::MatrixXcd v)
    : grid(std::move(g)), values(std::move(v)) {
    if (static_cast<std::size_t>(values.rows()) != grid->n_sites() ||
        values.cols() != grid->dim())
        throw std::invalid_argument("vector field: shape does not match grid");
    if (!values.allFinite())
        throw std::invalid_argument("vector field: non-finite entry");
}

VectorField VectorField::zero(std::shared_ptr<const Grid> g) {
    Eigen::MatrixXcd v = Eigen::MatrixXcd::Zero(g->n_sites(), g->dim());
    return VectorField(std::move(g), std::move(v));
}

std::vector<DyadicCube> dyadic_cubes(const Grid& grid, int k) {
    if (k < 0 || k > grid.levels())
        throw std::invalid_argument("dyadic_cubes: level " + std::to_string(k) +
                                    " outside [0," + std::to_string(grid.levels()) + "]");
    const int blocks = 1 << k;
    const int bsize = grid.points_per_side() / blocks;
    const double len = grid.side() / blocks;
    std::vector<DyadicCube> out;
    const int by_max = grid.dim() == 2 ? blocks : 1;
    out.reserve(static_cast<std::size_t>(blocks) * by_max);
    for (int by = 0; by < by_max; ++by) {
        for (int bx = 0; bx < blocks; ++bx) {
            DyadicCube q;
            q.level = k;
            q.index = {bx, by};
            q.side_len = len;
            IndexBlock blk;
            blk.start = {bx * bsize, by * bsize};
            blk.len = {bsize, grid.dim() == 2 ? bsize : 1};
            q.sites = block_sites(grid, blk);
            out.push_back(std::move(q));
        }
    }
    return out;
}

Eigen::VectorXd torus_disp(const Grid& grid, std::size_t i, std::size_t j) {
    auto a = grid.site_coords(i), b = grid.site_coords(j);
    Eigen::VectorXd d(grid.dim());
    for (int k = 0; k < grid.dim(); ++k) d[k] = grid.axis_disp(a[k], b[k]);
    return d;
}

int containing_level(const Grid& grid, double t) {
    if (!(t > grid.spacing() / 2 && t <= grid.side()))
        throw std::invalid_argument("containing_cube: t outside (h/2, S]");
    // side = S * 2^-k with t <= side < 2t  <=>  k = floor(log2(S/t))
    int k = static_cast<int>(std::floor(std::log2(grid.side() / t)));
    // guard rounding at exact powers of two
    while (k > 0 && grid.side() / (1 << k) < t) --k;
    while (grid.side() / (1 << k) >= 2.0 * t) ++k;
    if (k < 0 || k > grid.levels())
        throw std::invalid_argument("containing_cube: t outside resolvable range");
    return k;
}

DyadicCube containing_cube(const Grid& grid, std::size_t site, double t) {
    const int k = containing_level(grid, t);
    const int bsize = grid.points_per_side() >> k;
    auto c = grid.site_coords(site);
    DyadicCube q;
    q.level = k;
    q.index = {c[0] / bsize, grid.dim() == 2 ? c[1] / bsize : 0};
    q.side_len = grid.side() / (1 << k);
    IndexBlock blk;
    blk.start = {q.index[0] * bsize, q.index[1] * bsize};
    blk.len = {bsize, grid.dim() == 2 ? bsize : 1};
    q.sites = block_sites(grid, blk);
    return q;
}

std::vector<std::size_t> block_sites(const Grid& grid, const IndexBlock& block) {
    const int p = grid.points_per_side();
    std::vector<std::size_t> out;
    out.reserve(static_cast<std::size_t>(block.len[0]) * block.len[1]);
    for (int dy = 0; dy < block.len[1]; ++dy) {
        const int iy = ((block.start[1] + dy) % p + p) % p;
        for (int dx = 0; dx < block.len[0]; ++dx) {
            const int ix = ((block.start[0] + dx) % p + p) % p;
            out.push_back(grid.site_index(ix, grid.dim() == 2 ? iy : 0));
        }
    }
    return out;
}

IndexBlock shifted_cube_block(const Grid& grid, int k, const std::array<int, 2>& index,
                              int shift_mask) {
    const int bsize = grid.points_per_side() >> k;
    IndexBlock blk;
    blk.len = {bsize, grid.dim() == 2 ? bsize : 1};
    for (int d = 0; d < grid.dim(); ++d) {
        blk.start[d] = index[d] * bsize + ((shift_mask >> d) & 1 ? bsize / 2 : 0);
    }
    return blk;
}

IndexBlock enlarged_block(const Grid& grid, const DyadicCube& q, int factor) {
    const int bsize = grid.points_per_side() >> q.level;
    if (factor * bsize > grid.points_per_side())
        throw std::invalid_argument("enlarged_block: " + std::to_string(factor) +
                                    "Q wraps onto itself; use a smaller cube");
    // centered block: factor*bsize sites, center preserved; bsize is even
    // whenever factor is even (bsize >= 2 below the singleton level)
    IndexBlock blk;
    blk.len = {factor * bsize, grid.dim() == 2 ? factor * bsize : 1};
    for (int d = 0; d < grid.dim(); ++d) {
        const int twice_start = 2 * q.index[d] * bsize + bsize - factor * bsize;
        if (twice_start % 2 != 0)
            throw std::invalid_argument("enlarged_block: cube too small to center");
        blk.start[d] = twice_start / 2;
    }
    return blk;
}

Eigen::VectorXd odd_axis_displacement(const Grid& grid) {
    const int p = grid.points_per_side();
    Eigen::VectorXd axis(p);
    for (int d = 0; d < p; ++d) {
        // odd part: minimal displacement, except 0 at the half-period offset
        axis[d] = (2 * d == p) ? 0.0 : grid.axis_disp(d, 0);
    }
    return axis;
}

Eigen::MatrixXd displacements_from(const Grid& grid, const Eigen::VectorXd& axis_table,
                                   std::size_t x) {
    const int p = grid.points_per_side();
    auto cx = grid.site_coords(x);
    Eigen::MatrixXd out(grid.n_sites(), grid.dim());
    for (std::size_t y = 0; y < grid.n_sites(); ++y) {
        auto cy = grid.site_coords(y);
        for (int d = 0; d < grid.dim(); ++d) {
            const int off = ((cy[d] - cx[d]) % p + p) % p;
            out(y, d) = axis_table[off];
        }
    }
    return out;
}

} // namespace katolab
