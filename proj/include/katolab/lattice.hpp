#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <memory>
#include <vector>

namespace katolab {

/// Periodic lattice in 1 or 2 space dimensions. Sites are cell centers at
/// (idx + 1/2) * h; dyadic cubes are index blocks, so nesting is exact and
/// there are no boundary sites.
class Grid {
public:
    /// dim in {1,2}; 3 <= levels <= 12 (dim 1) or 3 <= levels <= 7 (dim 2).
    static std::shared_ptr<const Grid> make(int dim, int levels, double side);

    int dim() const { return dim_; }
    int levels() const { return levels_; }
    int points_per_side() const { return pps_; }
    double side() const { return side_; }
    double spacing() const { return h_; }
    std::size_t n_sites() const { return n_; }
    double cell_measure() const { return cellmeas_; } // h^dim

    std::size_t site_index(int ix, int iy = 0) const;
    std::array<int, 2> site_coords(std::size_t idx) const;
    /// Cell-center position, one coordinate per dimension.
    Eigen::VectorXd site_position(std::size_t idx) const;

    /// Signed minimal displacement along one axis, in (-S/2, S/2].
    double axis_disp(int ci, int cj) const;

    /// Torus distance between two sites.
    double torus_distance(std::size_t i, std::size_t j) const;

private:
    Grid(int dim, int levels, double side);
    int dim_, levels_, pps_;
    double side_, h_, cellmeas_;
    std::size_t n_;
};

struct GridFunction {
    std::shared_ptr<const Grid> grid;
    Eigen::VectorXcd values; // one complex value per site

    GridFunction() = default;
    GridFunction(std::shared_ptr<const Grid> g, Eigen::VectorXcd v);
    static GridFunction zero(std::shared_ptr<const Grid> g);
    static GridFunction constant(std::shared_ptr<const Grid> g, std::complex<double> c);
};

struct VectorField {
    std::shared_ptr<const Grid> grid;
    Eigen::MatrixXcd values; // N x dim, one complex component per axis

    VectorField() = default;
    VectorField(std::shared_ptr<const Grid> g, Eigen::MatrixXcd v);
    static VectorField zero(std::shared_ptr<const Grid> g);
};

struct DyadicCube {
    int level = 0;                 // 0 = whole grid, grid->levels() = singletons
    std::array<int, 2> index{0, 0}; // block index per axis
    double side_len = 0.0;         // S * 2^-level
    std::vector<std::size_t> sites;
};

std::shared_ptr<const Grid> make_grid(int dim, int levels, double side);

/// The 2^(k*dim) disjoint level-k cubes tiling the grid.
std::vector<DyadicCube> dyadic_cubes(const Grid& grid, int k);

/// Signed minimal displacement vector from site j to site i, each
/// component in (-S/2, S/2].
Eigen::VectorXd torus_disp(const Grid& grid, std::size_t i, std::size_t j);

/// The unique dyadic cube Q_t(x) containing the site, with
/// t <= side(Q_t) < 2t. Valid for h/2 < t <= S.
DyadicCube containing_cube(const Grid& grid, std::size_t site, double t);

/// Level of Q_t: floor(log2(S/t)) clamped to [0, levels].
int containing_level(const Grid& grid, double t);

/// Periodic index block: [start, start+len) per axis, mod P.
struct IndexBlock {
    std::array<int, 2> start{0, 0};
    std::array<int, 2> len{1, 1};
};

std::vector<std::size_t> block_sites(const Grid& grid, const IndexBlock& block);

/// Block of the level-k tiling shifted by half a cube side along the axes
/// selected by shift_mask (bit per axis).
IndexBlock shifted_cube_block(const Grid& grid, int k, const std::array<int, 2>& index,
                              int shift_mask);

/// The cube scaled by an odd integer factor about its center, as a periodic
/// block (factor * side sites per axis). Throws if it wraps onto itself.
IndexBlock enlarged_block(const Grid& grid, const DyadicCube& q, int factor);

/// Axis displacement by index offset, used wherever a kernel is integrated
/// against the coordinate function: the odd part of the minimal displacement,
/// which vanishes at the exact half-period offset.
Eigen::VectorXd odd_axis_displacement(const Grid& grid);

/// disp(y, x) for all y at fixed x, via the odd axis table. N x dim.
Eigen::MatrixXd displacements_from(const Grid& grid, const Eigen::VectorXd& axis_table,
                                   std::size_t x);

} // namespace katolab
