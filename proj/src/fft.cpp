#include "katolab/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>

namespace katolab {

namespace {

struct PlanPair {
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;
};

// FFTW plan creation is not thread-safe; execution with explicit buffers is.
std::mutex plan_mutex;
std::map<std::pair<int, int>, PlanPair>& plan_cache() {
    static std::map<std::pair<int, int>, PlanPair> cache;
    return cache;
}

PlanPair plans_for(const Grid& grid) {
    std::lock_guard<std::mutex> lock(plan_mutex);
    auto key = std::make_pair(grid.dim(), grid.points_per_side());
    auto& cache = plan_cache();
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    const int p = grid.points_per_side();
    const std::size_t n = grid.n_sites();
    // plans are executed later on caller-owned arrays, so they must be
    // out-of-place and alignment-agnostic
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fftw_complex* in = fftw_alloc_complex(n);
    fftw_complex* out = fftw_alloc_complex(n);
    PlanPair pp;
    if (grid.dim() == 1) {
        pp.fwd = fftw_plan_dft_1d(p, in, out, FFTW_FORWARD, flags);
        pp.bwd = fftw_plan_dft_1d(p, in, out, FFTW_BACKWARD, flags);
    } else {
        // row-major site index iy*P+ix matches fftw's (n0=P rows, n1=P cols)
        pp.fwd = fftw_plan_dft_2d(p, p, in, out, FFTW_FORWARD, flags);
        pp.bwd = fftw_plan_dft_2d(p, p, in, out, FFTW_BACKWARD, flags);
    }
    fftw_free(in);
    fftw_free(out);
    cache.emplace(key, pp);
    return pp;
}

Eigen::VectorXcd run_plan(fftw_plan plan, const Eigen::VectorXcd& in) {
    Eigen::VectorXcd out(in.size());
    fftw_execute_dft(plan,
                     reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in.data())),
                     reinterpret_cast<fftw_complex*>(out.data()));
    return out;
}

} // namespace

Eigen::VectorXcd fft_forward(const Grid& grid, const Eigen::VectorXcd& values) {
    return run_plan(plans_for(grid).fwd, values);
}

Eigen::VectorXcd fft_backward(const Grid& grid, const Eigen::VectorXcd& spectrum) {
    Eigen::VectorXcd out = run_plan(plans_for(grid).bwd, spectrum);
    out /= static_cast<double>(grid.n_sites());
    return out;
}

std::array<int, 2> bin_frequency(const Grid& grid, std::size_t bin) {
    const int p = grid.points_per_side();
    auto c = grid.site_coords(bin);
    std::array<int, 2> k{0, 0};
    for (int d = 0; d < grid.dim(); ++d) k[d] = c[d] > p / 2 ? c[d] - p : c[d];
    return k;
}

bool bin_has_nyquist(const Grid& grid, std::size_t bin) {
    const int p = grid.points_per_side();
    auto k = bin_frequency(grid, bin);
    for (int d = 0; d < grid.dim(); ++d)
        if (k[d] == p / 2) return true;
    return false;
}

GridFunction apply_multiplier(const GridFunction& f, const Eigen::VectorXcd& factors) {
    if (factors.size() != f.values.size())
        throw std::invalid_argument("apply_multiplier: factor count mismatch");
    Eigen::VectorXcd spec = fft_forward(*f.grid, f.values);
    spec.array() *= factors.array();
    return GridFunction(f.grid, fft_backward(*f.grid, spec));
}

GridFunction circular_convolve(const GridFunction& kernel, const GridFunction& f) {
    if (kernel.grid.get() != f.grid.get() && kernel.grid->n_sites() != f.grid->n_sites())
        throw std::invalid_argument("circular_convolve: grids differ");
    const Grid& g = *f.grid;
    Eigen::VectorXcd ks = fft_forward(g, kernel.values);
    Eigen::VectorXcd fs = fft_forward(g, f.values);
    ks.array() *= fs.array();
    Eigen::VectorXcd out = fft_backward(g, ks);
    out *= g.cell_measure();
    return GridFunction(f.grid, std::move(out));
}

} // namespace katolab
