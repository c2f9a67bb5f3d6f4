#include "katolab/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace katolab {

namespace {

MajorantLine lift_to_majorant(std::span<const double> x, std::span<const double> y,
                              double slope) {
    double c = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < x.size(); ++i) c = std::max(c, y[i] - slope * x[i]);
    MajorantLine line{slope, c, 0.0, 0.0};
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double s = line.intercept + slope * x[i] - y[i];
        line.max_slack = std::max(line.max_slack, s);
        total += s;
    }
    line.mean_slack = x.empty() ? 0.0 : total / static_cast<double>(x.size());
    return line;
}

} // namespace

MajorantLine envelope_line_fit(std::span<const double> x, std::span<const double> y,
                               int bins) {
    if (x.size() != y.size() || x.empty())
        throw std::invalid_argument("envelope_line_fit: need matching nonempty samples");
    const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
    const double lo = *lo_it, hi = *hi_it;
    if (!(hi > lo)) return lift_to_majorant(x, y, 0.0);

    std::vector<double> bx, by;
    bx.reserve(bins);
    by.reserve(bins);
    const double width = (hi - lo) / bins;
    std::vector<double> best(bins, -std::numeric_limits<double>::infinity());
    std::vector<double> bestx(bins, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        int b = std::min(bins - 1, static_cast<int>((x[i] - lo) / width));
        if (y[i] > best[b]) {
            best[b] = y[i];
            bestx[b] = x[i];
        }
    }
    for (int b = 0; b < bins; ++b) {
        if (std::isfinite(best[b])) {
            bx.push_back(bestx[b]);
            by.push_back(best[b]);
        }
    }
    if (bx.size() < 2) return lift_to_majorant(x, y, 0.0);

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(bx.size());
    for (std::size_t i = 0; i < bx.size(); ++i) {
        sx += bx[i];
        sy += by[i];
        sxx += bx[i] * bx[i];
        sxy += bx[i] * by[i];
    }
    const double denom = n * sxx - sx * sx;
    const double slope = denom == 0.0 ? 0.0 : (n * sxy - sx * sy) / denom;
    return lift_to_majorant(x, y, slope);
}

MajorantLine envelope_line_fit_clamped(std::span<const double> x, std::span<const double> y,
                                       double slope_lo, double slope_hi, int bins) {
    MajorantLine line = envelope_line_fit(x, y, bins);
    const double s = std::clamp(line.slope, slope_lo, slope_hi);
    if (s != line.slope) return lift_to_majorant(x, y, s);
    return line;
}

MajorantLine envelope_line_fit_rising(std::span<const double> x, std::span<const double> y,
                                      double slope_lo, double slope_hi, int bins) {
    if (x.size() != y.size() || x.empty())
        throw std::invalid_argument("envelope_line_fit_rising: need matching nonempty samples");
    const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
    const double lo = *lo_it, hi = *hi_it;
    if (!(hi > lo)) return lift_to_majorant(x, y, 0.0);
    const double width = (hi - lo) / bins;
    std::vector<double> best(bins, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < x.size(); ++i) {
        int b = std::min(bins - 1, static_cast<int>((x[i] - lo) / width));
        best[b] = std::max(best[b], y[i]);
    }
    int peak_bin = 0;
    for (int b = 0; b < bins; ++b)
        if (std::isfinite(best[b]) &&
            (!std::isfinite(best[peak_bin]) || best[b] >= best[peak_bin]))
            peak_bin = b;
    const double x_cut = lo + (peak_bin + 1) * width;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] <= x_cut) {
            xs.push_back(x[i]);
            ys.push_back(y[i]);
        }
    }
    MajorantLine line = envelope_line_fit(xs, ys, bins);
    const double slope = std::clamp(line.slope, slope_lo, slope_hi);
    return lift_to_majorant(x, y, slope);
}

MajorantLine majorant_with_slope(std::span<const double> x, std::span<const double> y,
                                 double slope) {
    if (x.size() != y.size() || x.empty())
        throw std::invalid_argument("majorant_with_slope: need matching nonempty samples");
    return lift_to_majorant(x, y, slope);
}

} // namespace katolab
