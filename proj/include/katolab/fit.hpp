#pragma once

#include <span>
#include <vector>

namespace katolab {

/// A line y = intercept + slope * x that majorizes every sample point.
struct MajorantLine {
    double slope = 0.0;
    double intercept = 0.0;
    double max_slack = 0.0;   // max over samples of (line - y), >= 0
    double mean_slack = 0.0;
};

/// Envelope-line fit: least squares through per-bin maxima of (x, y),
/// then the intercept is lifted so the line majorizes every sample.
/// Binning is over the x-range; empty bins are skipped.
MajorantLine envelope_line_fit(std::span<const double> x, std::span<const double> y,
                               int bins = 32);

/// Same, but the slope is clamped into [slope_lo, slope_hi] before lifting.
MajorantLine envelope_line_fit_clamped(std::span<const double> x, std::span<const double> y,
                                       double slope_lo, double slope_hi, int bins = 32);

/// Envelope fit using only the rising part of the bin-max profile (bins left
/// of the global maximum); saturated bins beyond it are slack, not envelope.
/// The intercept still majorizes every sample.
MajorantLine envelope_line_fit_rising(std::span<const double> x, std::span<const double> y,
                                      double slope_lo, double slope_hi, int bins = 32);

/// Majorant with a fixed slope: intercept = max(y - slope * x).
MajorantLine majorant_with_slope(std::span<const double> x, std::span<const double> y,
                                 double slope);

} // namespace katolab
