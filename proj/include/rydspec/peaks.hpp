#pragma once

#include <vector>

#include "rydspec/spectrum.hpp"

namespace rydspec {

struct PeakGuess {
  double center = 0.0;          ///< eV
  double height = 0.0;          ///< smoothed counts at the maximum
  double width_estimate = 0.0;  ///< FWHM estimate at half prominence, eV
  double prominence = 0.0;      ///< topographic prominence, counts
};

/// Local maxima of the 5-point moving average with prominence >=
/// `min_prominence`, kept greedily in descending prominence subject to
/// pairwise separation >= `min_separation`. Sorted by ascending center.
std::vector<PeakGuess> detect_peaks(const Spectrum& s, double min_prominence, double min_separation);

/// 5-point centered moving average; the window shrinks at the edges.
std::vector<double> moving_average5(std::span<const double> y);

/// Robust noise standard deviation from the median absolute first
/// difference (Gaussian-consistent).
double estimate_noise(std::span<const double> y);

}  // namespace rydspec
