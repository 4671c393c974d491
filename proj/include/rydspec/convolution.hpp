#pragma once

#include <vector>

#include "rydspec/spectrum.hpp"

namespace rydspec {

/// Gaussian instrument response; sigma is the standard deviation in eV.
struct IRFParams {
  double sigma = 0.0;

  void validate() const;
};

/// Discrete unit-sum Gaussian kernel for a grid of spacing `step`,
/// truncated at +-5 sigma. Odd length, centered.
std::vector<double> gaussian_kernel(double sigma, double step);

/// Convolves the counts with the instrument response. The axis must be
/// uniform (use resample_uniform first); samples beyond the axis are
/// treated as zero. Output axis and weights are those of the input.
Spectrum convolve_gaussian(const Spectrum& signal, const IRFParams& irf);

}  // namespace rydspec
