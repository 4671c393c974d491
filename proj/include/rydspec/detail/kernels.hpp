#pragma once

// Scalar lineshape kernels templated on the working precision. The public
// API evaluates in double; jacobian_check re-evaluates in long double so
// that finite-difference rounding noise stays below truncation error.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "rydspec/constants.hpp"
#include "rydspec/lineshapes.hpp"

namespace rydspec::detail {

template <class Real>
Real fano(const FanoParams& p, Real e) {
  const Real half = Real(p.Gamma_n) / 2;
  const Real x = e - Real(p.E_n);
  return Real(p.f_n) * (half + 2 * Real(p.q_n) * x) / (half * half + x * x);
}

template <class Real>
Real lorentzian(const LorentzParams& p, Real e) {
  const Real half = Real(p.Gamma) / 2;
  const Real x = e - Real(p.E_0);
  const Real h2 = half * half;
  return Real(p.amplitude) * (h2 / (x * x + h2));
}

template <class Real>
Real phonon_tail(const PhononTailParams& p, Real e) {
  const Real x = e - Real(p.E_i);
  if (!(x > 0)) return Real(0);
  const Real kt = Real(PhysicalConstants::k_B) * Real(p.T_eff);
  return Real(p.A) * std::sqrt(x) * std::exp(-x / kt);
}

/// Unit-sum Gaussian kernel sampled at multiples of `step`, truncated at
/// +-5 sigma. Returns {1} when sigma is zero or narrower than the grid.
template <class Real>
std::vector<Real> gaussian_kernel(double sigma, double step) {
  if (!(sigma > 0.0)) return {Real(1)};
  const auto half_width = static_cast<std::size_t>(std::floor(5.0 * sigma / step + 1e-9));
  std::vector<Real> k(2 * half_width + 1);
  Real total = 0;
  const Real s = Real(sigma);
  for (std::size_t j = 0; j < k.size(); ++j) {
    const Real x = (Real(j) - Real(half_width)) * Real(step);
    k[j] = std::exp(-(x * x) / (2 * s * s));
    total += k[j];
  }
  for (auto& w : k) w /= total;
  return k;
}

/// out[i] = sum_j kernel[j] in[i + j] where `in` is padded by
/// (kernel.size() - 1) / 2 samples on each side relative to `out`.
template <class Real>
void convolve_valid(std::span<const Real> in, std::span<const Real> kernel, std::span<Real> out) {
  const std::size_t kn = kernel.size();
  for (std::size_t i = 0; i < out.size(); ++i) {
    Real acc = 0;
    for (std::size_t j = 0; j < kn; ++j) acc += kernel[j] * in[i + j];
    out[i] = acc;
  }
}

}  // namespace rydspec::detail
