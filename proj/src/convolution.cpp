#include "rydspec/convolution.hpp"

#include <cmath>

#include "rydspec/detail/kernels.hpp"
#include "rydspec/error.hpp"

namespace rydspec {

void IRFParams::validate() const {
  if (!std::isfinite(sigma) || sigma < 0.0) {
    throw PreconditionError("IRF sigma must be finite and non-negative");
  }
}

std::vector<double> gaussian_kernel(double sigma, double step) {
  if (!(step > 0.0)) throw PreconditionError("kernel step must be positive");
  IRFParams{sigma}.validate();
  return detail::gaussian_kernel<double>(sigma, step);
}

Spectrum convolve_gaussian(const Spectrum& signal, const IRFParams& irf) {
  irf.validate();
  const auto& axis = signal.axis();
  if (!axis.is_uniform()) {
    throw PreconditionError("convolve_gaussian needs a uniform energy axis; call resample_uniform first");
  }
  if (irf.sigma == 0.0) return signal;

  const auto kernel = detail::gaussian_kernel<double>(irf.sigma, axis.spacing());
  const std::size_t pad = (kernel.size() - 1) / 2;
  const auto counts = signal.counts();
  std::vector<double> padded(counts.size() + 2 * pad, 0.0);
  std::copy(counts.begin(), counts.end(), padded.begin() + static_cast<std::ptrdiff_t>(pad));
  std::vector<double> out(counts.size());
  detail::convolve_valid<double>(padded, kernel, out);
  for (auto& v : out) v = std::max(v, 0.0);
  return Spectrum(axis, std::move(out), signal.weights());
}

}  // namespace rydspec
