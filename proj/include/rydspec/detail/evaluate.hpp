#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "rydspec/detail/kernels.hpp"
#include "rydspec/error.hpp"
#include "rydspec/model.hpp"

namespace rydspec::detail {

/// Sum of the phonon tails convolved with the IRF, sampled on `axis`. The
/// tails are evaluated on a grid extended by the kernel half-width so the
/// result has no edge droop.
template <class Real>
void add_convolved_tails(const CompositeModel& m, const EnergyAxis& axis, std::span<Real> out) {
  if (m.phonon_tails.empty()) return;
  const std::size_t n = axis.size();
  if (!(m.irf.sigma > 0.0)) {
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto& t : m.phonon_tails) out[i] += phonon_tail<Real>(t, Real(axis[i]));
    }
    return;
  }
  if (!axis.is_uniform()) {
    throw PreconditionError("IRF convolution needs a uniform energy axis; call resample_uniform first");
  }
  const double step = axis.spacing();
  const auto kernel = gaussian_kernel<Real>(m.irf.sigma, step);
  const std::size_t pad = (kernel.size() - 1) / 2;
  std::vector<Real> raw(n + 2 * pad, Real(0));
  for (std::size_t i = 0; i < raw.size(); ++i) {
    Real e;
    if (i < pad) {
      e = Real(axis.front()) - Real(pad - i) * Real(step);
    } else if (i >= pad + n) {
      e = Real(axis.back()) + Real(i - pad - n + 1) * Real(step);
    } else {
      e = Real(axis[i - pad]);
    }
    for (const auto& t : m.phonon_tails) raw[i] += phonon_tail<Real>(t, e);
  }
  std::vector<Real> conv(n);
  convolve_valid<Real>(raw, kernel, conv);
  for (std::size_t i = 0; i < n; ++i) out[i] += conv[i];
}

template <class Real>
std::vector<Real> evaluate_model(const CompositeModel& m, const EnergyAxis& axis) {
  const std::size_t n = axis.size();
  std::vector<Real> out(n, Real(m.baseline));
  for (const auto& line : m.fano_lines) {
    for (std::size_t i = 0; i < n; ++i) out[i] += fano<Real>(line.params, Real(axis[i]));
  }
  for (const auto& line : m.lorentz_lines) {
    for (std::size_t i = 0; i < n; ++i) out[i] += lorentzian<Real>(line, Real(axis[i]));
  }
  add_convolved_tails<Real>(m, axis, out);
  return out;
}

}  // namespace rydspec::detail
