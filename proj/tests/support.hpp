#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "rydspec/analysis.hpp"
#include "rydspec/model.hpp"
#include "rydspec/spectrum.hpp"
#include "rydspec/synth.hpp"

namespace testing {

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// The yellow np window (570-580 nm) on a uniform energy grid.
inline rydspec::EnergyAxis series_axis(std::size_t n = 2000) {
  return rydspec::EnergyAxis::uniform(rydspec::nm_to_ev(580.0), rydspec::nm_to_ev(570.0), n,
                                      rydspec::AxisUnit::wavelength_nm);
}

// Phonon window (600-625 nm).
inline rydspec::EnergyAxis phonon_axis(std::size_t n = 2000) {
  return rydspec::EnergyAxis::uniform(rydspec::nm_to_ev(625.0), rydspec::nm_to_ev(600.0), n,
                                      rydspec::AxisUnit::wavelength_nm);
}

// 2p-5p with peak counts 1e4 over a baseline at 5% of the peak.
inline rydspec::CompositeModel series_truth(const rydspec::SeriesShape& shape = {}) {
  rydspec::CompositeModel m;
  m.fano_lines = rydspec::make_yellow_series(2, 5, shape);
  m.baseline = 0.05 * shape.peak_counts;
  return m;
}

inline rydspec::CompositeModel tail_truth(double T_eff, double sigma = 1e-4, bool with_1s = false) {
  rydspec::CompositeModel m;
  m.phonon_tails.push_back({2.0195, T_eff, rydspec::tail_scale_for_peak(T_eff, 1e4)});
  if (with_1s) m.lorentz_lines.push_back({2.0330, 1e-4, 2e4});
  m.irf.sigma = sigma;
  m.baseline = 300.0;
  return m;
}

inline rydspec::Spectrum noisy(const rydspec::CompositeModel& truth, const rydspec::EnergyAxis& axis,
                               std::uint64_t seed) {
  return rydspec::generate({truth, axis, rydspec::PoissonNoise{1.0}, seed}).spectrum;
}

}  // namespace testing
