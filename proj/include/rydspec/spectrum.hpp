#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace rydspec {

enum class AxisUnit { wavelength_nm, energy_eV };

/// Photon energy (eV) of a vacuum wavelength (nm). Throws DomainError for
/// non-positive or non-finite input.
double nm_to_ev(double wavelength_nm);
double ev_to_nm(double energy_ev);

/// Strictly increasing photon-energy grid in eV. `origin_unit` records how
/// the samples were acquired; values are always stored in eV.
class EnergyAxis {
 public:
  explicit EnergyAxis(std::vector<double> values, AxisUnit origin_unit = AxisUnit::energy_eV);

  /// `n` points from `lo` to `hi` inclusive; both endpoints are exact.
  static EnergyAxis uniform(double lo, double hi, std::size_t n, AxisUnit origin_unit = AxisUnit::energy_eV);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double front() const noexcept { return values_.front(); }
  double back() const noexcept { return values_.back(); }
  AxisUnit origin_unit() const noexcept { return origin_unit_; }

  /// Mean spacing (back - front) / (size - 1).
  double spacing() const noexcept;

  /// True when every step is within `rel_tol` of the mean spacing.
  bool is_uniform(double rel_tol = 1e-6) const noexcept;

 private:
  std::vector<double> values_;
  AxisUnit origin_unit_;
};

/// Sampled intensity on an energy axis, with optional statistical weights.
class Spectrum {
 public:
  Spectrum(EnergyAxis axis, std::vector<double> counts, std::optional<std::vector<double>> weights = std::nullopt);

  const EnergyAxis& axis() const noexcept { return axis_; }
  std::span<const double> counts() const noexcept { return counts_; }
  const std::optional<std::vector<double>>& weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return counts_.size(); }

 private:
  EnergyAxis axis_;
  std::vector<double> counts_;
  std::optional<std::vector<double>> weights_;
};

/// Linear interpolation onto `n_points` uniformly spaced energies spanning
/// the input axis. Endpoints are preserved exactly.
Spectrum resample_uniform(const Spectrum& s, std::size_t n_points);

/// Samples with lo <= E <= hi. Throws PreconditionError if fewer than two
/// samples fall inside.
Spectrum crop(const Spectrum& s, double lo_ev, double hi_ev);

}  // namespace rydspec
