#include "rydspec/spectrum.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "rydspec/constants.hpp"
#include "rydspec/error.hpp"

namespace rydspec {

double nm_to_ev(double wavelength_nm) {
  if (!std::isfinite(wavelength_nm) || wavelength_nm <= 0.0) {
    throw DomainError(fmt::format("wavelength must be positive and finite, got {}", wavelength_nm));
  }
  return PhysicalConstants::hc / wavelength_nm;
}

double ev_to_nm(double energy_ev) {
  if (!std::isfinite(energy_ev) || energy_ev <= 0.0) {
    throw DomainError(fmt::format("energy must be positive and finite, got {}", energy_ev));
  }
  return PhysicalConstants::hc / energy_ev;
}

EnergyAxis::EnergyAxis(std::vector<double> values, AxisUnit origin_unit)
    : values_(std::move(values)), origin_unit_(origin_unit) {
  if (values_.size() < 2) {
    throw PreconditionError("energy axis needs at least two samples");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double v = values_[i];
    if (!std::isfinite(v) || v <= 0.0) {
      throw PreconditionError(fmt::format("energy axis value {} at index {} is not finite and positive", v, i));
    }
    if (i > 0 && !(v > values_[i - 1])) {
      throw PreconditionError(fmt::format("energy axis is not strictly increasing at index {}", i));
    }
  }
}

EnergyAxis EnergyAxis::uniform(double lo, double hi, std::size_t n, AxisUnit origin_unit) {
  if (n < 2) throw PreconditionError("uniform axis needs at least two points");
  if (!(hi > lo)) throw PreconditionError("uniform axis needs hi > lo");
  std::vector<double> v(n);
  const double span = hi - lo;
  const auto last = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = lo + span * (static_cast<double>(i) / last);
  }
  v.front() = lo;
  v.back() = hi;
  return EnergyAxis(std::move(v), origin_unit);
}

double EnergyAxis::spacing() const noexcept {
  return (values_.back() - values_.front()) / static_cast<double>(values_.size() - 1);
}

bool EnergyAxis::is_uniform(double rel_tol) const noexcept {
  const double h = spacing();
  for (std::size_t i = 1; i < values_.size(); ++i) {
    if (std::abs((values_[i] - values_[i - 1]) - h) > rel_tol * h) return false;
  }
  return true;
}

Spectrum::Spectrum(EnergyAxis axis, std::vector<double> counts, std::optional<std::vector<double>> weights)
    : axis_(std::move(axis)), counts_(std::move(counts)), weights_(std::move(weights)) {
  if (counts_.size() != axis_.size()) {
    throw PreconditionError(fmt::format("spectrum has {} counts for {} axis samples", counts_.size(), axis_.size()));
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    if (!std::isfinite(counts_[i]) || counts_[i] < 0.0) {
      throw PreconditionError(fmt::format("count {} at index {} is negative or not finite", counts_[i], i));
    }
  }
  if (weights_) {
    if (weights_->size() != axis_.size()) {
      throw PreconditionError("weights length differs from axis length");
    }
    for (std::size_t i = 0; i < weights_->size(); ++i) {
      const double w = (*weights_)[i];
      if (!std::isfinite(w) || w <= 0.0) {
        throw PreconditionError(fmt::format("weight {} at index {} is not finite and positive", w, i));
      }
    }
  }
}

namespace {

// Linear interpolation of `y` sampled at increasing `x`, evaluated at `at`
// (which must lie inside [x.front(), x.back()]).
double interpolate(std::span<const double> x, std::span<const double> y, double at) {
  auto it = std::lower_bound(x.begin(), x.end(), at);
  auto j = static_cast<std::size_t>(it - x.begin());
  if (j < x.size() && x[j] == at) return y[j];
  if (j == 0) return y.front();
  if (j >= x.size()) return y.back();
  const double t = (at - x[j - 1]) / (x[j] - x[j - 1]);
  return y[j - 1] + t * (y[j] - y[j - 1]);
}

}  // namespace

Spectrum resample_uniform(const Spectrum& s, std::size_t n_points) {
  if (n_points < 2) throw PreconditionError("resample_uniform needs n_points >= 2");
  const auto& axis = s.axis();
  EnergyAxis grid = EnergyAxis::uniform(axis.front(), axis.back(), n_points, axis.origin_unit());
  std::vector<double> counts(n_points);
  std::optional<std::vector<double>> weights;
  if (s.weights()) weights.emplace(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    counts[i] = std::max(0.0, interpolate(axis.values(), s.counts(), grid[i]));
    if (weights) (*weights)[i] = interpolate(axis.values(), *s.weights(), grid[i]);
  }
  return Spectrum(std::move(grid), std::move(counts), std::move(weights));
}

Spectrum crop(const Spectrum& s, double lo_ev, double hi_ev) {
  const auto e = s.axis().values();
  std::vector<double> axis;
  std::vector<double> counts;
  std::optional<std::vector<double>> weights;
  if (s.weights()) weights.emplace();
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (e[i] < lo_ev || e[i] > hi_ev) continue;
    axis.push_back(e[i]);
    counts.push_back(s.counts()[i]);
    if (weights) weights->push_back((*s.weights())[i]);
  }
  if (axis.size() < 2) {
    throw PreconditionError(fmt::format("window [{}, {}] eV contains fewer than two samples", lo_ev, hi_ev));
  }
  return Spectrum(EnergyAxis(std::move(axis), s.axis().origin_unit()), std::move(counts), std::move(weights));
}

}  // namespace rydspec
