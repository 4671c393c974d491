#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rydspec/model.hpp"

namespace rydspec {

enum class ParamKind { center, width, scale, asymmetry, onset, temperature, irf_sigma, baseline };

struct Bound {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

struct ParameterInfo {
  std::string name;
  ParamKind kind;
  Bound bound;  ///< physical default bound
  /// Index of the width-like parameter that sets the natural scale of a
  /// center or onset (the line's Gamma, or the tail's T_eff).
  std::optional<std::size_t> scale_partner;
};

/// Flat view of a CompositeModel's parameters.
///
/// Order: per Fano line (E, Gamma, f, q), per Lorentzian (E0, Gamma,
/// amplitude), per tail (E_i, T_eff, A), then irf.sigma and baseline.
/// Names look like "fano3.E", "extra1.Gamma" (second untagged line),
/// "lorentz0.amplitude", "tail0.T_eff", "irf.sigma", "baseline".
class ParameterLayout {
 public:
  explicit ParameterLayout(CompositeModel shape);

  std::size_t size() const noexcept { return info_.size(); }
  const ParameterInfo& info(std::size_t i) const { return info_.at(i); }
  std::span<const ParameterInfo> infos() const noexcept { return info_; }
  std::optional<std::size_t> index_of(std::string_view name) const;

  std::vector<double> pack(const CompositeModel& m) const;
  CompositeModel unpack(std::span<const double> x) const;

  /// Natural magnitude of each parameter at `x`, used to size finite
  /// difference steps: centers scale with their line width (onsets with
  /// k_B T_eff), other parameters with their own magnitude.
  std::vector<double> natural_scales(std::span<const double> x) const;

 private:
  CompositeModel shape_;
  std::vector<ParameterInfo> info_;
};

}  // namespace rydspec
