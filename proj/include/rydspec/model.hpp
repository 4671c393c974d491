#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rydspec/convolution.hpp"
#include "rydspec/lineshapes.hpp"
#include "rydspec/spectrum.hpp"

namespace rydspec {

/// A Fano line, tagged with its principal quantum number when it belongs to
/// the yellow np series. Untagged lines model interlopers.
struct FanoLine {
  std::optional<int> n;
  FanoParams params;
};

/// Full forward model:
///   baseline + sum(Fano) + sum(Lorentzian) + IRF * sum(phonon tails).
/// Only the phonon tails are convolved with the instrument response.
struct CompositeModel {
  std::vector<FanoLine> fano_lines;
  std::vector<LorentzParams> lorentz_lines;
  std::vector<PhononTailParams> phonon_tails;
  IRFParams irf;
  double baseline = 0.0;

  std::size_t component_count() const noexcept {
    return fano_lines.size() + lorentz_lines.size() + phonon_tails.size();
  }

  /// Structural checks: at least one component, distinct tags >= 2,
  /// positive widths and temperatures, finite values, non-negative
  /// amplitudes and baseline.
  void validate_structure() const;

  /// validate_structure() plus strictly positive amplitudes.
  void validate() const;

  /// Tagged Fano line for quantum number n, or nullptr.
  const FanoLine* find_line(int n) const noexcept;
};

/// Raw model curve; may be negative where a Fano line dips below zero.
/// Requires a uniform axis when the IRF is active and tails are present.
std::vector<double> evaluate(const CompositeModel& m, const EnergyAxis& axis);

/// Model as a Spectrum. Throws DomainError if the model is negative anywhere
/// on the axis (a spectrum holds non-negative counts).
Spectrum eval_composite(const CompositeModel& m, const EnergyAxis& axis);

/// Named per-component curves, in model order, for plot output. Tails are
/// reported after convolution. The baseline is not included.
struct ComponentCurve {
  std::string name;
  std::vector<double> values;
};
std::vector<ComponentCurve> evaluate_components(const CompositeModel& m, const EnergyAxis& axis);

}  // namespace rydspec
