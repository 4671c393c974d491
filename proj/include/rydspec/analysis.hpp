#pragma once

#include <map>
#include <optional>
#include <span>

#include "rydspec/least_squares.hpp"
#include "rydspec/spectrum.hpp"

namespace rydspec {

/// Hydrogenic expectations used to seed and tag the np series.
struct SeriesPrior {
  double E_g = 2.17;     ///< band gap, eV
  double Ry = 0.098;     ///< effective Rydberg energy, eV
  double alpha = 1e-3;   ///< linewidth model seed, eV
  double beta = 1e-4;    ///< linewidth plateau seed, eV
};

/// Inclusive range of principal quantum numbers.
struct QuantumRange {
  int first = 2;
  int last = 5;
};

/// One Fano line per n in `n_range` plus a constant baseline, seeded by
/// detect_peaks and matched to hydrogenic predictions by nearest center
/// (ties go to the lower n). Values of n with no matching peak start at
/// the prediction with the prior linewidth. With cfg.extra_lines, peaks
/// left unassigned become untagged lines. The highest-n linewidth is
/// flagged when its center lies within 3 Gamma of E_g or of the next
/// predicted level.
FitResult fit_yellow_series(const Spectrum& data, QuantumRange n_range, const FitConfig& cfg,
                            const SeriesPrior& prior = {});

struct PhononFitOptions {
  bool include_1s_line = false;      ///< add a Lorentzian for the sharp 1s line
  std::optional<double> fixed_sigma;  ///< hold the IRF width at this value, eV
  double sigma_guess = 1e-4;          ///< starting IRF width when free, eV
};

/// Phonon tail convolved with the IRF, an optional 1s Lorentzian and a
/// constant baseline. T_eff is bounded to [1 K, 400 K]. Throws
/// InitializationError when every count is below three times the
/// baseline estimate (the window misses the tail onset).
FitResult fit_phonon_temperature(const Spectrum& data, const FitConfig& cfg, const PhononFitOptions& options = {});

/// A per-n measurement with its one-sigma uncertainty.
struct SeriesPoint {
  int n = 0;
  double value = 0.0;
  double uncertainty = 0.0;
};

struct LinewidthScalingFit {
  double alpha = 0.0;
  double beta = 0.0;
  std::optional<double> alpha_uncertainty;
  std::optional<double> beta_uncertainty;
  double cost = 0.0;
};

/// Weighted linear least squares of Gamma_n = alpha (n^2-1)/n^5 + beta with
/// alpha, beta >= 0. Weights are 1/uncertainty^2; if any uncertainty is
/// not positive, all points are weighted equally.
LinewidthScalingFit fit_linewidth_scaling(std::span<const SeriesPoint> linewidths);

struct SeriesScaling {
  double E_g = 0.0;
  double Ry = 0.0;
  std::map<int, double> defects;  ///< per-n quantum defect; only n = 2 is fitted
  bool defect_fitted = false;
  double alpha = 0.0;
  double beta = 0.0;
  struct Uncertainties {
    std::optional<double> E_g, Ry, delta_2, alpha, beta;
  } uncertainties;
  double energy_cost = 0.0;
  double linewidth_cost = 0.0;
};

/// Second-stage fits across n: E_n = E_g - Ry / (n - delta_n)^2 with the
/// defect free only for n = 2, and the linewidth model above. Each
/// sub-fit needs at least three distinct n (PreconditionError otherwise).
SeriesScaling fit_series_scaling(std::span<const SeriesPoint> energies, std::span<const SeriesPoint> linewidths);

}  // namespace rydspec
