#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "rydspec/model.hpp"
#include "rydspec/spectrum.hpp"

namespace rydspec {

struct NoNoise {};
/// Additive Gaussian noise of standard deviation `std` (counts).
struct GaussianNoise {
  double std = 0.0;
};
/// Photon counting: counts = Poisson(scale * model) / scale.
struct PoissonNoise {
  double scale = 1.0;
};
using NoiseModel = std::variant<NoNoise, GaussianNoise, PoissonNoise>;

struct SynthSpec {
  CompositeModel truth;
  EnergyAxis axis;
  NoiseModel noise = NoNoise{};
  std::uint64_t seed = 0;
};

/// A generated spectrum together with the model that produced it.
struct SynthSpectrum {
  Spectrum spectrum;
  CompositeModel truth;
};

/// eval of the truth on the axis, then seeded noise. Negative model values
/// are clipped to zero before noise, and noisy counts are clipped at zero.
/// Identical spec and seed give bit-identical output.
SynthSpectrum generate(const SynthSpec& spec);

struct NormalDistribution {
  double mean = 0.0;
  double std = 0.0;
};

struct EnsembleSpec {
  std::size_t n_sites = 1;
  SynthSpec base;
  NormalDistribution T_eff{12.07, 0.0};   ///< K
  NormalDistribution size_um{2.8, 0.8};   ///< particle size, metadata only
  double redshift_per_kelvin = 0.0;       ///< eV/K applied to every line center
  double reference_T_eff = 12.07;         ///< K; temperature of the unshifted base
};

struct SiteSpectrum {
  std::string site_id;
  std::size_t index = 0;
  double T_eff = 0.0;
  double size_um = 0.0;
  Spectrum spectrum;
  CompositeModel truth;
};

/// One spectrum per site. Site k draws T_eff and size from an engine seeded
/// with seed ^ k, sets every phonon tail to that T_eff and shifts every
/// center by redshift_per_kelvin * (T_eff - reference_T_eff). Output is
/// ordered by site index.
std::vector<SiteSpectrum> generate_ensemble(const EnsembleSpec& spec);

/// Yellow np series with hydrogenic centers and linewidth-model widths;
/// each line's peak (at q = 0) equals `peak_counts`.
struct SeriesShape {
  double E_g = 2.17;
  double Ry = 0.098;
  double alpha = 3e-3;
  double beta = 2e-4;
  double peak_counts = 1e4;
  double q = 0.1;
};
std::vector<FanoLine> make_yellow_series(int n_first, int n_last, const SeriesShape& shape);

/// Tail scale A that puts the unconvolved maximum at `peak_counts`.
double tail_scale_for_peak(double T_eff, double peak_counts);

}  // namespace rydspec
