#include "rydspec/synth.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "rydspec/constants.hpp"
#include "rydspec/detail/evaluate.hpp"
#include "rydspec/error.hpp"
#include "rydspec/lineshapes.hpp"

namespace rydspec {

namespace {

void validate_noise(const NoiseModel& noise) {
  if (const auto* g = std::get_if<GaussianNoise>(&noise); g && !(g->std > 0.0)) {
    throw PreconditionError("Gaussian noise std must be positive");
  }
  if (const auto* p = std::get_if<PoissonNoise>(&noise); p && !(p->scale > 0.0)) {
    throw PreconditionError("Poisson noise scale must be positive");
  }
}

void shift_centers(CompositeModel& m, double delta) {
  for (auto& line : m.fano_lines) line.params.E_n += delta;
  for (auto& l : m.lorentz_lines) l.E_0 += delta;
  for (auto& t : m.phonon_tails) t.E_i += delta;
}

}  // namespace

SynthSpectrum generate(const SynthSpec& spec) {
  validate_noise(spec.noise);
  auto mean = evaluate(spec.truth, spec.axis);
  std::mt19937_64 rng(spec.seed);
  std::vector<double> counts(mean.size());
  std::visit(
      [&](const auto& noise) {
        using T = std::decay_t<decltype(noise)>;
        for (std::size_t i = 0; i < mean.size(); ++i) {
          const double mu = std::max(mean[i], 0.0);
          if constexpr (std::is_same_v<T, NoNoise>) {
            counts[i] = mu;
          } else if constexpr (std::is_same_v<T, GaussianNoise>) {
            std::normal_distribution<double> dist(0.0, noise.std);
            counts[i] = std::max(mu + dist(rng), 0.0);
          } else {
            std::poisson_distribution<long long> dist(mu * noise.scale);
            counts[i] = mu > 0.0 ? static_cast<double>(dist(rng)) / noise.scale : 0.0;
          }
        }
      },
      spec.noise);
  return {Spectrum(spec.axis, std::move(counts)), spec.truth};
}

std::vector<SiteSpectrum> generate_ensemble(const EnsembleSpec& spec) {
  if (spec.n_sites < 1) throw PreconditionError("ensemble needs at least one site");
  if (spec.T_eff.std < 0.0 || spec.size_um.std < 0.0) throw PreconditionError("distribution stds must be >= 0");
  validate_noise(spec.base.noise);
  const int width = std::max(3, static_cast<int>(std::to_string(spec.n_sites - 1).size()));

  std::vector<SiteSpectrum> sites;
  sites.reserve(spec.n_sites);
  for (std::size_t k = 0; k < spec.n_sites; ++k) {
    std::mt19937_64 rng(spec.base.seed ^ static_cast<std::uint64_t>(k));
    std::normal_distribution<double> unit(0.0, 1.0);
    const double z_t = unit(rng);
    const double z_size = unit(rng);
    const std::uint64_t noise_seed = rng();

    const double T = std::max(spec.T_eff.mean + spec.T_eff.std * z_t, 1.0);
    SynthSpec site = spec.base;
    site.seed = noise_seed;
    for (auto& t : site.truth.phonon_tails) t.T_eff = T;
    shift_centers(site.truth, spec.redshift_per_kelvin * (T - spec.reference_T_eff));

    auto generated = generate(site);
    sites.push_back({fmt::format("site_{:0{}}", k, width), k, T, spec.size_um.mean + spec.size_um.std * z_size,
                     std::move(generated.spectrum), std::move(generated.truth)});
  }
  return sites;
}

std::vector<FanoLine> make_yellow_series(int n_first, int n_last, const SeriesShape& shape) {
  std::vector<FanoLine> lines;
  for (int n = n_first; n <= n_last; ++n) {
    FanoParams p;
    p.E_n = rydberg_energy(n, shape.E_g, shape.Ry);
    p.Gamma_n = linewidth_scaling(n, shape.alpha, shape.beta);
    p.f_n = shape.peak_counts * p.Gamma_n / 2.0;
    p.q_n = shape.q;
    lines.push_back({n, p});
  }
  return lines;
}

double tail_scale_for_peak(double T_eff, double peak_counts) {
  const double kt = PhysicalConstants::k_B * T_eff;
  return peak_counts / (std::sqrt(0.5 * kt) * std::exp(-0.5));
}

}  // namespace rydspec
