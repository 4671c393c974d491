#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rydspec/batch.hpp"
#include "rydspec/synth.hpp"

namespace rydspec::cli {

/// Settings for the synth command. The model is assembled from explicit
/// components and/or a generated yellow series.
struct SynthSettings {
  CompositeModel model;
  std::optional<SeriesShape> series;  ///< lines for n in the config's n_range
  Window range{570.0, 580.0};         ///< nm
  std::size_t points = 2000;
  AxisUnit unit = AxisUnit::energy_eV;
  NoiseModel noise = NoNoise{};
  std::uint64_t seed = 0;

  // ensemble (n_sites > 0 switches to generate_ensemble)
  std::size_t n_sites = 0;
  NormalDistribution T_eff{12.07, 0.0};
  NormalDistribution size_um{2.8, 0.8};
  double redshift_per_kelvin = 0.0;
  double reference_T_eff = 12.07;
  std::vector<double> nominal_sizes{2.8};  ///< assigned round-robin
  std::vector<Shape> shapes{Shape::square};
};

/// key = value text file; '#' starts a comment. Unknown keys are rejected.
struct RunConfig {
  AnalysisConfig analysis;
  SynthSettings synth;
  BatchOptions batch;
  std::optional<std::size_t> threads;  ///< unset: hardware concurrency
  std::optional<std::string> out_dir;
  std::optional<std::string> reference_spectrum;
};

/// Throws ConfigError (line-numbered) for unknown keys or bad values.
RunConfig parse_run_config(std::istream& in);
RunConfig read_run_config(const std::filesystem::path& path);

/// Parses "lo hi" or "lo,hi" in nm.
Window parse_window(std::string_view text);

/// Model the synth command generates: explicit components plus the series.
CompositeModel synth_model(const RunConfig& cfg);

}  // namespace rydspec::cli
