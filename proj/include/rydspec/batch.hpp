#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rydspec/analysis.hpp"
#include "rydspec/least_squares.hpp"
#include "rydspec/spectrum.hpp"

namespace rydspec {

enum class Shape { square, circle };
enum class Quantity { E_1s, Gamma_1s, T_eff, E_np, Gamma_np };

const char* to_string(Shape s) noexcept;
const char* to_string(Quantity q) noexcept;
std::optional<Shape> parse_shape(std::string_view s) noexcept;
bool is_energy(Quantity q) noexcept;

/// Fits of one site: the np series window and the phonon + 1s window.
struct SiteFit {
  std::optional<FitResult> series;
  std::optional<FitResult> phonon;
};

struct SiteRecord {
  std::string site_id;
  double nominal_size = 0.0;  ///< um; grouping key
  Shape shape = Shape::square;
  std::string spectrum_path;
  std::optional<SiteFit> fit;
  std::string failure;  ///< why `fit` is empty
};

/// (n, value) pairs of a quantity; n is 0 for the 1s and phonon quantities.
std::vector<std::pair<int, double>> quantity_values(const SiteFit& fit, Quantity q);

struct GroupKey {
  double nominal_size = 0.0;
  Quantity quantity = Quantity::E_np;
  int n = 0;
};

struct AggregateRow {
  GroupKey key;
  double mean = 0.0;
  double std = 0.0;  ///< sample standard deviation (count - 1), 0 for a single value
  std::size_t count = 0;
};

struct Exclusion {
  std::string site_id;
  std::string reason;
};

struct Aggregation {
  std::vector<AggregateRow> rows;  ///< sorted by nominal size, then n
  std::vector<Exclusion> excluded;
};

/// Mean and sample std of `values`. Values are summed in sorted order so
/// the result does not depend on input ordering.
AggregateRow summarize(std::vector<double> values);

/// Per-(nominal size, n) statistics of a quantity over fitted records.
/// Records without a fit, or without the quantity, are reported in
/// `excluded` rather than dropped silently.
Aggregation aggregate(std::span<const SiteRecord> records, Quantity quantity);

struct ShiftEntry {
  GroupKey key;
  double group_mean = 0.0;
  std::optional<double> reference;  ///< absent: gap entry
  std::optional<double> delta;      ///< group_mean - reference
  std::string label;                ///< redshift/blueshift/none, increase/decrease/none, or gap
};

/// Difference of each group mean from the matching quantity of a
/// reference (thin-film) fit.
std::vector<ShiftEntry> compare_to_reference(std::span<const AggregateRow> rows, const SiteFit& reference);

struct HistogramBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
};

/// Left-closed bins of width `bin_width` anchored at
/// floor(min / bin_width) * bin_width. Counts sum to values.size().
std::vector<HistogramBin> histogram(std::span<const double> values, double bin_width);

/// Wavelength window in nm.
struct Window {
  double lo_nm = 0.0;
  double hi_nm = 0.0;
};

struct AnalysisConfig {
  std::optional<Window> series_window;
  std::optional<Window> phonon_window;
  QuantumRange n_range;
  FitConfig fit;
  SeriesPrior prior;
  PhononFitOptions phonon;
};

/// Cuts a wavelength window out of an energy spectrum and resamples it
/// onto a uniform grid with the same number of samples. Throws
/// PreconditionError naming the window when it is outside the data span.
Spectrum window_spectrum(const Spectrum& s, const Window& w, std::string_view name);

/// Runs the configured window fits on one spectrum.
SiteFit analyze_spectrum(const Spectrum& s, const AnalysisConfig& cfg);

struct BatchOptions {
  std::size_t threads = 1;
  double energy_bin = 5e-5;       ///< eV
  double linewidth_bin = 2e-5;    ///< eV
  double temperature_bin = 1.0;   ///< K
};

struct NamedHistogram {
  Quantity quantity;
  int n = 0;
  std::vector<HistogramBin> bins;
};

struct BatchResult {
  std::vector<SiteRecord> records;  ///< sorted by site_id
  std::map<Quantity, Aggregation> aggregates;
  std::optional<SeriesScaling> scaling;
  std::string scaling_error;
  std::vector<NamedHistogram> histograms;
  std::optional<SiteFit> reference;
  std::vector<ShiftEntry> shifts;

  std::size_t fitted_count() const;
};

using SpectrumLoader = std::function<Spectrum(const std::string& path)>;

/// Loads and fits every site (concurrently, up to options.threads), then
/// aggregates after a deterministic join. Sites whose spectrum cannot be
/// loaded or fitted keep an empty fit and a failure reason.
BatchResult run_batch(std::vector<SiteRecord> records, const SpectrumLoader& load, const AnalysisConfig& cfg,
                      std::optional<SiteFit> reference, const BatchOptions& options);

/// Calls fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace rydspec
