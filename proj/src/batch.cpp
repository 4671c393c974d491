#include "rydspec/batch.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "rydspec/error.hpp"

namespace rydspec {

const char* to_string(Shape s) noexcept { return s == Shape::square ? "square" : "circle"; }

const char* to_string(Quantity q) noexcept {
  switch (q) {
    case Quantity::E_1s: return "E_1s";
    case Quantity::Gamma_1s: return "Gamma_1s";
    case Quantity::T_eff: return "T_eff";
    case Quantity::E_np: return "E_np";
    case Quantity::Gamma_np: return "Gamma_np";
  }
  return "unknown";
}

std::optional<Shape> parse_shape(std::string_view s) noexcept {
  if (s == "square") return Shape::square;
  if (s == "circle") return Shape::circle;
  return std::nullopt;
}

bool is_energy(Quantity q) noexcept { return q == Quantity::E_1s || q == Quantity::E_np; }

std::vector<std::pair<int, double>> quantity_values(const SiteFit& fit, Quantity q) {
  std::vector<std::pair<int, double>> out;
  switch (q) {
    case Quantity::E_1s:
    case Quantity::Gamma_1s:
      if (fit.phonon && !fit.phonon->params.lorentz_lines.empty()) {
        const auto& l = fit.phonon->params.lorentz_lines.front();
        out.emplace_back(0, q == Quantity::E_1s ? l.E_0 : l.Gamma);
      }
      break;
    case Quantity::T_eff:
      if (fit.phonon && !fit.phonon->params.phonon_tails.empty()) out.emplace_back(0, fit.phonon->T_eff());
      break;
    case Quantity::E_np:
    case Quantity::Gamma_np:
      if (fit.series) {
        for (const auto& line : fit.series->params.fano_lines) {
          if (line.n) out.emplace_back(*line.n, q == Quantity::E_np ? line.params.E_n : line.params.Gamma_n);
        }
      }
      break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

AggregateRow summarize(std::vector<double> values) {
  if (values.empty()) throw PreconditionError("cannot summarize an empty group");
  std::sort(values.begin(), values.end());
  const double origin = values.front();
  const auto count = static_cast<double>(values.size());
  double acc = 0.0;
  for (double v : values) acc += v - origin;
  const double mean = origin + acc / count;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  AggregateRow row;
  row.mean = mean;
  row.std = values.size() > 1 ? std::sqrt(ss / (count - 1.0)) : 0.0;
  row.count = values.size();
  return row;
}

Aggregation aggregate(std::span<const SiteRecord> records, Quantity quantity) {
  std::map<std::pair<double, int>, std::vector<double>> groups;
  Aggregation out;
  for (const auto& rec : records) {
    if (!rec.fit) {
      out.excluded.push_back({rec.site_id, rec.failure.empty() ? "not fitted" : rec.failure});
      continue;
    }
    const auto values = quantity_values(*rec.fit, quantity);
    if (values.empty()) {
      out.excluded.push_back({rec.site_id, fmt::format("{} not available from fit", to_string(quantity))});
      continue;
    }
    for (const auto& [n, v] : values) groups[{rec.nominal_size, n}].push_back(v);
  }
  for (auto& [key, values] : groups) {
    AggregateRow row = summarize(std::move(values));
    row.key = {key.first, quantity, key.second};
    out.rows.push_back(row);
  }
  std::sort(out.excluded.begin(), out.excluded.end(),
            [](const Exclusion& a, const Exclusion& b) { return a.site_id < b.site_id; });
  return out;
}

std::vector<ShiftEntry> compare_to_reference(std::span<const AggregateRow> rows, const SiteFit& reference) {
  std::vector<ShiftEntry> out;
  for (const auto& row : rows) {
    ShiftEntry e;
    e.key = row.key;
    e.group_mean = row.mean;
    for (const auto& [n, v] : quantity_values(reference, row.key.quantity)) {
      if (n == row.key.n) e.reference = v;
    }
    if (!e.reference) {
      e.label = "gap";
    } else {
      e.delta = row.mean - *e.reference;
      const bool energy = is_energy(row.key.quantity);
      if (*e.delta < 0.0) e.label = energy ? "redshift" : "decrease";
      else if (*e.delta > 0.0) e.label = energy ? "blueshift" : "increase";
      else e.label = "none";
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<HistogramBin> histogram(std::span<const double> values, double bin_width) {
  if (!(bin_width > 0.0)) throw PreconditionError("histogram bin width must be positive");
  if (values.empty()) throw PreconditionError("histogram needs at least one value");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double anchor = std::floor(*lo_it / bin_width) * bin_width;
  auto index = [&](double v) {
    auto k = static_cast<long long>(std::floor((v - anchor) / bin_width));
    // Guard against rounding across a bin edge.
    while (k > 0 && v < anchor + static_cast<double>(k) * bin_width) --k;
    while (v >= anchor + static_cast<double>(k + 1) * bin_width) ++k;
    return static_cast<std::size_t>(std::max(k, 0LL));
  };
  std::vector<HistogramBin> bins(index(*hi_it) + 1);
  for (std::size_t k = 0; k < bins.size(); ++k) {
    bins[k].lower = anchor + static_cast<double>(k) * bin_width;
    bins[k].upper = anchor + static_cast<double>(k + 1) * bin_width;
  }
  for (double v : values) ++bins[index(v)].count;
  return bins;
}

Spectrum window_spectrum(const Spectrum& s, const Window& w, std::string_view name) {
  if (!(w.lo_nm > 0.0) || !(w.hi_nm > w.lo_nm)) {
    throw PreconditionError(fmt::format("{} window {}-{} nm is not a valid range", name, w.lo_nm, w.hi_nm));
  }
  const double lo = nm_to_ev(w.hi_nm);
  const double hi = nm_to_ev(w.lo_nm);
  const auto& axis = s.axis();
  if (lo < axis.front() || hi > axis.back()) {
    throw PreconditionError(fmt::format("{} window {}-{} nm lies outside the data span {:.4f}-{:.4f} nm", name,
                                        w.lo_nm, w.hi_nm, ev_to_nm(axis.back()), ev_to_nm(axis.front())));
  }
  const Spectrum cut = crop(s, lo, hi);
  return resample_uniform(cut, cut.size());
}

SiteFit analyze_spectrum(const Spectrum& s, const AnalysisConfig& cfg) {
  SiteFit fit;
  if (cfg.series_window) {
    fit.series = fit_yellow_series(window_spectrum(s, *cfg.series_window, "series"), cfg.n_range, cfg.fit, cfg.prior);
  }
  if (cfg.phonon_window) {
    fit.phonon = fit_phonon_temperature(window_spectrum(s, *cfg.phonon_window, "phonon"), cfg.fit, cfg.phonon);
  }
  return fit;
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

std::size_t BatchResult::fitted_count() const {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const SiteRecord& r) { return r.fit.has_value(); }));
}

namespace {

std::vector<SeriesPoint> series_points(std::span<const SiteRecord> records, Quantity q) {
  std::map<int, std::vector<double>> by_n;
  for (const auto& rec : records) {
    if (!rec.fit) continue;
    for (const auto& [n, v] : quantity_values(*rec.fit, q)) by_n[n].push_back(v);
  }
  std::vector<SeriesPoint> pts;
  for (auto& [n, values] : by_n) {
    const auto row = summarize(std::move(values));
    const double sem = row.count > 1 ? row.std / std::sqrt(static_cast<double>(row.count)) : 0.0;
    pts.push_back({n, row.mean, sem});
  }
  return pts;
}

}  // namespace

BatchResult run_batch(std::vector<SiteRecord> records, const SpectrumLoader& load, const AnalysisConfig& cfg,
                      std::optional<SiteFit> reference, const BatchOptions& options) {
  std::sort(records.begin(), records.end(),
            [](const SiteRecord& a, const SiteRecord& b) { return a.site_id < b.site_id; });
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.site_id).second) throw PreconditionError(fmt::format("duplicate site_id '{}'", r.site_id));
  }

  parallel_for(records.size(), options.threads, [&](std::size_t i) {
    auto& rec = records[i];
    try {
      rec.fit = analyze_spectrum(load(rec.spectrum_path), cfg);
    } catch (const std::exception& e) {
      rec.fit.reset();
      rec.failure = e.what();
    }
  });

  BatchResult out;
  out.records = std::move(records);
  out.reference = std::move(reference);
  for (Quantity q : {Quantity::E_1s, Quantity::Gamma_1s, Quantity::T_eff, Quantity::E_np, Quantity::Gamma_np}) {
    auto agg = aggregate(out.records, q);
    const bool available = !agg.rows.empty();
    if (available && out.reference) {
      auto shifts = compare_to_reference(agg.rows, *out.reference);
      out.shifts.insert(out.shifts.end(), shifts.begin(), shifts.end());
    }
    if (available) out.aggregates.emplace(q, std::move(agg));
  }

  if (cfg.series_window) {
    try {
      const auto energies = series_points(out.records, Quantity::E_np);
      const auto widths = series_points(out.records, Quantity::Gamma_np);
      out.scaling = fit_series_scaling(energies, widths);
    } catch (const std::exception& e) {
      out.scaling_error = e.what();
    }
  }

  auto add_histograms = [&](Quantity q, double bin) {
    std::map<int, std::vector<double>> by_n;
    for (const auto& rec : out.records) {
      if (!rec.fit) continue;
      for (const auto& [n, v] : quantity_values(*rec.fit, q)) by_n[n].push_back(v);
    }
    for (const auto& [n, values] : by_n) out.histograms.push_back({q, n, histogram(values, bin)});
  };
  add_histograms(Quantity::E_np, options.energy_bin);
  add_histograms(Quantity::Gamma_np, options.linewidth_bin);
  add_histograms(Quantity::E_1s, options.energy_bin);
  add_histograms(Quantity::Gamma_1s, options.linewidth_bin);
  add_histograms(Quantity::T_eff, options.temperature_bin);
  return out;
}

}  // namespace rydspec
