#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "rydspec/batch.hpp"
#include "rydspec/least_squares.hpp"
#include "rydspec/model.hpp"

namespace rydspec::cli {

using nlohmann::json;

/// Model parameters at full precision (truth sidecars).
json model_to_json(const CompositeModel& m);
CompositeModel model_from_json(const json& j);

/// Convergence, parameters with uncertainties and flags of one fit.
json fit_to_json(const FitResult& r);
json site_fit_to_json(const SiteFit& fit);

/// Rounds every number in `j` to 9 significant digits, recursively.
json rounded(const json& j);

/// Rounded, indented JSON followed by a newline.
void write_json(const std::filesystem::path& path, const json& j);
/// Unrounded variant for data files.
void write_json_exact(const std::filesystem::path& path, const json& j);

/// Columns: energy, wavelength, data, total model, baseline, then one
/// column per component. The header line names the columns.
void write_plot_data(const std::filesystem::path& path, const Spectrum& data, const FitResult& fit);

/// aggregate.tsv, series_scaling.tsv, histograms.tsv,
/// reference_comparison.tsv, exclusions.tsv, sites.tsv and
/// batch_summary.json in `dir`.
void write_batch_reports(const std::filesystem::path& dir, const BatchResult& result, const std::string& notes = {});

}  // namespace rydspec::cli
