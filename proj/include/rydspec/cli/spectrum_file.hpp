#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rydspec/spectrum.hpp"

namespace rydspec::cli {

/// Two-column tab-delimited text: axis value, counts. A `# unit=<nm|eV>`
/// header line must precede the data; other lines starting with '#' are
/// comments.
struct SpectrumFile {
  AxisUnit unit = AxisUnit::energy_eV;
  std::vector<double> axis;
  std::vector<double> counts;
  std::vector<std::string> comments;  ///< without the leading '#', header excluded
};

/// Throws ParseError (with line number) on malformed lines, a missing unit
/// header, an empty data section, a non-monotonic axis or negative counts.
SpectrumFile parse_spectrum_file(std::istream& in);
SpectrumFile read_spectrum_file(const std::filesystem::path& path);

/// Numbers are written with 17 significant digits so files round-trip.
void write_spectrum_file(std::ostream& out, const SpectrumFile& file);
void write_spectrum_file(const std::filesystem::path& path, const SpectrumFile& file);

/// Energy spectrum, ascending in eV, whatever the file's unit.
Spectrum to_spectrum(const SpectrumFile& file);

/// File in `unit`, sorted ascending in that unit.
SpectrumFile from_spectrum(const Spectrum& s, AxisUnit unit);

/// Converts the axis to `target`, re-sorted ascending; counts follow.
SpectrumFile convert(const SpectrumFile& file, AxisUnit target);

const char* unit_name(AxisUnit u) noexcept;
std::optional<AxisUnit> parse_unit(std::string_view s) noexcept;

/// Fixed 9-significant-digit text used in every report.
std::string format_number(double v);

}  // namespace rydspec::cli
