#include "rydspec/cli/spectrum_file.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>

#include <fmt/format.h>

#include "rydspec/error.hpp"

namespace rydspec::cli {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::optional<double> to_double(std::string_view s) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

}  // namespace

const char* unit_name(AxisUnit u) noexcept { return u == AxisUnit::wavelength_nm ? "nm" : "eV"; }

std::optional<AxisUnit> parse_unit(std::string_view s) noexcept {
  if (s == "nm") return AxisUnit::wavelength_nm;
  if (s == "eV") return AxisUnit::energy_eV;
  return std::nullopt;
}

std::string format_number(double v) { return fmt::format("{:.9g}", v); }

SpectrumFile parse_spectrum_file(std::istream& in) {
  SpectrumFile file;
  bool have_unit = false;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const std::string_view body = trim(line.substr(1));
      if (body.starts_with("unit=")) {
        const auto unit = parse_unit(trim(body.substr(5)));
        if (!unit) throw ParseError(fmt::format("unknown unit '{}' (expected nm or eV)", body.substr(5)), line_no);
        file.unit = *unit;
        have_unit = true;
      } else {
        file.comments.emplace_back(body);
      }
      continue;
    }
    if (!have_unit) throw ParseError("data before the '# unit=<nm|eV>' header", line_no);
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || line.find('\t', tab + 1) != std::string_view::npos) {
      throw ParseError("expected two tab-separated columns", line_no);
    }
    const auto x = to_double(line.substr(0, tab));
    const auto c = to_double(line.substr(tab + 1));
    if (!x || !c) throw ParseError("malformed number", line_no);
    if (!std::isfinite(*x) || *x <= 0.0) throw ParseError("axis value must be positive and finite", line_no);
    if (!std::isfinite(*c) || *c < 0.0) throw ParseError("counts must be non-negative and finite", line_no);
    if (file.axis.size() >= 2) {
      const bool rising = file.axis[1] > file.axis[0];
      const double prev = file.axis.back();
      if (rising ? !(*x > prev) : !(*x < prev)) throw ParseError("axis is not monotonic", line_no);
    } else if (file.axis.size() == 1 && *x == file.axis.back()) {
      throw ParseError("axis is not monotonic", line_no);
    }
    file.axis.push_back(*x);
    file.counts.push_back(*c);
  }
  if (!have_unit) throw ParseError("missing '# unit=<nm|eV>' header");
  if (file.axis.empty()) throw ParseError("no samples");
  if (file.axis.size() < 2) throw ParseError("need at least two samples");
  return file;
}

SpectrumFile read_spectrum_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  try {
    return parse_spectrum_file(in);
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()), e.line());
  }
}

void write_spectrum_file(std::ostream& out, const SpectrumFile& file) {
  out << "# unit=" << unit_name(file.unit) << '\n';
  for (const auto& c : file.comments) out << "# " << c << '\n';
  for (std::size_t i = 0; i < file.axis.size(); ++i) {
    out << fmt::format("{:.17g}\t{:.17g}\n", file.axis[i], file.counts[i]);
  }
}

void write_spectrum_file(const std::filesystem::path& path, const SpectrumFile& file) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  write_spectrum_file(out, file);
  if (!out) throw IoError(fmt::format("write failed for {}", path.string()));
}

namespace {

// Axis converted to `target` with counts, ascending in the new unit.
SpectrumFile reorder(AxisUnit target, std::vector<double> axis, std::vector<double> counts,
                     std::vector<std::string> comments) {
  std::vector<std::size_t> idx(axis.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return axis[a] < axis[b]; });
  SpectrumFile out;
  out.unit = target;
  out.comments = std::move(comments);
  for (std::size_t i : idx) {
    out.axis.push_back(axis[i]);
    out.counts.push_back(counts[i]);
  }
  return out;
}

}  // namespace

SpectrumFile convert(const SpectrumFile& file, AxisUnit target) {
  std::vector<double> axis = file.axis;
  if (file.unit != target) {
    for (auto& v : axis) v = target == AxisUnit::energy_eV ? nm_to_ev(v) : ev_to_nm(v);
  }
  return reorder(target, std::move(axis), file.counts, file.comments);
}

Spectrum to_spectrum(const SpectrumFile& file) {
  const auto ev = convert(file, AxisUnit::energy_eV);
  return Spectrum(EnergyAxis(ev.axis, file.unit), ev.counts);
}

SpectrumFile from_spectrum(const Spectrum& s, AxisUnit unit) {
  SpectrumFile f;
  f.unit = AxisUnit::energy_eV;
  f.axis.assign(s.axis().values().begin(), s.axis().values().end());
  f.counts.assign(s.counts().begin(), s.counts().end());
  return convert(f, unit);
}

}  // namespace rydspec::cli
