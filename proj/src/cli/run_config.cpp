#include "rydspec/cli/run_config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "rydspec/error.hpp"

namespace rydspec::cli {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string> tokens(std::string_view s) {
  std::string copy(s);
  for (char& c : copy) {
    if (c == ',') c = ' ';
  }
  std::istringstream in(copy);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

double number(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ConfigError(fmt::format("'{}' is not a finite number", s));
  }
  return v;
}

long long integer(std::string_view s) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError(fmt::format("'{}' is not an integer", s));
  return v;
}

std::vector<double> numbers(std::string_view value, std::size_t expected) {
  const auto t = tokens(value);
  if (expected != 0 && t.size() != expected) {
    throw ConfigError(fmt::format("expected {} values, got {}", expected, t.size()));
  }
  std::vector<double> out;
  for (const auto& s : t) out.push_back(number(s));
  return out;
}

double single(std::string_view value) { return numbers(value, 1)[0]; }

double positive(std::string_view value) {
  const double v = single(value);
  if (!(v > 0.0)) throw ConfigError("value must be positive");
  return v;
}

double non_negative(std::string_view value) {
  const double v = single(value);
  if (v < 0.0) throw ConfigError("value must be non-negative");
  return v;
}

std::size_t count(std::string_view value) {
  const auto t = tokens(value);
  if (t.size() != 1) throw ConfigError("expected one integer");
  const long long v = integer(t[0]);
  if (v < 0) throw ConfigError("value must be non-negative");
  return static_cast<std::size_t>(v);
}

bool boolean(std::string_view value) {
  const auto v = trim(value);
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ConfigError(fmt::format("'{}' is not a boolean", v));
}

using Handler = std::function<void(RunConfig&, std::string_view)>;

const std::map<std::string, Handler, std::less<>>& handlers() {
  static const std::map<std::string, Handler, std::less<>> table = {
      {"out_dir", [](RunConfig& c, std::string_view v) { c.out_dir = std::string(trim(v)); }},
      {"reference_spectrum", [](RunConfig& c, std::string_view v) { c.reference_spectrum = std::string(trim(v)); }},
      {"series_window_nm", [](RunConfig& c, std::string_view v) { c.analysis.series_window = parse_window(v); }},
      {"phonon_window_nm", [](RunConfig& c, std::string_view v) { c.analysis.phonon_window = parse_window(v); }},
      {"n_range",
       [](RunConfig& c, std::string_view v) {
         const auto t = tokens(v);
         if (t.size() != 2) throw ConfigError("n_range takes two integers");
         const auto first = integer(t[0]);
         const auto last = integer(t[1]);
         if (first < 2 || last < first || last > 50) throw ConfigError("n_range must satisfy 2 <= first <= last <= 50");
         c.analysis.n_range = {static_cast<int>(first), static_cast<int>(last)};
       }},
      {"max_iterations",
       [](RunConfig& c, std::string_view v) {
         const auto n = count(v);
         if (n == 0) throw ConfigError("max_iterations must be at least 1");
         c.analysis.fit.max_iterations = static_cast<int>(n);
       }},
      {"tolerance_cost", [](RunConfig& c, std::string_view v) { c.analysis.fit.tolerance_cost = positive(v); }},
      {"tolerance_step", [](RunConfig& c, std::string_view v) { c.analysis.fit.tolerance_step = positive(v); }},
      {"weighting",
       [](RunConfig& c, std::string_view v) {
         v = trim(v);
         if (v == "poisson") c.analysis.fit.weighting = Weighting::poisson;
         else if (v == "uniform") c.analysis.fit.weighting = Weighting::uniform;
         else throw ConfigError("weighting must be poisson or uniform");
       }},
      {"extra_lines", [](RunConfig& c, std::string_view v) { c.analysis.fit.extra_lines = boolean(v); }},
      {"fix",
       [](RunConfig& c, std::string_view v) {
         for (const auto& name : tokens(v)) c.analysis.fit.fixed.insert(name);
       }},
      {"bound",
       [](RunConfig& c, std::string_view v) {
         const auto t = tokens(v);
         if (t.size() != 3) throw ConfigError("bound takes: name lower upper");
         const double lo = number(t[1]);
         const double hi = number(t[2]);
         if (!(lo < hi)) throw ConfigError("bound needs lower < upper");
         c.analysis.fit.bounds[t[0]] = Bound{lo, hi};
       }},
      {"prior_E_g_ev", [](RunConfig& c, std::string_view v) { c.analysis.prior.E_g = positive(v); }},
      {"prior_Ry_ev", [](RunConfig& c, std::string_view v) { c.analysis.prior.Ry = positive(v); }},
      {"prior_alpha_ev", [](RunConfig& c, std::string_view v) { c.analysis.prior.alpha = non_negative(v); }},
      {"prior_beta_ev", [](RunConfig& c, std::string_view v) { c.analysis.prior.beta = non_negative(v); }},
      {"include_1s_line", [](RunConfig& c, std::string_view v) { c.analysis.phonon.include_1s_line = boolean(v); }},
      {"irf_sigma_fixed_ev", [](RunConfig& c, std::string_view v) { c.analysis.phonon.fixed_sigma = non_negative(v); }},
      {"irf_sigma_guess_ev", [](RunConfig& c, std::string_view v) { c.analysis.phonon.sigma_guess = positive(v); }},
      {"threads", [](RunConfig& c, std::string_view v) { c.threads = std::max<std::size_t>(1, count(v)); }},
      {"hist_energy_bin_ev", [](RunConfig& c, std::string_view v) { c.batch.energy_bin = positive(v); }},
      {"hist_linewidth_bin_ev", [](RunConfig& c, std::string_view v) { c.batch.linewidth_bin = positive(v); }},
      {"hist_temperature_bin_k", [](RunConfig& c, std::string_view v) { c.batch.temperature_bin = positive(v); }},

      // synth
      {"synth_range_nm", [](RunConfig& c, std::string_view v) { c.synth.range = parse_window(v); }},
      {"synth_points",
       [](RunConfig& c, std::string_view v) {
         const auto n = count(v);
         if (n < 2) throw ConfigError("synth_points must be at least 2");
         c.synth.points = n;
       }},
      {"synth_unit",
       [](RunConfig& c, std::string_view v) {
         v = trim(v);
         if (v == "nm") c.synth.unit = AxisUnit::wavelength_nm;
         else if (v == "eV") c.synth.unit = AxisUnit::energy_eV;
         else throw ConfigError("synth_unit must be nm or eV");
       }},
      {"noise",
       [](RunConfig& c, std::string_view v) {
         const auto t = tokens(v);
         if (t.empty()) throw ConfigError("noise needs a kind");
         if (t[0] == "none" && t.size() == 1) {
           c.synth.noise = NoNoise{};
         } else if (t[0] == "gaussian" && t.size() == 2) {
           c.synth.noise = GaussianNoise{non_negative(t[1])};
         } else if (t[0] == "poisson" && t.size() <= 2) {
           c.synth.noise = PoissonNoise{t.size() == 2 ? positive(t[1]) : 1.0};
         } else {
           throw ConfigError("noise must be: none | gaussian <std> | poisson [scale]");
         }
       }},
      {"seed",
       [](RunConfig& c, std::string_view v) {
         const auto t = tokens(v);
         if (t.size() != 1) throw ConfigError("seed takes one integer");
         std::uint64_t s = 0;
         const auto [ptr, ec] = std::from_chars(t[0].data(), t[0].data() + t[0].size(), s);
         if (ec != std::errc() || ptr != t[0].data() + t[0].size()) throw ConfigError("seed must be a non-negative integer");
         c.synth.seed = s;
       }},
      {"fano",
       [](RunConfig& c, std::string_view v) {
         const auto t = tokens(v);
         if (t.size() != 5) throw ConfigError("fano takes: n|- E Gamma f q");
         FanoLine line;
         if (t[0] != "-") line.n = static_cast<int>(integer(t[0]));
         line.params = {number(t[1]), number(t[2]), number(t[3]), number(t[4])};
         c.synth.model.fano_lines.push_back(line);
       }},
      {"lorentz",
       [](RunConfig& c, std::string_view v) {
         const auto p = numbers(v, 3);
         c.synth.model.lorentz_lines.push_back({p[0], p[1], p[2]});
       }},
      {"tail",
       [](RunConfig& c, std::string_view v) {
         const auto p = numbers(v, 3);
         c.synth.model.phonon_tails.push_back({p[0], p[1], p[2]});
       }},
      {"tail_peak",
       [](RunConfig& c, std::string_view v) {
         const auto p = numbers(v, 3);
         if (!(p[1] > 0.0)) throw ConfigError("tail_peak temperature must be positive");
         c.synth.model.phonon_tails.push_back({p[0], p[1], tail_scale_for_peak(p[1], p[2])});
       }},
      {"series",
       [](RunConfig& c, std::string_view v) {
         const auto p = numbers(v, 6);
         c.synth.series = SeriesShape{p[0], p[1], p[2], p[3], p[4], p[5]};
       }},
      {"irf_sigma_ev", [](RunConfig& c, std::string_view v) { c.synth.model.irf.sigma = non_negative(v); }},
      {"baseline", [](RunConfig& c, std::string_view v) { c.synth.model.baseline = non_negative(v); }},
      {"n_sites", [](RunConfig& c, std::string_view v) { c.synth.n_sites = count(v); }},
      {"T_eff_mean_k", [](RunConfig& c, std::string_view v) { c.synth.T_eff.mean = positive(v); }},
      {"T_eff_std_k", [](RunConfig& c, std::string_view v) { c.synth.T_eff.std = non_negative(v); }},
      {"size_mean_um", [](RunConfig& c, std::string_view v) { c.synth.size_um.mean = positive(v); }},
      {"size_std_um", [](RunConfig& c, std::string_view v) { c.synth.size_um.std = non_negative(v); }},
      {"redshift_ev_per_k", [](RunConfig& c, std::string_view v) { c.synth.redshift_per_kelvin = single(v); }},
      {"reference_T_eff_k", [](RunConfig& c, std::string_view v) { c.synth.reference_T_eff = positive(v); }},
      {"nominal_sizes_um",
       [](RunConfig& c, std::string_view v) {
         auto sizes = numbers(v, 0);
         if (sizes.empty()) throw ConfigError("nominal_sizes_um needs at least one size");
         for (double s : sizes) {
           if (!(s > 0.0)) throw ConfigError("nominal sizes must be positive");
         }
         c.synth.nominal_sizes = std::move(sizes);
       }},
      {"shapes",
       [](RunConfig& c, std::string_view v) {
         std::vector<Shape> shapes;
         for (const auto& t : tokens(v)) {
           const auto s = parse_shape(t);
           if (!s) throw ConfigError(fmt::format("unknown shape '{}'", t));
           shapes.push_back(*s);
         }
         if (shapes.empty()) throw ConfigError("shapes needs at least one entry");
         c.synth.shapes = std::move(shapes);
       }},
  };
  return table;
}

}  // namespace

Window parse_window(std::string_view text) {
  const auto p = numbers(text, 2);
  if (!(p[0] > 0.0) || !(p[0] < p[1])) throw ConfigError(fmt::format("window '{}' must satisfy 0 < lo < hi", trim(text)));
  return {p[0], p[1]};
}

RunConfig parse_run_config(std::istream& in) {
  RunConfig cfg;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(fmt::format("line {}: expected key = value", line_no));
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto& table = handlers();
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError(fmt::format("line {}: unknown key '{}'", line_no, key));
    try {
      it->second(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("line {}: {}: {}", line_no, key, e.what()));
    }
  }
  return cfg;
}

RunConfig read_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open config {}", path.string()));
  return parse_run_config(in);
}

CompositeModel synth_model(const RunConfig& cfg) {
  CompositeModel m = cfg.synth.model;
  if (cfg.synth.series) {
    const auto lines = make_yellow_series(cfg.analysis.n_range.first, cfg.analysis.n_range.last, *cfg.synth.series);
    m.fano_lines.insert(m.fano_lines.end(), lines.begin(), lines.end());
  }
  if (m.component_count() == 0) throw ConfigError("synth needs at least one model component");
  try {
    m.validate();
  } catch (const std::exception& e) {
    throw ConfigError(fmt::format("invalid synth model: {}", e.what()));
  }
  return m;
}

}  // namespace rydspec::cli
