#include "rydspec/cli/reports.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "rydspec/cli/spectrum_file.hpp"
#include "rydspec/error.hpp"

namespace rydspec::cli {

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError(fmt::format("write failed for {}", path.string()));
}

std::string num(double v) { return format_number(v); }
std::string num(const std::optional<double>& v) { return v ? format_number(*v) : std::string("nan"); }

}  // namespace

json model_to_json(const CompositeModel& m) {
  json j;
  j["baseline"] = m.baseline;
  j["irf_sigma"] = m.irf.sigma;
  j["fano"] = json::array();
  for (const auto& l : m.fano_lines) {
    j["fano"].push_back({{"n", l.n ? json(*l.n) : json(nullptr)},
                         {"E_n", l.params.E_n},
                         {"Gamma_n", l.params.Gamma_n},
                         {"f_n", l.params.f_n},
                         {"q_n", l.params.q_n}});
  }
  j["lorentz"] = json::array();
  for (const auto& l : m.lorentz_lines) {
    j["lorentz"].push_back({{"E_0", l.E_0}, {"Gamma", l.Gamma}, {"amplitude", l.amplitude}});
  }
  j["phonon_tails"] = json::array();
  for (const auto& t : m.phonon_tails) {
    j["phonon_tails"].push_back({{"E_i", t.E_i}, {"T_eff", t.T_eff}, {"A", t.A}});
  }
  return j;
}

CompositeModel model_from_json(const json& j) {
  try {
    CompositeModel m;
    m.baseline = j.at("baseline").get<double>();
    m.irf.sigma = j.at("irf_sigma").get<double>();
    for (const auto& l : j.at("fano")) {
      FanoLine line;
      if (!l.at("n").is_null()) line.n = l.at("n").get<int>();
      line.params = {l.at("E_n").get<double>(), l.at("Gamma_n").get<double>(), l.at("f_n").get<double>(),
                     l.at("q_n").get<double>()};
      m.fano_lines.push_back(line);
    }
    for (const auto& l : j.at("lorentz")) {
      m.lorentz_lines.push_back({l.at("E_0").get<double>(), l.at("Gamma").get<double>(), l.at("amplitude").get<double>()});
    }
    for (const auto& t : j.at("phonon_tails")) {
      m.phonon_tails.push_back({t.at("E_i").get<double>(), t.at("T_eff").get<double>(), t.at("A").get<double>()});
    }
    return m;
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("bad model JSON: {}", e.what()));
  }
}

json fit_to_json(const FitResult& r) {
  json j;
  j["converged"] = r.converged;
  j["stop_reason"] = to_string(r.stop_reason);
  j["iterations"] = r.n_iterations;
  j["initial_cost"] = r.initial_cost;
  j["cost"] = r.cost;
  j["flags"] = r.flags;
  json params = json::array();
  for (std::size_t i = 0; i < r.names.size(); ++i) {
    std::optional<double> u;
    if (r.uncertainties) u = (*r.uncertainties)[i];
    params.push_back({{"name", r.names[i]},
                      {"value", r.values[i]},
                      {"uncertainty", optional_number(u)},
                      {"fixed", static_cast<bool>(r.fixed[i])}});
  }
  j["parameters"] = params;
  json lines = json::array();
  for (const auto& l : r.params.fano_lines) {
    if (!l.n) continue;
    const std::string prefix = fmt::format("fano{}.", *l.n);
    lines.push_back({{"n", *l.n},
                     {"E_eV", l.params.E_n},
                     {"E_nm", ev_to_nm(l.params.E_n)},
                     {"E_uncertainty_eV", optional_number(r.uncertainty(prefix + "E"))},
                     {"Gamma_eV", l.params.Gamma_n},
                     {"Gamma_uncertainty_eV", optional_number(r.uncertainty(prefix + "Gamma"))},
                     {"f", l.params.f_n},
                     {"q", l.params.q_n}});
  }
  if (!lines.empty()) j["series_lines"] = lines;
  if (!r.params.phonon_tails.empty()) {
    j["T_eff_K"] = r.T_eff();
    j["T_eff_uncertainty_K"] = optional_number(r.uncertainty("tail0.T_eff"));
  }
  return j;
}

json site_fit_to_json(const SiteFit& fit) {
  json j = json::object();
  if (fit.series) j["series"] = fit_to_json(*fit.series);
  if (fit.phonon) j["phonon"] = fit_to_json(*fit.phonon);
  return j;
}

json rounded(const json& j) {
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (!std::isfinite(v)) return nullptr;
    return std::stod(format_number(v));
  }
  if (j.is_array() || j.is_object()) {
    json out = j;
    for (auto it = out.begin(); it != out.end(); ++it) *it = rounded(*it);
    return out;
  }
  return j;
}

void write_json(const std::filesystem::path& path, const json& j) {
  auto out = open_out(path);
  out << rounded(j).dump(2) << '\n';
  finish(out, path);
}

void write_json_exact(const std::filesystem::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  finish(out, path);
}

void write_plot_data(const std::filesystem::path& path, const Spectrum& data, const FitResult& fit) {
  const auto& axis = data.axis();
  const auto model = evaluate(fit.params, axis);
  const auto components = evaluate_components(fit.params, axis);
  auto out = open_out(path);
  out << "# energy_eV\twavelength_nm\tdata\tmodel\tbaseline";
  for (const auto& c : components) out << '\t' << c.name;
  out << '\n';
  for (std::size_t i = 0; i < axis.size(); ++i) {
    out << num(axis[i]) << '\t' << num(ev_to_nm(axis[i])) << '\t' << num(data.counts()[i]) << '\t' << num(model[i])
        << '\t' << num(fit.params.baseline);
    for (const auto& c : components) out << '\t' << num(c.values[i]);
    out << '\n';
  }
  finish(out, path);
}

void write_batch_reports(const std::filesystem::path& dir, const BatchResult& result, const std::string& notes) {
  {
    const auto path = dir / "sites.tsv";
    auto out = open_out(path);
    out << "# site_id\tnominal_size_um\tshape\tspectrum_path\tstatus\tseries_converged\tphonon_converged\tdetail\n";
    for (const auto& r : result.records) {
      auto conv = [](const std::optional<FitResult>& f) -> std::string {
        if (!f) return "-";
        return f->converged ? "yes" : "no";
      };
      std::string detail = r.failure;
      if (r.fit) {
        std::vector<std::string> flags;
        if (r.fit->series) flags.insert(flags.end(), r.fit->series->flags.begin(), r.fit->series->flags.end());
        if (r.fit->phonon) flags.insert(flags.end(), r.fit->phonon->flags.begin(), r.fit->phonon->flags.end());
        detail = fmt::format("{}", fmt::join(flags, "; "));
      }
      for (char& c : detail) {
        if (c == '\t' || c == '\n') c = ' ';
      }
      out << r.site_id << '\t' << num(r.nominal_size) << '\t' << to_string(r.shape) << '\t' << r.spectrum_path << '\t'
          << (r.fit ? "fitted" : "failed") << '\t' << (r.fit ? conv(r.fit->series) : "-") << '\t'
          << (r.fit ? conv(r.fit->phonon) : "-") << '\t' << (detail.empty() ? "-" : detail) << '\n';
    }
    finish(out, path);
  }
  {
    const auto path = dir / "aggregate.tsv";
    auto out = open_out(path);
    out << "# quantity\tn\tnominal_size_um\tmean\tstd\tcount\n";
    for (const auto& [q, agg] : result.aggregates) {
      for (const auto& row : agg.rows) {
        out << to_string(q) << '\t' << row.key.n << '\t' << num(row.key.nominal_size) << '\t' << num(row.mean) << '\t'
            << num(row.std) << '\t' << row.count << '\n';
      }
    }
    finish(out, path);
  }
  {
    const auto path = dir / "exclusions.tsv";
    auto out = open_out(path);
    out << "# site_id\tquantity\treason\n";
    for (const auto& [q, agg] : result.aggregates) {
      for (const auto& e : agg.excluded) {
        std::string reason = e.reason;
        for (char& c : reason) {
          if (c == '\t' || c == '\n') c = ' ';
        }
        out << e.site_id << '\t' << to_string(q) << '\t' << reason << '\n';
      }
    }
    // sites that produced no quantity at all are still listed
    if (result.aggregates.empty()) {
      for (const auto& r : result.records) {
        if (!r.fit) out << r.site_id << "\tall\t" << r.failure << '\n';
      }
    }
    finish(out, path);
  }
  {
    const auto path = dir / "series_scaling.tsv";
    auto out = open_out(path);
    out << "# parameter\tvalue\tuncertainty\n";
    if (result.scaling) {
      const auto& s = *result.scaling;
      const auto& u = s.uncertainties;
      out << "E_g\t" << num(s.E_g) << '\t' << num(u.E_g) << '\n';
      out << "Ry\t" << num(s.Ry) << '\t' << num(u.Ry) << '\n';
      const auto d2 = s.defects.find(2);
      out << "delta_2\t" << num(d2 == s.defects.end() ? 0.0 : d2->second) << '\t'
          << (s.defect_fitted ? num(u.delta_2) : std::string("fixed")) << '\n';
      out << "alpha\t" << num(s.alpha) << '\t' << num(u.alpha) << '\n';
      out << "beta\t" << num(s.beta) << '\t' << num(u.beta) << '\n';
    } else if (!result.scaling_error.empty()) {
      out << "# not fitted: " << result.scaling_error << '\n';
    }
    finish(out, path);
  }
  {
    const auto path = dir / "histograms.tsv";
    auto out = open_out(path);
    out << "# quantity\tn\tlower\tupper\tcount\n";
    for (const auto& h : result.histograms) {
      for (const auto& b : h.bins) {
        out << to_string(h.quantity) << '\t' << h.n << '\t' << num(b.lower) << '\t' << num(b.upper) << '\t' << b.count
            << '\n';
      }
    }
    finish(out, path);
  }
  {
    const auto path = dir / "reference_comparison.tsv";
    auto out = open_out(path);
    out << "# quantity\tn\tnominal_size_um\tgroup_mean\treference\tdelta\tlabel\n";
    for (const auto& s : result.shifts) {
      out << to_string(s.key.quantity) << '\t' << s.key.n << '\t' << num(s.key.nominal_size) << '\t'
          << num(s.group_mean) << '\t' << num(s.reference) << '\t' << num(s.delta) << '\t' << s.label << '\n';
    }
    finish(out, path);
  }

  json summary;
  summary["sites_total"] = result.records.size();
  summary["sites_fitted"] = result.fitted_count();
  if (!notes.empty()) summary["notes"] = notes;
  if (result.scaling) {
    const auto& s = *result.scaling;
    const auto d2 = s.defects.find(2);
    summary["series_scaling"] = {
        {"E_g", s.E_g},
        {"Ry", s.Ry},
        {"delta_2", d2 == s.defects.end() ? 0.0 : d2->second},
        {"delta_2_fitted", s.defect_fitted},
        {"alpha", s.alpha},
        {"beta", s.beta},
        {"uncertainties",
         {{"E_g", optional_number(s.uncertainties.E_g)},
          {"Ry", optional_number(s.uncertainties.Ry)},
          {"delta_2", optional_number(s.uncertainties.delta_2)},
          {"alpha", optional_number(s.uncertainties.alpha)},
          {"beta", optional_number(s.uncertainties.beta)}}},
    };
  } else {
    summary["series_scaling"] = nullptr;
    if (!result.scaling_error.empty()) summary["series_scaling_error"] = result.scaling_error;
  }
  if (result.reference) summary["reference"] = site_fit_to_json(*result.reference);
  json sites = json::object();
  for (const auto& r : result.records) {
    json s;
    s["nominal_size_um"] = r.nominal_size;
    s["shape"] = to_string(r.shape);
    s["spectrum_path"] = r.spectrum_path;
    if (r.fit) {
      s["fit"] = site_fit_to_json(*r.fit);
    } else {
      s["failure"] = r.failure;
    }
    sites[r.site_id] = s;
  }
  summary["sites"] = sites;
  write_json(dir / "batch_summary.json", summary);
}

}  // namespace rydspec::cli
