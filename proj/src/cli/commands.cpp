#include "rydspec/cli/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <thread>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "rydspec/cli/reports.hpp"
#include "rydspec/cli/run_config.hpp"
#include "rydspec/cli/spectrum_file.hpp"
#include "rydspec/error.hpp"

namespace fs = std::filesystem;

namespace rydspec::cli {

namespace {

// Maps library exceptions onto the exit-code contract.
template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return exit_io_error;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return exit_io_error;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_input_error;
  }
}

RunConfig load_config(const CommandOptions& opt) {
  RunConfig cfg;
  if (opt.config) cfg = read_run_config(*opt.config);
  for (const auto& w : opt.windows) {
    const auto eq = w.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("--window '{}' must be name=lo,hi", w));
    const auto name = w.substr(0, eq);
    const auto window = parse_window(w.substr(eq + 1));
    if (name == "series") cfg.analysis.series_window = window;
    else if (name == "phonon") cfg.analysis.phonon_window = window;
    else throw ConfigError(fmt::format("unknown window '{}' (expected series or phonon)", name));
  }
  if (opt.seed) cfg.synth.seed = *opt.seed;
  if (opt.out_dir) cfg.out_dir = *opt.out_dir;
  return cfg;
}

fs::path prepare_out_dir(const RunConfig& cfg) {
  const fs::path dir = cfg.out_dir.value_or(".");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create output directory {}: {}", dir.string(), ec.message()));
  return dir;
}

AxisUnit unit_option(const CommandOptions& opt, AxisUnit fallback) {
  if (!opt.unit) return fallback;
  const auto u = parse_unit(*opt.unit);
  if (!u) throw ConfigError(fmt::format("--unit must be nm or eV, got '{}'", *opt.unit));
  return *u;
}

std::size_t thread_count(const RunConfig& cfg) {
  std::size_t n = cfg.threads.value_or(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("RYDSPEC_THREADS")) {
    std::size_t cap = 0;
    const std::string_view s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), cap);
    if (ec == std::errc() && ptr == s.data() + s.size() && cap > 0) n = std::min(n, cap);
  }
  return n;
}

void write_synth_file(const fs::path& path, const Spectrum& s, AxisUnit unit, std::vector<std::string> comments) {
  auto file = from_spectrum(s, unit);
  file.comments = std::move(comments);
  write_spectrum_file(path, file);
}

}  // namespace

int cmd_convert(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!opt.input) throw ConfigError("convert needs --input");
    if (!opt.unit) throw ConfigError("convert needs --unit nm|eV");
    const auto target = unit_option(opt, AxisUnit::energy_eV);
    const auto converted = convert(read_spectrum_file(*opt.input), target);
    if (opt.out_dir) {
      RunConfig cfg;
      cfg.out_dir = opt.out_dir;
      const auto dir = prepare_out_dir(cfg);
      const auto path = dir / fmt::format("{}.{}.tsv", fs::path(*opt.input).stem().string(), unit_name(target));
      write_spectrum_file(path, converted);
      out << path.string() << '\n';
    } else {
      write_spectrum_file(out, converted);
    }
    return static_cast<int>(exit_ok);
  });
}

int cmd_synth(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto cfg = load_config(opt);
    const auto& st = cfg.synth;
    const auto unit = unit_option(opt, st.unit);
    const auto model = synth_model(cfg);
    const auto axis =
        EnergyAxis::uniform(nm_to_ev(st.range.hi_nm), nm_to_ev(st.range.lo_nm), st.points, AxisUnit::wavelength_nm);
    SynthSpec spec{model, axis, st.noise, st.seed};
    const auto dir = prepare_out_dir(cfg);

    if (st.n_sites == 0) {
      const auto result = generate(spec);
      write_synth_file(dir / "synth.tsv", result.spectrum, unit, {fmt::format("seed={}", st.seed)});
      write_json_exact(dir / "synth.truth.json", json{{"seed", st.seed}, {"model", model_to_json(result.truth)}});
      out << (dir / "synth.tsv").string() << '\n';
      return static_cast<int>(exit_ok);
    }

    EnsembleSpec ens{st.n_sites, spec};
    ens.T_eff = st.T_eff;
    ens.size_um = st.size_um;
    ens.redshift_per_kelvin = st.redshift_per_kelvin;
    ens.reference_T_eff = st.reference_T_eff;
    const auto sites = generate_ensemble(ens);

    const auto manifest_path = dir / "manifest.tsv";
    std::ofstream manifest(manifest_path, std::ios::binary);
    if (!manifest) throw IoError(fmt::format("cannot write {}", manifest_path.string()));
    manifest << "# site_id\tnominal_size_um\tshape\tspectrum_path\n";
    for (const auto& site : sites) {
      const double nominal = st.nominal_sizes[site.index % st.nominal_sizes.size()];
      const Shape shape = st.shapes[site.index % st.shapes.size()];
      const std::string name = site.site_id + ".tsv";
      write_synth_file(dir / name, site.spectrum, unit,
                       {fmt::format("site_id={}", site.site_id), fmt::format("seed={}", st.seed)});
      write_json_exact(dir / (site.site_id + ".truth.json"), json{{"site_id", site.site_id},
                                                                  {"seed", st.seed},
                                                                  {"T_eff_K", site.T_eff},
                                                                  {"size_um", site.size_um},
                                                                  {"nominal_size_um", nominal},
                                                                  {"shape", to_string(shape)},
                                                                  {"model", model_to_json(site.truth)}});
      manifest << site.site_id << '\t' << format_number(nominal) << '\t' << to_string(shape) << '\t' << name << '\n';
    }
    manifest.flush();
    if (!manifest) throw IoError(fmt::format("write failed for {}", manifest_path.string()));
    out << manifest_path.string() << '\n';
    return static_cast<int>(exit_ok);
  });
}

int cmd_fit(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!opt.input) throw ConfigError("fit needs --input");
    const auto cfg = load_config(opt);
    if (!cfg.analysis.series_window && !cfg.analysis.phonon_window) {
      throw ConfigError("no fit window configured (series_window_nm / phonon_window_nm or --window)");
    }
    const auto data = to_spectrum(read_spectrum_file(*opt.input));
    // Window problems are input errors and must surface before any output.
    std::optional<Spectrum> series_data, phonon_data;
    if (cfg.analysis.series_window) series_data = window_spectrum(data, *cfg.analysis.series_window, "series");
    if (cfg.analysis.phonon_window) phonon_data = window_spectrum(data, *cfg.analysis.phonon_window, "phonon");

    const auto fit = analyze_spectrum(data, cfg.analysis);
    const auto dir = prepare_out_dir(cfg);
    const std::string stem = fs::path(*opt.input).stem().string();

    json summary;
    summary["input"] = fs::path(*opt.input).filename().string();
    summary["fits"] = site_fit_to_json(fit);
    if (cfg.analysis.series_window) {
      summary["fits"]["series"]["window_nm"] = {cfg.analysis.series_window->lo_nm, cfg.analysis.series_window->hi_nm};
      write_plot_data(dir / (stem + ".series.plot.tsv"), *series_data, *fit.series);
    }
    if (cfg.analysis.phonon_window) {
      summary["fits"]["phonon"]["window_nm"] = {cfg.analysis.phonon_window->lo_nm, cfg.analysis.phonon_window->hi_nm};
      write_plot_data(dir / (stem + ".phonon.plot.tsv"), *phonon_data, *fit.phonon);
    }
    write_json(dir / (stem + ".summary.json"), summary);

    for (const auto* f : {fit.series ? &*fit.series : nullptr, fit.phonon ? &*fit.phonon : nullptr}) {
      if (f && !f->converged) err << "warning: fit did not converge (" << to_string(f->stop_reason) << ")\n";
    }
    out << (dir / (stem + ".summary.json")).string() << '\n';
    return static_cast<int>(exit_ok);
  });
}

std::vector<SiteRecord> parse_manifest(std::istream& in) {
  std::vector<SiteRecord> records;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty() || raw.front() == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t tab; (tab = raw.find('\t', start)) != std::string::npos; start = tab + 1) {
      fields.push_back(raw.substr(start, tab - start));
    }
    fields.push_back(raw.substr(start));
    if (fields.size() != 4) throw ParseError(fmt::format("expected 4 tab-separated fields, got {}", fields.size()), line_no);

    SiteRecord rec;
    rec.site_id = fields[0];
    if (rec.site_id.empty()) throw ParseError("empty site_id", line_no);
    double size = 0.0;
    const auto& s = fields[1];
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), size);
    if (ec != std::errc() || ptr != s.data() + s.size() || !(size > 0.0)) {
      throw ParseError(fmt::format("bad nominal size '{}'", s), line_no);
    }
    rec.nominal_size = size;
    const auto shape = parse_shape(fields[2]);
    if (!shape) throw ParseError(fmt::format("unknown shape '{}'", fields[2]), line_no);
    rec.shape = *shape;
    rec.spectrum_path = fields[3];
    if (rec.spectrum_path.empty()) throw ParseError("empty spectrum path", line_no);
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw ParseError("manifest lists no sites");
  return records;
}

int cmd_batch(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!opt.manifest) throw ConfigError("batch needs --manifest");
    const auto cfg = load_config(opt);
    if (!cfg.analysis.series_window && !cfg.analysis.phonon_window) {
      throw ConfigError("no fit window configured (series_window_nm / phonon_window_nm or --window)");
    }
    std::ifstream manifest(*opt.manifest);
    if (!manifest) throw IoError(fmt::format("cannot open manifest {}", *opt.manifest));
    auto records = parse_manifest(manifest);
    const fs::path base = fs::path(*opt.manifest).parent_path();
    auto resolve = [&base](const std::string& p) {
      const fs::path path(p);
      return path.is_absolute() ? path : base / path;
    };

    std::optional<SiteFit> reference;
    std::string notes;
    if (cfg.reference_spectrum) {
      try {
        const fs::path ref = opt.config ? fs::path(*opt.config).parent_path() / *cfg.reference_spectrum
                                        : fs::path(*cfg.reference_spectrum);
        reference = analyze_spectrum(to_spectrum(read_spectrum_file(ref)), cfg.analysis);
      } catch (const std::exception& e) {
        notes = fmt::format("reference fit failed: {}", e.what());
        err << "warning: " << notes << '\n';
      }
    }

    BatchOptions options = cfg.batch;
    options.threads = thread_count(cfg);
    const SpectrumLoader loader = [&](const std::string& p) { return to_spectrum(read_spectrum_file(resolve(p))); };
    const auto result = run_batch(std::move(records), loader, cfg.analysis, reference, options);

    const auto dir = prepare_out_dir(cfg);
    write_batch_reports(dir, result, notes);
    const auto fitted = result.fitted_count();
    out << fmt::format("{} of {} sites fitted; reports in {}\n", fitted, result.records.size(), dir.string());
    if (fitted == 0) {
      err << "error: no site could be fitted\n";
      return static_cast<int>(exit_batch_failed);
    }
    return static_cast<int>(exit_ok);
  });
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Photoluminescence analysis of Rydberg exciton spectra", "rydspec"};
  app.require_subcommand(1);
  CommandOptions opt;
  std::string seed_text;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "run configuration (key = value)");
    sub->add_option("--out-dir", opt.out_dir, "output directory");
  };
  auto* convert_cmd = app.add_subcommand("convert", "convert a spectrum file between nm and eV");
  convert_cmd->add_option("--input", opt.input, "spectrum file")->required();
  convert_cmd->add_option("--unit", opt.unit, "target unit (nm or eV)")->required();
  convert_cmd->add_option("--out-dir", opt.out_dir, "write here instead of stdout");

  auto* synth_cmd = app.add_subcommand("synth", "generate synthetic spectra with truth sidecars");
  add_common(synth_cmd);
  synth_cmd->add_option("--seed", seed_text, "random seed (overrides the config)");
  synth_cmd->add_option("--unit", opt.unit, "axis unit of the written files (nm or eV)");

  auto* fit_cmd = app.add_subcommand("fit", "fit one spectrum");
  add_common(fit_cmd);
  fit_cmd->add_option("--input", opt.input, "spectrum file")->required();
  fit_cmd->add_option("--window", opt.windows, "series=lo,hi or phonon=lo,hi in nm");

  auto* batch_cmd = app.add_subcommand("batch", "fit every site of a manifest and aggregate");
  add_common(batch_cmd);
  batch_cmd->add_option("--manifest", opt.manifest, "site manifest")->required();
  batch_cmd->add_option("--window", opt.windows, "series=lo,hi or phonon=lo,hi in nm");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? static_cast<int>(exit_ok) : static_cast<int>(exit_input_error);
  }
  if (!seed_text.empty()) {
    std::uint64_t seed = 0;
    const auto [ptr, ec] = std::from_chars(seed_text.data(), seed_text.data() + seed_text.size(), seed);
    if (ec != std::errc() || ptr != seed_text.data() + seed_text.size()) {
      err << "error: --seed must be a non-negative integer\n";
      return exit_input_error;
    }
    opt.seed = seed;
  }

  if (convert_cmd->parsed()) return cmd_convert(opt, out, err);
  if (synth_cmd->parsed()) return cmd_synth(opt, out, err);
  if (fit_cmd->parsed()) return cmd_fit(opt, out, err);
  return cmd_batch(opt, out, err);
}

}  // namespace rydspec::cli
