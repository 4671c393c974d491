#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "doctest.h"
#include "json.hpp"
#include "rydspec/cli/commands.hpp"
#include "rydspec/cli/reports.hpp"
#include "rydspec/cli/run_config.hpp"
#include "rydspec/cli/spectrum_file.hpp"
#include "rydspec/error.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace rydspec;
using namespace rydspec::cli;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("rydspec_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "rydspec");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

const char* series_config = R"(# yellow series, Poisson noise
series = 2.17 0.098 3e-3 2e-4 1e4 0.1
baseline = 500
synth_range_nm = 570 580
synth_points = 2000
noise = poisson
seed = 7
series_window_nm = 570 580
n_range = 2 5
)";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("spectrum file parsing") {
  SUBCASE("comments and unit header") {
    std::istringstream in("# unit=nm\n# source: test\n620\t1\n610\t2\n\n600\t3\n");
    const auto f = parse_spectrum_file(in);
    CHECK(f.unit == AxisUnit::wavelength_nm);
    CHECK(f.axis.size() == 3);
    CHECK(f.comments.size() == 1);
  }
  auto error_of = [](const std::string& text) -> std::pair<std::string, std::size_t> {
    std::istringstream in(text);
    try {
      (void)parse_spectrum_file(in);
    } catch (const ParseError& e) {
      return {e.what(), e.line()};
    }
    return {"", 0};
  };
  CHECK(error_of("# unit=eV\n2.0\t1\n2.1\t2\n2.05\t3\n").second == 4);
  CHECK(error_of("# unit=eV\n2.0\t1\n2.1\t2\n2.05\t3\n").first.find("monotonic") != std::string::npos);
  CHECK(error_of("# unit=eV\n2.0\t1\n2.1\t-2\n").second == 3);
  CHECK(error_of("# unit=eV\n2.0\t1\n2.1 2\n").second == 3);
  CHECK(error_of("# unit=eV\n2.0\t1\n2.1\tabc\n").second == 3);
  CHECK(error_of("2.0\t1\n").first.find("unit") != std::string::npos);
  CHECK(error_of("# unit=eV\n# nothing here\n").first.find("no samples") != std::string::npos);
  CHECK(error_of("# unit=furlong\n").second == 1);
}

TEST_CASE("convert: nm to ascending eV") {
  const auto dir = scratch("convert");
  write(dir / "in.tsv", "# unit=nm\n620\t10\n610\t20\n600\t30\n");
  const auto r = run({"convert", "--input", (dir / "in.tsv").string(), "--unit", "eV"});
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  const auto f = parse_spectrum_file(in);
  CHECK(f.unit == AxisUnit::energy_eV);
  REQUIRE(f.axis.size() == 3);
  CHECK(testing::rel(f.axis[0], 1.9997451612903225806) < 1e-12);
  CHECK(testing::rel(f.axis[1], 2.0325278688524590164) < 1e-12);
  CHECK(testing::rel(f.axis[2], 2.0664033333333333333) < 1e-12);
  CHECK(f.counts == std::vector<double>{10, 20, 30});
}

TEST_CASE("convert there and back") {
  const auto dir = scratch("roundtrip");
  std::ostringstream text;
  text << "# unit=nm\n";
  for (int i = 0; i < 200; ++i) text << 570.0 + 0.05 * i << '\t' << 1000 + i << '\n';
  write(dir / "in.tsv", text.str());
  REQUIRE(run({"convert", "--input", (dir / "in.tsv").string(), "--unit", "eV", "--out-dir", dir.string()}).code == 0);
  REQUIRE(run({"convert", "--input", (dir / "in.eV.tsv").string(), "--unit", "nm", "--out-dir", (dir / "back").string()})
              .code == 0);
  const auto a = read_spectrum_file(dir / "in.tsv");
  const auto b = read_spectrum_file(dir / "back" / "in.eV.nm.tsv");
  REQUIRE(a.axis.size() == b.axis.size());
  for (std::size_t i = 0; i < a.axis.size(); ++i) {
    CHECK(testing::rel(b.axis[i], a.axis[i]) < 1e-9);
    CHECK(b.counts[i] == a.counts[i]);
  }
}

TEST_CASE("convert: error exits") {
  const auto dir = scratch("convert_err");
  write(dir / "empty.tsv", "# unit=nm\n");
  auto r = run({"convert", "--input", (dir / "empty.tsv").string(), "--unit", "eV"});
  CHECK(r.code == 2);
  CHECK(r.err.find("no samples") != std::string::npos);
  write(dir / "bad.tsv", "# unit=nm\n600\t1\n601\t1\n601\t1\n");
  r = run({"convert", "--input", (dir / "bad.tsv").string(), "--unit", "eV"});
  CHECK(r.code == 2);
  CHECK(r.err.find("line 4") != std::string::npos);
  CHECK(run({"convert", "--input", (dir / "missing.tsv").string(), "--unit", "eV"}).code == 3);
  CHECK(run({"convert", "--input", (dir / "bad.tsv").string(), "--unit", "K"}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({}).code == 2);
}

TEST_CASE("run config") {
  std::istringstream ok(series_config);
  const auto cfg = parse_run_config(ok);
  REQUIRE(cfg.analysis.series_window);
  CHECK(cfg.analysis.series_window->lo_nm == 570.0);
  CHECK(cfg.analysis.n_range.last == 5);
  CHECK(cfg.synth.seed == 7);
  CHECK(std::holds_alternative<PoissonNoise>(cfg.synth.noise));
  CHECK(synth_model(cfg).fano_lines.size() == 4);

  auto fails = [](const std::string& text) {
    std::istringstream in(text);
    try {
      (void)parse_run_config(in);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(fails("colour = blue\n").find("unknown key 'colour'") != std::string::npos);
  CHECK(fails("\n\nseries_window_nm = 580 570\n").find("line 3") != std::string::npos);
  CHECK(!fails("n_range = 1 5\n").empty());
  CHECK(!fails("noise = gaussian\n").empty());
  CHECK(!fails("weighting = chi\n").empty());
  CHECK(!fails("max_iterations = 0\n").empty());
  CHECK(!fails("just words\n").empty());
  CHECK(fails("weighting = uniform # trailing comment\n").empty());
}

TEST_CASE("synth: single spectrum") {
  const auto dir = scratch("synth");
  write(dir / "run.cfg", series_config);
  const auto cfg = (dir / "run.cfg").string();
  REQUIRE(run({"synth", "--config", cfg, "--out-dir", (dir / "a").string()}).code == 0);
  REQUIRE(run({"synth", "--config", cfg, "--out-dir", (dir / "b").string()}).code == 0);
  CHECK(slurp(dir / "a" / "synth.tsv") == slurp(dir / "b" / "synth.tsv"));
  CHECK(slurp(dir / "a" / "synth.truth.json") == slurp(dir / "b" / "synth.truth.json"));
  REQUIRE(run({"synth", "--config", cfg, "--out-dir", (dir / "c").string(), "--seed", "8"}).code == 0);
  CHECK(slurp(dir / "a" / "synth.tsv") != slurp(dir / "c" / "synth.tsv"));

  write(dir / "bad.cfg", "noise = none\nseed = 1\n");
  CHECK(run({"synth", "--config", (dir / "bad.cfg").string(), "--out-dir", dir.string()}).code == 2);
}

TEST_CASE("synth: noise-free file equals the model at full precision") {
  const auto dir = scratch("synth_exact");
  write(dir / "run.cfg", std::string(series_config) + "noise = none\n");
  REQUIRE(run({"synth", "--config", (dir / "run.cfg").string(), "--out-dir", dir.string()}).code == 0);
  const auto file = read_spectrum_file(dir / "synth.tsv");
  const auto truth = model_from_json(json::parse(slurp(dir / "synth.truth.json")).at("model"));
  const auto model = eval_composite(truth, EnergyAxis(file.axis));
  for (std::size_t i = 0; i < file.axis.size(); ++i) CHECK(file.counts[i] == model.counts()[i]);
}

TEST_CASE("synth: ensemble of 12") {
  const auto dir = scratch("ensemble");
  write(dir / "run.cfg", std::string(series_config) + "n_sites = 12\nnominal_sizes_um = 4 8\nshapes = square circle\n");
  REQUIRE(run({"synth", "--config", (dir / "run.cfg").string(), "--out-dir", dir.string()}).code == 0);
  int spectra = 0, sidecars = 0, manifests = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name == "manifest.tsv") ++manifests;
    else if (name.ends_with(".truth.json")) ++sidecars;
    else if (name.ends_with(".tsv")) ++spectra;
  }
  CHECK(spectra == 12);
  CHECK(sidecars == 12);
  CHECK(manifests == 1);
  std::ifstream m(dir / "manifest.tsv");
  const auto recs = parse_manifest(m);
  REQUIRE(recs.size() == 12);
  CHECK(recs[1].nominal_size == 8.0);
  CHECK(recs[1].shape == Shape::circle);
}

TEST_CASE("fit: summary matches the embedded truth") {
  const auto dir = scratch("fit");
  write(dir / "run.cfg", series_config);
  const auto cfg = (dir / "run.cfg").string();
  REQUIRE(run({"synth", "--config", cfg, "--out-dir", dir.string()}).code == 0);
  const auto input = (dir / "synth.tsv").string();
  REQUIRE(run({"fit", "--config", cfg, "--input", input, "--out-dir", (dir / "r1").string()}).code == 0);
  REQUIRE(run({"fit", "--config", cfg, "--input", input, "--out-dir", (dir / "r2").string()}).code == 0);
  CHECK(slurp(dir / "r1" / "synth.summary.json") == slurp(dir / "r2" / "synth.summary.json"));
  CHECK(slurp(dir / "r1" / "synth.series.plot.tsv") == slurp(dir / "r2" / "synth.series.plot.tsv"));

  const auto summary = json::parse(slurp(dir / "r1" / "synth.summary.json"));
  const auto truth = model_from_json(json::parse(slurp(dir / "synth.truth.json")).at("model"));
  const auto& series = summary.at("fits").at("series");
  CHECK(series.at("converged").get<bool>());
  for (const auto& line : series.at("series_lines")) {
    const int n = line.at("n").get<int>();
    const auto* t = truth.find_line(n);
    REQUIRE(t != nullptr);
    CHECK(std::abs(line.at("E_eV").get<double>() - t->params.E_n) < 5e-5);
    CHECK(testing::rel(line.at("Gamma_eV").get<double>(), t->params.Gamma_n) < 0.05);
    CHECK(line.at("E_uncertainty_eV").is_number());
  }

  std::ifstream plot(dir / "r1" / "synth.series.plot.tsv");
  std::string header;
  std::getline(plot, header);
  CHECK(header == "# energy_eV\twavelength_nm\tdata\tmodel\tbaseline\tfano_2p\tfano_3p\tfano_4p\tfano_5p");
}

TEST_CASE("fit: the plot model re-fits to the summary") {
  const auto dir = scratch("idempotent");
  write(dir / "run.cfg", series_config);
  const auto cfg = (dir / "run.cfg").string();
  REQUIRE(run({"synth", "--config", cfg, "--out-dir", dir.string()}).code == 0);
  REQUIRE(run({"fit", "--config", cfg, "--input", (dir / "synth.tsv").string(), "--out-dir", (dir / "r").string()})
              .code == 0);
  // energy and model columns become a new spectrum
  SpectrumFile model_file;
  model_file.unit = AxisUnit::energy_eV;
  std::ifstream plot(dir / "r" / "synth.series.plot.tsv");
  for (std::string line; std::getline(plot, line);) {
    if (line.starts_with("#")) continue;
    std::istringstream row(line);
    double e, nm, data, model;
    row >> e >> nm >> data >> model;
    model_file.axis.push_back(e);
    model_file.counts.push_back(model);
  }
  write_spectrum_file(dir / "model.tsv", model_file);
  write(dir / "refit.cfg", "series_window_nm = 570.01 579.99\nn_range = 2 5\n");
  REQUIRE(run({"fit", "--config", (dir / "refit.cfg").string(), "--input", (dir / "model.tsv").string(), "--out-dir",
               (dir / "r").string()})
              .code == 0);
  const auto first = json::parse(slurp(dir / "r" / "synth.summary.json")).at("fits").at("series").at("series_lines");
  const auto second = json::parse(slurp(dir / "r" / "model.summary.json")).at("fits").at("series").at("series_lines");
  REQUIRE(first.size() == second.size());
  for (std::size_t k = 0; k < first.size(); ++k) {
    CHECK(std::abs(first[k].at("E_eV").get<double>() - second[k].at("E_eV").get<double>()) < 1e-7);
    CHECK(testing::rel(second[k].at("Gamma_eV").get<double>(), first[k].at("Gamma_eV").get<double>()) < 1e-4);
  }
}

TEST_CASE("fit: error exits") {
  const auto dir = scratch("fit_err");
  write(dir / "run.cfg", series_config);
  const auto cfg = (dir / "run.cfg").string();
  REQUIRE(run({"synth", "--config", cfg, "--out-dir", dir.string()}).code == 0);
  const auto input = (dir / "synth.tsv").string();
  auto r = run({"fit", "--config", cfg, "--input", input, "--window", "phonon=600,625", "--out-dir", dir.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("phonon window 600-625 nm") != std::string::npos);
  CHECK(!fs::exists(dir / "synth.summary.json"));
  CHECK(run({"fit", "--input", input, "--out-dir", dir.string()}).code == 2);  // no window
  CHECK(run({"fit", "--config", cfg, "--input", (dir / "nope.tsv").string()}).code == 3);
  CHECK(run({"fit", "--config", (dir / "nope.cfg").string(), "--input", input}).code == 3);
  CHECK(run({"fit", "--config", cfg, "--input", input, "--window", "series=580,570"}).code == 2);

  // a read-only output location is an I/O failure
  write(dir / "blocker", "");
  CHECK(run({"fit", "--config", cfg, "--input", input, "--out-dir", (dir / "blocker" / "sub").string()}).code == 3);

  write(dir / "short.cfg", std::string(series_config) + "max_iterations = 1\n");
  r = run({"fit", "--config", (dir / "short.cfg").string(), "--input", input, "--out-dir", (dir / "short").string()});
  CHECK(r.code == 0);
  const auto summary = json::parse(slurp(dir / "short" / "synth.summary.json"));
  CHECK(!summary.at("fits").at("series").at("converged").get<bool>());
  CHECK(!summary.at("fits").at("series").at("flags").empty());
}

TEST_CASE("batch: one corrupt file among 48") {
  const auto dir = scratch("batch");
  write(dir / "run.cfg", std::string(series_config) +
                             "n_sites = 48\nnominal_sizes_um = 4 8 12 16\nthreads = 4\n"
                             "synth_points = 1500\n");
  const auto cfg = (dir / "run.cfg").string();
  REQUIRE(run({"synth", "--config", cfg, "--out-dir", (dir / "sites").string()}).code == 0);
  write(dir / "sites" / "site_017.tsv", "# unit=eV\n2.1\t5\ngarbage\n");
  const auto r =
      run({"batch", "--config", cfg, "--manifest", (dir / "sites" / "manifest.tsv").string(), "--out-dir",
           (dir / "rep").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("47 of 48") != std::string::npos);

  std::ifstream agg(dir / "rep" / "aggregate.tsv");
  std::map<std::pair<std::string, std::string>, int> rows;
  std::size_t total = 0;
  for (std::string line; std::getline(agg, line);) {
    if (line.starts_with("#")) continue;
    std::istringstream row(line);
    std::string q, n, size, mean, sd, count;
    row >> q >> n >> size >> mean >> sd >> count;
    ++rows[{q, n}];
    total += std::stoul(count);
  }
  for (const auto& [key, count] : rows) CHECK(count == 4);
  CHECK(rows.size() == 8);     // E_np and Gamma_np for n = 2..5
  CHECK(total == 47 * 8);
  const auto excl = slurp(dir / "rep" / "exclusions.tsv");
  CHECK(excl.find("site_017\tE_np") != std::string::npos);
  CHECK(excl.find("line 3") != std::string::npos);
  const auto summary = json::parse(slurp(dir / "rep" / "batch_summary.json"));
  CHECK(summary.at("sites_fitted").get<int>() == 47);
  CHECK(summary.at("sites").at("site_017").contains("failure"));
}

TEST_CASE("batch: every site unreadable") {
  const auto dir = scratch("batch_fail");
  write(dir / "manifest.tsv", "a\t4\tsquare\tmissing_a.tsv\nb\t4\tcircle\tmissing_b.tsv\n");
  write(dir / "run.cfg", "series_window_nm = 570 580\n");
  const auto r = run({"batch", "--config", (dir / "run.cfg").string(), "--manifest", (dir / "manifest.tsv").string(),
                      "--out-dir", (dir / "rep").string()});
  CHECK(r.code == 4);
  CHECK(fs::exists(dir / "rep" / "exclusions.tsv"));
  write(dir / "bad_manifest.tsv", "a\t4\ttriangle\tx.tsv\n");
  CHECK(run({"batch", "--config", (dir / "run.cfg").string(), "--manifest", (dir / "bad_manifest.tsv").string()}).code ==
        2);
}

TEST_CASE("batch: noise-free sites recover the linewidth law") {
  const auto dir = scratch("batch_exact");
  write(dir / "run.cfg",
        "series = 2.17 0.098 0.8e-3 0.12e-3 1e4 0.1\nbaseline = 500\nsynth_range_nm = 570 580\nsynth_points = 2000\n"
        "noise = none\nseed = 1\nseries_window_nm = 570 580\nn_range = 2 5\nn_sites = 8\n"
        "nominal_sizes_um = 4 8\nthreads = 2\n");
  const auto cfg = (dir / "run.cfg").string();
  REQUIRE(run({"synth", "--config", cfg, "--out-dir", (dir / "sites").string()}).code == 0);
  REQUIRE(run({"batch", "--config", cfg, "--manifest", (dir / "sites" / "manifest.tsv").string(), "--out-dir",
               (dir / "rep").string()})
              .code == 0);
  const auto s = json::parse(slurp(dir / "rep" / "batch_summary.json")).at("series_scaling");
  CHECK(testing::rel(s.at("alpha").get<double>(), 0.8e-3) < 1e-6);
  CHECK(testing::rel(s.at("beta").get<double>(), 0.12e-3) < 1e-6);
  CHECK(testing::rel(s.at("E_g").get<double>(), 2.17) < 1e-6);
  CHECK(testing::rel(s.at("Ry").get<double>(), 0.098) < 1e-6);
}

}
