#include <cmath>
#include <random>

#include "doctest.h"
#include "rydspec/error.hpp"
#include "rydspec/least_squares.hpp"
#include "rydspec/peaks.hpp"
#include "support.hpp"

using namespace rydspec;

namespace {

FitConfig tight() {
  FitConfig cfg;
  cfg.max_iterations = 500;
  cfg.tolerance_cost = 1e-15;
  cfg.tolerance_step = 1e-14;
  return cfg;
}

CompositeModel single_fano(double E, double G, double f, double q, double b = 100.0) {
  CompositeModel m;
  m.fano_lines.push_back({2, {E, G, f, q}});
  m.baseline = b;
  return m;
}

}  // namespace

TEST_SUITE("fitting") {

TEST_CASE("detect_peaks on a single Lorentzian") {
  CompositeModel m;
  m.lorentz_lines.push_back({2.033, 4e-4, 5000.0});
  const auto ax = testing::phonon_axis(2000);
  const auto peaks = detect_peaks(eval_composite(m, ax), 100.0, 1e-4);
  REQUIRE(peaks.size() == 1);
  CHECK(std::abs(peaks[0].center - 2.033) <= ax.spacing());
  CHECK(peaks[0].height > 0.0);
  CHECK(peaks[0].width_estimate > 0.0);
}

TEST_CASE("detect_peaks on a flat spectrum") {
  const Spectrum flat(testing::series_axis(500), std::vector<double>(500, 42.0));
  CHECK(detect_peaks(flat, 1.0, 1e-4).empty());
}

TEST_CASE("detect_peaks finds the four series lines") {
  const auto truth = testing::series_truth();
  const auto ax = testing::series_axis();
  // peak SNR ~100 under Poisson noise
  const auto s = testing::noisy(truth, ax, 5);
  const auto peaks = detect_peaks(s, 5.0 * estimate_noise(s.counts()), 3.0 * ax.spacing());
  REQUIRE(peaks.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    // an asymmetric profile peaks above E_n, at g (sqrt(1 + 4q^2) - 1) / 2q with g = Gamma/2
    const auto& p = truth.fano_lines[k].params;
    const double g = 0.5 * p.Gamma_n;
    const double offset = p.q_n == 0.0 ? 0.0 : g * (std::sqrt(1.0 + 4.0 * p.q_n * p.q_n) - 1.0) / (2.0 * p.q_n);
    CHECK(std::abs(peaks[k].center - (p.E_n + offset)) <= 2.0 * ax.spacing());
  }
}

TEST_CASE("detect_peaks lands on E_n for symmetric series lines") {
  SeriesShape shape;
  shape.q = 0.0;
  const auto truth = testing::series_truth(shape);
  const auto ax = testing::series_axis();
  const auto s = testing::noisy(truth, ax, 5);
  const auto peaks = detect_peaks(s, 5.0 * estimate_noise(s.counts()), 3.0 * ax.spacing());
  REQUIRE(peaks.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(std::abs(peaks[k].center - truth.fano_lines[k].params.E_n) <= 2.0 * ax.spacing());
  }
}

TEST_CASE("detect_peaks honours the separation limit") {
  CompositeModel m;
  m.lorentz_lines.push_back({2.0300, 1e-4, 1000.0});
  m.lorentz_lines.push_back({2.0310, 1e-4, 600.0});
  const auto s = eval_composite(m, EnergyAxis::uniform(2.025, 2.036, 1101));
  CHECK(detect_peaks(s, 10.0, 5e-4).size() == 2);
  const auto one = detect_peaks(s, 10.0, 2e-3);
  REQUIRE(one.size() == 1);
  CHECK(std::abs(one[0].center - 2.03) < 2e-5);
}

TEST_CASE("bounded solver: exponential decay") {
  // y = a exp(-k t), a = 3, k = 0.7
  std::vector<double> t, y;
  for (int i = 0; i < 40; ++i) {
    t.push_back(0.1 * i);
    y.push_back(3.0 * std::exp(-0.7 * t.back()));
  }
  BoundedProblem p;
  p.n_residuals = t.size();
  p.residuals = [&](std::span<const double> x, std::span<double> r) {
    for (std::size_t i = 0; i < t.size(); ++i) r[i] = x[0] * std::exp(-x[1] * t[i]) - y[i];
  };
  p.bounds = {Bound{0.0, 10.0}, Bound{0.0, 5.0}};
  p.free = {true, true};

  SUBCASE("unconstrained minimum is reached") {
    const auto rep = solve_least_squares(p, {1.0, 0.1}, SolverOptions{});
    CHECK(rep.converged);
    CHECK(rep.x[0] == doctest::Approx(3.0).epsilon(1e-8));
    CHECK(rep.x[1] == doctest::Approx(0.7).epsilon(1e-8));
    CHECK(rep.cost <= rep.initial_cost);
  }
  SUBCASE("an active bound holds the parameter on the box") {
    p.bounds[1] = Bound{0.0, 0.5};
    const auto rep = solve_least_squares(p, {1.0, 0.1}, SolverOptions{});
    CHECK(rep.converged);
    CHECK(rep.x[1] == 0.5);
    CHECK(rep.x[0] < 3.0);
  }
  SUBCASE("held parameters do not move") {
    p.free = {true, false};
    const auto rep = solve_least_squares(p, {1.0, 0.7}, SolverOptions{});
    CHECK(rep.x[1] == 0.7);
    CHECK(rep.x[0] == doctest::Approx(3.0).epsilon(1e-8));
    REQUIRE(rep.std_errors);
    CHECK((*rep.std_errors)[1] == 0.0);
  }
  SUBCASE("running out of iterations is reported, not thrown") {
    SolverOptions o;
    o.max_iterations = 1;
    const auto rep = solve_least_squares(p, {1.0, 3.0}, o);
    CHECK(!rep.converged);
    CHECK(rep.reason == StopReason::max_iterations);
    CHECK(rep.cost <= rep.initial_cost);
  }
  SUBCASE("start outside the box is refused") {
    CHECK_THROWS_AS(solve_least_squares(p, {11.0, 0.1}, SolverOptions{}), PreconditionError);
  }
}

TEST_CASE("noise-free data at the generating model") {
  const auto truth = testing::series_truth();
  const auto data = eval_composite(truth, testing::series_axis());
  const auto r = least_squares_fit(truth, data);
  CHECK(r.converged);
  double sum_sq = 0;
  for (double c : data.counts()) sum_sq += c * c;
  CHECK(r.cost < 1e-18 * sum_sq);
  const auto x0 = ParameterLayout(truth).pack(truth);
  for (std::size_t j = 0; j < x0.size(); ++j) {
    if (x0[j] == 0.0) {
      CHECK(std::abs(r.values[j]) < 1e-12);
    } else {
      CHECK(testing::rel(r.values[j], x0[j]) < 1e-9);
    }
  }
}

TEST_CASE("start displaced by +3 Gamma converges to the line") {
  const auto truth = single_fano(2.1455, 4.7e-4, 2.35, 0.1);
  const auto data = eval_composite(truth, EnergyAxis::uniform(2.140, 2.151, 1000));
  auto start = truth;
  start.fano_lines[0].params.E_n += 3.0 * 4.7e-4;
  const auto r = least_squares_fit(start, data);
  CHECK(r.converged);
  CHECK(std::abs(r.params.fano_lines[0].params.E_n - 2.1455) < 1e-6);
  CHECK(r.cost <= r.initial_cost);
}

TEST_CASE("cost never increases") {
  const auto truth = testing::series_truth();
  const auto ax = testing::series_axis();
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto data = testing::noisy(truth, ax, 100 + trial);
    auto start = truth;
    for (auto& l : start.fano_lines) {
      l.params.E_n += 2.0 * l.params.Gamma_n * u(rng);
      l.params.Gamma_n *= 1.0 + 0.5 * u(rng);
      l.params.q_n += 0.3 * u(rng);
    }
    FitConfig cfg;
    cfg.max_iterations = 1 + trial * 5;
    const auto r = least_squares_fit(start, data, cfg);
    CHECK(r.cost <= r.initial_cost);
    if (!r.converged) {
      REQUIRE(!r.flags.empty());
      CHECK(r.flags[0].find("not converged") != std::string::npos);
    }
  }
}

TEST_CASE("fit is invariant under rescaling counts") {
  const auto truth = testing::series_truth();
  const auto ax = testing::series_axis();
  const auto data = testing::noisy(truth, ax, 9);
  const double c = 3.7;
  std::vector<double> scaled;
  for (double v : data.counts()) scaled.push_back(c * v);
  auto start = truth;
  for (auto& l : start.fano_lines) l.params.E_n += 0.5 * l.params.Gamma_n;
  auto start_c = start;
  for (auto& l : start_c.fano_lines) l.params.f_n *= c;
  start_c.baseline *= c;

  auto cfg = tight();
  cfg.weighting = Weighting::uniform;
  const auto a = least_squares_fit(start, data, cfg);
  const auto b = least_squares_fit(start_c, Spectrum(ax, scaled), cfg);
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& pa = a.params.fano_lines[k].params;
    const auto& pb = b.params.fano_lines[k].params;
    CHECK(testing::rel(pb.E_n, pa.E_n) < 1e-9);
    CHECK(testing::rel(pb.Gamma_n, pa.Gamma_n) < 1e-9);
    CHECK(testing::rel(pb.q_n, pa.q_n) < 1e-9);
    CHECK(testing::rel(pb.f_n, c * pa.f_n) < 1e-9);
  }
}

TEST_CASE("fit is equivariant under axis translation") {
  const auto truth = testing::series_truth();
  const auto ax = testing::series_axis();
  const auto data = testing::noisy(truth, ax, 21);
  const double delta = 0.0137;
  std::vector<double> moved;
  for (double e : ax.values()) moved.push_back(e + delta);
  auto start = truth;
  for (auto& l : start.fano_lines) l.params.E_n -= 0.4 * l.params.Gamma_n;
  auto start_d = start;
  for (auto& l : start_d.fano_lines) l.params.E_n += delta;

  const auto a = least_squares_fit(start, data, tight());
  const auto b = least_squares_fit(start_d, Spectrum(EnergyAxis(moved), {data.counts().begin(), data.counts().end()}),
                                   tight());
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& pa = a.params.fano_lines[k].params;
    const auto& pb = b.params.fano_lines[k].params;
    CHECK(std::abs((pb.E_n - pa.E_n) - delta) < 1e-9);
    CHECK(testing::rel(pb.Gamma_n, pa.Gamma_n) < 1e-9);
  }
}

TEST_CASE("singular normal equations drop the uncertainties") {
  CompositeModel m;
  m.lorentz_lines.push_back({2.033, 1e-4, 1000.0});
  m.lorentz_lines.push_back({2.033, 1e-4, 1000.0});
  m.baseline = 10.0;
  const auto data = eval_composite(m, EnergyAxis::uniform(2.031, 2.035, 400));
  FitConfig cfg;
  cfg.fixed = {"lorentz0.E0", "lorentz0.Gamma", "lorentz1.E0", "lorentz1.Gamma"};
  const auto r = least_squares_fit(m, data, cfg);
  CHECK(!r.uncertainties);
  CHECK(r.cost <= r.initial_cost);
}

TEST_CASE("unknown parameter names are rejected") {
  const auto m = single_fano(2.1455, 4.7e-4, 2.35, 0.1);
  const auto data = eval_composite(m, EnergyAxis::uniform(2.140, 2.151, 100));
  FitConfig cfg;
  cfg.fixed = {"fano7.E"};
  CHECK_THROWS_AS(least_squares_fit(m, data, cfg), PreconditionError);
  FitConfig bad;
  bad.tolerance_cost = 0.0;
  CHECK_THROWS(least_squares_fit(m, data, bad));
}

TEST_CASE("jacobian_check") {
  SUBCASE("amplitude column of a Lorentzian is exact") {
    CompositeModel m;
    m.lorentz_lines.push_back({2.033, 1e-4, 2e4});
    const auto cols = jacobian_check_columns(m, testing::phonon_axis());
    const auto j = *ParameterLayout(m).index_of("lorentz0.amplitude");
    CHECK(cols[j] < 1e-10);
  }
  SUBCASE("full composite") {
    auto m = testing::series_truth();
    const auto tail = testing::tail_truth(12.07, 1e-4, true);
    m.phonon_tails = tail.phonon_tails;
    m.lorentz_lines = tail.lorentz_lines;
    m.irf = tail.irf;
    const auto ax = EnergyAxis::uniform(nm_to_ev(625.0), nm_to_ev(570.0), 12000);
    CHECK(jacobian_check(m, ax) < 1e-3);
  }
  SUBCASE("parameters sitting on a bound") {
    auto m = testing::tail_truth(12.07, 0.0);
    m.baseline = 0.0;
    const double d = jacobian_check(m, testing::phonon_axis());
    CHECK(std::isfinite(d));
    CHECK(d < 1e-3);
  }
}

}
