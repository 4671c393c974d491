#include "rydspec/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "rydspec/constants.hpp"
#include "rydspec/error.hpp"
#include "rydspec/lineshapes.hpp"
#include "rydspec/peaks.hpp"

namespace rydspec {

namespace {

double percentile(std::span<const double> y, double fraction) {
  std::vector<double> v(y.begin(), y.end());
  auto k = static_cast<std::size_t>(fraction * static_cast<double>(v.size() - 1));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

double value_at(const Spectrum& s, double e) {
  const auto x = s.axis().values();
  auto it = std::lower_bound(x.begin(), x.end(), e);
  if (it == x.end()) return s.counts().back();
  return s.counts()[static_cast<std::size_t>(it - x.begin())];
}

// User bounds win over the defaults a fitting routine proposes.
void propose_bound(FitConfig& cfg, const std::string& name, Bound b) {
  cfg.bounds.emplace(name, b);
}

double clamp_into(double v, const Bound& b) { return std::clamp(v, b.lower, b.upper); }

}  // namespace

FitResult fit_yellow_series(const Spectrum& data, QuantumRange n_range, const FitConfig& cfg,
                            const SeriesPrior& prior) {
  if (n_range.first < 2 || n_range.last < n_range.first) {
    throw PreconditionError(fmt::format("invalid quantum number range {}..{}", n_range.first, n_range.last));
  }
  const auto& axis = data.axis();
  const auto counts = data.counts();
  const double span = axis.back() - axis.front();
  const double base = percentile(counts, 0.1);
  const double top = *std::max_element(counts.begin(), counts.end());
  const double range = std::max(top - base, 0.0);
  const double noise = estimate_noise(counts);

  std::vector<int> ns;
  std::vector<double> predicted;
  for (int n = n_range.first; n <= n_range.last; ++n) {
    ns.push_back(n);
    predicted.push_back(rydberg_energy(n, prior.E_g, prior.Ry));
  }
  double min_gap = span;
  for (std::size_t k = 1; k < predicted.size(); ++k) min_gap = std::min(min_gap, predicted[k] - predicted[k - 1]);

  std::vector<PeakGuess> peaks;
  if (range > 0.0) {
    const double min_prominence = std::max(5.0 * noise, 0.02 * range);
    const double min_separation = std::max(3.0 * axis.spacing(), 0.3 * min_gap);
    peaks = detect_peaks(data, min_prominence, min_separation);
  }

  // Greedy nearest-center assignment; ties resolved toward lower n.
  std::vector<std::tuple<double, int, std::size_t>> pairs;
  for (std::size_t a = 0; a < ns.size(); ++a) {
    for (std::size_t p = 0; p < peaks.size(); ++p) {
      pairs.emplace_back(std::abs(peaks[p].center - predicted[a]), ns[a], p);
    }
  }
  std::sort(pairs.begin(), pairs.end());
  std::map<int, std::size_t> assigned;
  std::set<std::size_t> used;
  for (const auto& [dist, n, p] : pairs) {
    if (assigned.count(n) || used.count(p)) continue;
    assigned[n] = p;
    used.insert(p);
  }

  const double floor_height = std::max({noise, 1e-6 * range, 1e-12});
  FitConfig fit_cfg = cfg;
  CompositeModel model;
  model.baseline = std::max(base, 0.0);
  auto add_line = [&](std::optional<int> n, double center, double width, double height) {
    FanoParams p;
    p.E_n = std::clamp(center, axis.front(), axis.back());
    p.Gamma_n = std::clamp(width, 1e-9, span);
    p.f_n = std::max(height, floor_height) * p.Gamma_n / 2.0;
    p.q_n = 0.0;
    model.fano_lines.push_back({n, p});
  };
  for (std::size_t a = 0; a < ns.size(); ++a) {
    const int n = ns[a];
    if (auto it = assigned.find(n); it != assigned.end()) {
      const auto& pk = peaks[it->second];
      add_line(n, pk.center, pk.width_estimate, pk.height - base);
    } else {
      add_line(n, predicted[a], linewidth_scaling(n, prior.alpha, prior.beta), value_at(data, predicted[a]) - base);
    }
  }
  if (cfg.extra_lines) {
    for (std::size_t p = 0; p < peaks.size(); ++p) {
      if (!used.count(p)) add_line(std::nullopt, peaks[p].center, peaks[p].width_estimate, peaks[p].height - base);
    }
  }

  // Default search box: centers stay inside the window, widths below its span.
  const ParameterLayout layout(model);
  for (const auto& info : layout.infos()) {
    if (info.kind == ParamKind::center) propose_bound(fit_cfg, info.name, {axis.front(), axis.back()});
    if (info.kind == ParamKind::width) propose_bound(fit_cfg, info.name, {1e-9, span});
  }
  auto x0 = layout.pack(model);
  for (std::size_t j = 0; j < x0.size(); ++j) {
    if (auto it = fit_cfg.bounds.find(layout.info(j).name); it != fit_cfg.bounds.end()) {
      x0[j] = clamp_into(x0[j], it->second);
    }
  }
  auto result = least_squares_fit(layout.unpack(x0), data, fit_cfg);

  // Flag the top line when it crowds the band edge or the next, unmodelled level.
  const FanoLine* top_line = result.params.find_line(n_range.last);
  if (top_line != nullptr) {
    const double e = top_line->params.E_n;
    const double g3 = 3.0 * top_line->params.Gamma_n;
    const double next = rydberg_energy(n_range.last + 1, prior.E_g, prior.Ry);
    if (std::abs(e - prior.E_g) < g3 || std::abs(e - next) < g3) {
      result.flags.push_back(fmt::format("fano{}.Gamma unreliable: center within 3 linewidths of E_g or the {}p prediction",
                                         n_range.last, n_range.last + 1));
    }
  }
  return result;
}

namespace {

// Roots u_lo < 1/2 < u_hi of sqrt(u) exp(-u) = g(1/2) / 2.
std::pair<double, double> tail_half_maximum_roots() {
  auto g = [](double u) { return std::sqrt(u) * std::exp(-u); };
  const double half = 0.5 * g(0.5);
  auto bisect = [&](double lo, double hi, bool rising) {
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      if ((g(mid) < half) == rising) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
  };
  return {bisect(0.0, 0.5, true), bisect(0.5, 20.0, false)};
}

}  // namespace

FitResult fit_phonon_temperature(const Spectrum& data_in, const FitConfig& cfg, const PhononFitOptions& options) {
  const Spectrum data = data_in.axis().is_uniform() ? data_in : resample_uniform(data_in, data_in.size());
  const auto& axis = data.axis();
  const auto e = axis.values();
  const auto counts = data.counts();
  const double span = axis.back() - axis.front();
  const double base = std::max(percentile(counts, 0.1), 0.0);
  const double top = *std::max_element(counts.begin(), counts.end());
  if (!(top > 0.0) || std::all_of(counts.begin(), counts.end(), [&](double c) { return c < 3.0 * base; })) {
    throw InitializationError("phonon window does not contain the tail onset: all counts are below 3x the baseline");
  }
  const double noise = estimate_noise(counts);

  CompositeModel model;
  model.baseline = base;
  std::vector<double> y(counts.begin(), counts.end());
  for (auto& v : y) v -= base;

  if (options.include_1s_line) {
    const double range = top - base;
    auto peaks = detect_peaks(data, std::max(5.0 * noise, 0.05 * range), 3.0 * axis.spacing());
    if (peaks.empty()) throw InitializationError("no sharp 1s line found in the phonon window");
    double strongest = 0.0;
    for (const auto& p : peaks) strongest = std::max(strongest, p.prominence);
    const PeakGuess* sharp = nullptr;
    for (const auto& p : peaks) {
      if (p.prominence >= 0.2 * strongest && (sharp == nullptr || p.width_estimate < sharp->width_estimate)) sharp = &p;
    }
    LorentzParams l{sharp->center, std::clamp(sharp->width_estimate, 1e-9, span), std::max(sharp->prominence, 1e-12)};
    model.lorentz_lines.push_back(l);
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double half = l.Gamma / 2.0;
      const double x = e[i] - l.E_0;
      y[i] -= l.amplitude * half * half / (x * x + half * half);
    }
  }

  const auto smooth = moving_average5(y);
  const auto peak_it = std::max_element(smooth.begin(), smooth.end());
  const auto ipk = static_cast<std::size_t>(peak_it - smooth.begin());
  const double peak = *peak_it;
  if (!(peak > 0.0)) throw InitializationError("no phonon band above the baseline");
  std::optional<double> left;
  for (std::size_t j = ipk; j > 0; --j) {
    if (smooth[j - 1] < 0.5 * peak) {
      left = e[j - 1] + (0.5 * peak - smooth[j - 1]) / (smooth[j] - smooth[j - 1]) * (e[j] - e[j - 1]);
      break;
    }
  }
  std::optional<double> right;
  for (std::size_t j = ipk; j + 1 < smooth.size(); ++j) {
    if (smooth[j + 1] < 0.5 * peak) {
      right = e[j] + (smooth[j] - 0.5 * peak) / (smooth[j] - smooth[j + 1]) * (e[j + 1] - e[j]);
      break;
    }
  }
  if (!left) throw InitializationError("phonon band onset lies outside the window");

  const auto [u_lo, u_hi] = tail_half_maximum_roots();
  const double sigma0 = options.fixed_sigma.value_or(options.sigma_guess);
  double kt;
  if (right) {
    const double observed = *right - *left;
    const double irf_fwhm = 2.0 * std::sqrt(2.0 * std::log(2.0)) * sigma0;
    const double intrinsic = std::sqrt(std::max(observed * observed - irf_fwhm * irf_fwhm, 0.25 * observed * observed));
    kt = intrinsic / (u_hi - u_lo);
  } else {
    kt = (e[ipk] - *left) / (0.5 - u_lo);
  }
  const double T0 = std::clamp(kt / PhysicalConstants::k_B, 1.0, 400.0);
  kt = PhysicalConstants::k_B * T0;
  PhononTailParams tail;
  tail.E_i = *left - u_lo * kt;
  tail.T_eff = T0;
  tail.A = peak / (std::sqrt(0.5 * kt) * std::exp(-0.5));
  model.phonon_tails.push_back(tail);
  model.irf.sigma = sigma0;

  FitConfig fit_cfg = cfg;
  propose_bound(fit_cfg, "tail0.T_eff", {1.0, 400.0});
  propose_bound(fit_cfg, "tail0.E_i", {axis.front() - span, axis.back()});
  propose_bound(fit_cfg, "irf.sigma", {0.0, 0.25 * span});
  if (!model.lorentz_lines.empty()) {
    propose_bound(fit_cfg, "lorentz0.E0", {axis.front(), axis.back()});
    propose_bound(fit_cfg, "lorentz0.Gamma", {1e-9, span});
  }
  if (options.fixed_sigma) {
    IRFParams{*options.fixed_sigma}.validate();
    fit_cfg.fixed.insert("irf.sigma");
  }
  return least_squares_fit(model, data, fit_cfg);
}

namespace {

void require_distinct(std::span<const SeriesPoint> pts, const char* what) {
  std::set<int> ns;
  for (const auto& p : pts) {
    if (!std::isfinite(p.value)) throw PreconditionError(fmt::format("{}: non-finite value for n={}", what, p.n));
    ns.insert(p.n);
  }
  if (ns.size() < 3) {
    throw PreconditionError(fmt::format("{} fit needs at least 3 distinct n values, got {}", what, ns.size()));
  }
}

// Inverse standard deviations, or all ones when any uncertainty is unusable.
std::pair<std::vector<double>, bool> inverse_sigmas(std::span<const SeriesPoint> pts) {
  std::vector<double> w(pts.size(), 1.0);
  for (const auto& p : pts) {
    if (!(p.uncertainty > 0.0) || !std::isfinite(p.uncertainty)) return {w, false};
  }
  for (std::size_t i = 0; i < pts.size(); ++i) w[i] = 1.0 / pts[i].uncertainty;
  return {w, true};
}

}  // namespace

LinewidthScalingFit fit_linewidth_scaling(std::span<const SeriesPoint> linewidths) {
  require_distinct(linewidths, "linewidth");
  const auto [w, absolute] = inverse_sigmas(linewidths);
  const auto m = static_cast<Eigen::Index>(linewidths.size());
  Eigen::MatrixXd A(m, 2);
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& pt = linewidths[static_cast<std::size_t>(i)];
    const double n = pt.n;
    A(i, 0) = w[static_cast<std::size_t>(i)] * (n * n - 1.0) / std::pow(n, 5);
    A(i, 1) = w[static_cast<std::size_t>(i)];
    b[i] = w[static_cast<std::size_t>(i)] * pt.value;
  }

  // Non-negative solution: unconstrained if feasible, else the best
  // single-coefficient fit.
  Eigen::Vector2d coef = A.colPivHouseholderQr().solve(b);
  if (coef[0] < 0.0 || coef[1] < 0.0) {
    Eigen::Vector2d best = Eigen::Vector2d::Zero();
    double best_cost = b.squaredNorm();
    for (int keep = 0; keep < 2; ++keep) {
      const double denom = A.col(keep).squaredNorm();
      const double c = denom > 0.0 ? std::max(A.col(keep).dot(b) / denom, 0.0) : 0.0;
      Eigen::Vector2d trial = Eigen::Vector2d::Zero();
      trial[keep] = c;
      const double cost = (A * trial - b).squaredNorm();
      if (cost < best_cost) {
        best_cost = cost;
        best = trial;
      }
    }
    coef = best;
  }

  LinewidthScalingFit out;
  out.alpha = coef[0];
  out.beta = coef[1];
  out.cost = (A * coef - b).squaredNorm();
  const Eigen::Matrix2d normal = A.transpose() * A;
  Eigen::FullPivLU<Eigen::Matrix2d> lu(normal);
  if (lu.isInvertible()) {
    Eigen::Matrix2d cov = lu.inverse();
    if (!absolute) {
      if (m > 2) cov *= out.cost / static_cast<double>(m - 2);
      else cov.setConstant(std::numeric_limits<double>::quiet_NaN());
    }
    if (cov.allFinite()) {
      out.alpha_uncertainty = std::sqrt(std::max(cov(0, 0), 0.0));
      out.beta_uncertainty = std::sqrt(std::max(cov(1, 1), 0.0));
    }
  }
  return out;
}

SeriesScaling fit_series_scaling(std::span<const SeriesPoint> energies, std::span<const SeriesPoint> linewidths) {
  require_distinct(energies, "energy");
  const auto [w, absolute] = inverse_sigmas(energies);
  const bool has_2p = std::any_of(energies.begin(), energies.end(), [](const SeriesPoint& p) { return p.n == 2; });
  for (const auto& p : energies) {
    if (p.n < 2) throw DomainError(fmt::format("principal quantum number {} is below 2", p.n));
  }

  // Seed E_g and Ry from the defect-free linear problem.
  const auto m = static_cast<Eigen::Index>(energies.size());
  Eigen::MatrixXd A(m, 2);
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& pt = energies[static_cast<std::size_t>(i)];
    const double wi = w[static_cast<std::size_t>(i)];
    A(i, 0) = wi;
    A(i, 1) = -wi / (double(pt.n) * double(pt.n));
    b[i] = wi * pt.value;
  }
  const Eigen::Vector2d seed = A.colPivHouseholderQr().solve(b);

  BoundedProblem problem;
  problem.n_residuals = energies.size();
  problem.bounds = {Bound{}, Bound{1e-12, std::numeric_limits<double>::infinity()}, Bound{-1.0, 1.9}};
  problem.free = {true, true, has_2p};
  problem.residuals = [&](std::span<const double> x, std::span<double> r) {
    for (std::size_t i = 0; i < energies.size(); ++i) {
      const auto& pt = energies[i];
      const double n_eff = pt.n - (pt.n == 2 ? x[2] : 0.0);
      r[i] = w[i] * (x[0] - x[1] / (n_eff * n_eff) - pt.value);
    }
  };
  problem.jacobian = [&](std::span<const double> x, std::span<double> jac) {
    const std::size_t rows = energies.size();
    for (std::size_t i = 0; i < rows; ++i) {
      const auto& pt = energies[i];
      const bool is2 = pt.n == 2;
      const double n_eff = pt.n - (is2 ? x[2] : 0.0);
      jac[i] = w[i];
      jac[rows + i] = -w[i] / (n_eff * n_eff);
      jac[2 * rows + i] = is2 ? -2.0 * w[i] * x[1] / (n_eff * n_eff * n_eff) : 0.0;
    }
  };
  problem.scales = [](std::span<const double> x) {
    return std::vector<double>{std::abs(x[0]), std::abs(x[1]), 1.0};
  };
  SolverOptions opts;
  opts.max_iterations = 500;
  opts.tolerance_cost = 1e-15;
  opts.tolerance_step = 1e-15;
  opts.scale_covariance = !absolute;
  const auto rep = solve_least_squares(problem, {seed[0], std::max(seed[1], 1e-6), 0.0}, opts);

  SeriesScaling out;
  out.E_g = rep.x[0];
  out.Ry = rep.x[1];
  out.defect_fitted = has_2p;
  for (const auto& p : energies) out.defects[p.n] = (p.n == 2) ? rep.x[2] : 0.0;
  out.energy_cost = rep.cost;
  if (rep.std_errors) {
    out.uncertainties.E_g = (*rep.std_errors)[0];
    out.uncertainties.Ry = (*rep.std_errors)[1];
    if (has_2p) out.uncertainties.delta_2 = (*rep.std_errors)[2];
  }

  const auto lw = fit_linewidth_scaling(linewidths);
  out.alpha = lw.alpha;
  out.beta = lw.beta;
  out.uncertainties.alpha = lw.alpha_uncertainty;
  out.uncertainties.beta = lw.beta_uncertainty;
  out.linewidth_cost = lw.cost;
  return out;
}

}  // namespace rydspec
