#include "rydspec/least_squares.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "rydspec/detail/evaluate.hpp"
#include "rydspec/error.hpp"

namespace rydspec {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double sum_squares(std::span<const double> r) {
  double s = 0.0;
  for (double v : r) s += v * v;
  return s;
}

bool all_finite(std::span<const double> r) {
  return std::all_of(r.begin(), r.end(), [](double v) { return std::isfinite(v); });
}

class Solver {
 public:
  Solver(const BoundedProblem& problem, const SolverOptions& options)
      : problem_(problem), options_(options), m_(problem.n_residuals) {}

  SolverReport run(std::vector<double> x) {
    const std::size_t n = x.size();
    if (problem_.bounds.size() != n || problem_.free.size() != n) {
      throw PreconditionError("bounds and free mask must match the parameter count");
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (problem_.free[j]) free_.push_back(j);
      const auto& b = problem_.bounds[j];
      if (problem_.free[j] && !(x[j] >= b.lower && x[j] <= b.upper)) {
        throw PreconditionError(fmt::format("initial parameter {} = {} lies outside [{}, {}]", j, x[j], b.lower, b.upper));
      }
    }
    const std::size_t p = free_.size();

    SolverReport rep;
    std::vector<double> r(m_);
    problem_.residuals(x, r);
    if (!all_finite(r)) throw PreconditionError("residuals are not finite at the initial point");
    double cost = sum_squares(r);
    rep.initial_cost = cost;

    MatrixXd J(m_, p);
    double lambda = 1e-3;
    double nu = 2.0;
    VectorXd diag_scale = VectorXd::Zero(static_cast<Eigen::Index>(p));

    auto finish = [&](bool converged, StopReason reason, int iterations) {
      rep.x = x;
      rep.residuals = r;
      rep.cost = cost;
      rep.iterations = iterations;
      rep.converged = converged;
      rep.reason = reason;
      if (p > 0) {
        jacobian(x, r, J);
        rep.std_errors = std_errors(J, cost, n);
      } else {
        rep.std_errors = std::vector<double>(n, 0.0);
      }
      return rep;
    };

    if (cost == 0.0) return finish(true, StopReason::exact_fit, 0);
    if (p == 0) return finish(true, StopReason::step_tolerance, 0);

    jacobian(x, r, J);
    const Eigen::Map<const VectorXd> rv0(r.data(), static_cast<Eigen::Index>(m_));
    VectorXd g = J.transpose() * rv0;
    MatrixXd A = J.transpose() * J;

    std::vector<double> trial(n);
    std::vector<double> r_trial(m_);
    for (int it = 1; it <= options_.max_iterations; ++it) {
      for (std::size_t k = 0; k < p; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        diag_scale[kk] = std::max(diag_scale[kk], A(kk, kk));
      }

      // Hold parameters pinned against a bound by the gradient.
      std::vector<Eigen::Index> active;
      for (std::size_t k = 0; k < p; ++k) {
        const std::size_t j = free_[k];
        const auto& b = problem_.bounds[j];
        const double gk = g[static_cast<Eigen::Index>(k)];
        const bool pinned = (x[j] <= b.lower && gk > 0.0) || (x[j] >= b.upper && gk < 0.0);
        if (!pinned) active.push_back(static_cast<Eigen::Index>(k));
      }

      VectorXd step = VectorXd::Zero(static_cast<Eigen::Index>(p));
      if (!active.empty()) {
        const auto q = static_cast<Eigen::Index>(active.size());
        MatrixXd Ar(q, q);
        VectorXd gr(q);
        for (Eigen::Index a = 0; a < q; ++a) {
          gr[a] = g[active[a]];
          for (Eigen::Index b = 0; b < q; ++b) Ar(a, b) = A(active[a], active[b]);
          const double d = diag_scale[active[a]] > 0.0 ? diag_scale[active[a]] : 1.0;
          Ar(a, a) += lambda * d;
        }
        Eigen::LDLT<MatrixXd> ldlt(Ar);
        VectorXd sr = ldlt.solve(-gr);
        if (ldlt.info() != Eigen::Success || !sr.allFinite()) {
          lambda *= 10.0;
          continue;
        }
        for (Eigen::Index a = 0; a < q; ++a) step[active[a]] = sr[a];
      }

      // Project the trial point onto the box.
      trial = x;
      VectorXd projected(static_cast<Eigen::Index>(p));
      const auto scales = natural_scales(x);
      double rel_step = 0.0;
      for (std::size_t k = 0; k < p; ++k) {
        const std::size_t j = free_[k];
        const auto& b = problem_.bounds[j];
        trial[j] = std::clamp(x[j] + step[static_cast<Eigen::Index>(k)], b.lower, b.upper);
        projected[static_cast<Eigen::Index>(k)] = trial[j] - x[j];
        const double s = scales[j] > 0.0 ? scales[j] : 1.0;
        rel_step = std::max(rel_step, std::abs(trial[j] - x[j]) / s);
      }
      if (rel_step == 0.0) return finish(true, StopReason::step_tolerance, it);

      const Eigen::Map<const VectorXd> rv(r.data(), static_cast<Eigen::Index>(m_));
      const double predicted = cost - (rv + J * projected).squaredNorm();

      problem_.residuals(trial, r_trial);
      const double trial_cost = all_finite(r_trial) ? sum_squares(r_trial) : std::numeric_limits<double>::infinity();

      if (trial_cost < cost) {
        const double actual = cost - trial_cost;
        const double rho = predicted > 0.0 ? actual / predicted : 0.0;
        const double old_cost = cost;
        x = trial;
        r = r_trial;
        cost = trial_cost;
        if (cost == 0.0) return finish(true, StopReason::exact_fit, it);
        if (actual <= options_.tolerance_cost * old_cost && predicted <= options_.tolerance_cost * old_cost) {
          return finish(true, StopReason::cost_tolerance, it);
        }
        if (rel_step <= options_.tolerance_step) return finish(true, StopReason::step_tolerance, it);

        jacobian(x, r, J);
        const Eigen::Map<const VectorXd> rv_new(r.data(), static_cast<Eigen::Index>(m_));
        g = J.transpose() * rv_new;
        A = J.transpose() * J;
        const double t = 2.0 * rho - 1.0;
        lambda *= std::max(1.0 / 3.0, 1.0 - t * t * t);
        nu = 2.0;
      } else {
        if (rel_step <= options_.tolerance_step) return finish(true, StopReason::step_tolerance, it);
        lambda *= nu;
        nu *= 2.0;
      }
    }
    return finish(false, StopReason::max_iterations, options_.max_iterations);
  }

 private:
  std::vector<double> natural_scales(std::span<const double> x) const {
    if (problem_.scales) return problem_.scales(x);
    std::vector<double> s(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) s[j] = std::abs(x[j]);
    return s;
  }

  void jacobian(const std::vector<double>& x, const std::vector<double>& r, MatrixXd& J) const {
    const std::size_t n = x.size();
    if (problem_.jacobian) {
      std::vector<double> full(m_ * n);
      problem_.jacobian(x, full);
      const Eigen::Map<const MatrixXd> F(full.data(), static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(n));
      for (std::size_t k = 0; k < free_.size(); ++k) {
        J.col(static_cast<Eigen::Index>(k)) = F.col(static_cast<Eigen::Index>(free_[k]));
      }
      return;
    }
    const auto scales = natural_scales(x);
    std::vector<double> xp = x;
    std::vector<double> rp(m_);
    for (std::size_t k = 0; k < free_.size(); ++k) {
      const std::size_t j = free_[k];
      const auto& b = problem_.bounds[j];
      const double h = std::max(options_.relative_step * scales[j], options_.absolute_step);
      xp[j] = x[j] + h;
      if (xp[j] > b.upper) xp[j] = x[j] - h;
      const double h_eff = xp[j] - x[j];
      problem_.residuals(xp, rp);
      for (std::size_t i = 0; i < m_; ++i) {
        J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = (rp[i] - r[i]) / h_eff;
      }
      xp[j] = x[j];
    }
  }

  std::optional<std::vector<double>> std_errors(const MatrixXd& J, double cost, std::size_t n) const {
    const auto p = static_cast<Eigen::Index>(free_.size());
    MatrixXd A = J.transpose() * J;
    VectorXd d = A.diagonal();
    if ((d.array() <= 0.0).any() || !A.allFinite()) return std::nullopt;
    VectorXd inv_sqrt = d.array().sqrt().inverse();
    MatrixXd corr = inv_sqrt.asDiagonal() * A * inv_sqrt.asDiagonal();
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(corr);
    if (eig.info() != Eigen::Success) return std::nullopt;
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 1e-13 * hi)) return std::nullopt;
    double s2 = 1.0;
    if (options_.scale_covariance) {
      if (m_ <= free_.size()) return std::nullopt;
      s2 = cost / static_cast<double>(m_ - free_.size());
    }
    const MatrixXd corr_inv =
        eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
    std::vector<double> out(n, 0.0);
    for (Eigen::Index k = 0; k < p; ++k) {
      const double var = corr_inv(k, k) * inv_sqrt[k] * inv_sqrt[k] * s2;
      out[free_[static_cast<std::size_t>(k)]] = std::sqrt(std::max(var, 0.0));
    }
    return out;
  }

  const BoundedProblem& problem_;
  const SolverOptions& options_;
  std::size_t m_;
  std::vector<std::size_t> free_;
};

std::vector<double> fit_weights(const Spectrum& data, Weighting weighting) {
  if (data.weights()) return *data.weights();
  std::vector<double> w(data.size(), 1.0);
  if (weighting == Weighting::poisson) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 1.0 / std::max(data.counts()[i], 1.0);
  }
  return w;
}

}  // namespace

SolverReport solve_least_squares(const BoundedProblem& problem, std::vector<double> x0, const SolverOptions& options) {
  if (!problem.residuals) throw PreconditionError("least-squares problem has no residual function");
  Solver solver(problem, options);
  return solver.run(std::move(x0));
}

void FitConfig::validate() const {
  if (max_iterations < 1) throw PreconditionError("max_iterations must be at least 1");
  if (!(tolerance_cost > 0.0) || !(tolerance_step > 0.0)) throw PreconditionError("fit tolerances must be positive");
  for (const auto& [name, b] : bounds) {
    if (!(b.lower < b.upper)) throw PreconditionError(fmt::format("bound for {} has lower >= upper", name));
  }
}

SolverOptions FitConfig::solver_options() const {
  SolverOptions o;
  o.max_iterations = max_iterations;
  o.tolerance_cost = tolerance_cost;
  o.tolerance_step = tolerance_step;
  return o;
}

std::optional<double> FitResult::value(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return values[i];
  }
  return std::nullopt;
}

std::optional<double> FitResult::uncertainty(std::string_view name) const {
  if (!uncertainties) return std::nullopt;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return (*uncertainties)[i];
  }
  return std::nullopt;
}

double FitResult::T_eff() const {
  if (params.phonon_tails.empty()) throw PreconditionError("fit has no phonon tail");
  return params.phonon_tails.front().T_eff;
}

FitResult least_squares_fit(const CompositeModel& model0, const Spectrum& data, const FitConfig& cfg) {
  cfg.validate();
  model0.validate();
  const ParameterLayout layout(model0);
  const std::size_t n = layout.size();

  BoundedProblem problem;
  problem.n_residuals = data.size();
  problem.bounds.resize(n);
  problem.free.assign(n, true);
  for (std::size_t j = 0; j < n; ++j) problem.bounds[j] = layout.info(j).bound;
  for (const auto& [name, b] : cfg.bounds) {
    const auto j = layout.index_of(name);
    if (!j) throw PreconditionError(fmt::format("bound given for unknown parameter '{}'", name));
    problem.bounds[*j] = b;
  }
  for (const auto& name : cfg.fixed) {
    const auto j = layout.index_of(name);
    if (!j) throw PreconditionError(fmt::format("unknown fixed parameter '{}'", name));
    problem.free[*j] = false;
  }
  // The IRF only acts on phonon tails; without one its column is zero.
  if (model0.phonon_tails.empty()) problem.free[*layout.index_of("irf.sigma")] = false;
  const bool needs_uniform = !model0.phonon_tails.empty() &&
                             (model0.irf.sigma > 0.0 || problem.free[*layout.index_of("irf.sigma")]);
  if (needs_uniform && !data.axis().is_uniform()) {
    throw PreconditionError("phonon-tail fits need a uniform energy axis; call resample_uniform first");
  }

  std::vector<double> sqrt_w = fit_weights(data, cfg.weighting);
  for (auto& w : sqrt_w) w = std::sqrt(w);
  const auto& axis = data.axis();
  const auto counts = data.counts();
  problem.residuals = [&](std::span<const double> x, std::span<double> r) {
    const auto model = detail::evaluate_model<double>(layout.unpack(x), axis);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = sqrt_w[i] * (model[i] - counts[i]);
  };
  problem.scales = [&](std::span<const double> x) { return layout.natural_scales(x); };

  const auto rep = solve_least_squares(problem, layout.pack(model0), cfg.solver_options());

  FitResult out;
  out.params = layout.unpack(rep.x);
  for (std::size_t j = 0; j < n; ++j) out.names.push_back(layout.info(j).name);
  out.values = rep.x;
  out.uncertainties = rep.std_errors;
  out.fixed.resize(n);
  for (std::size_t j = 0; j < n; ++j) out.fixed[j] = !problem.free[j];
  out.initial_cost = rep.initial_cost;
  out.cost = rep.cost;
  out.n_iterations = rep.iterations;
  out.converged = rep.converged;
  out.stop_reason = rep.reason;
  const auto model = detail::evaluate_model<double>(out.params, axis);
  out.residuals.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.residuals[i] = counts[i] - model[i];
  if (!out.converged) out.flags.push_back("not converged: iteration limit reached");
  return out;
}

std::vector<double> jacobian_check_columns(const CompositeModel& model, const EnergyAxis& axis) {
  using Real = long double;
  const ParameterLayout layout(model);
  const auto x = layout.pack(model);
  const auto scales = layout.natural_scales(x);
  const auto f0 = detail::evaluate_model<Real>(model, axis);

  auto column = [&](std::size_t j, double rel) {
    const auto& b = layout.info(j).bound;
    const double h = std::max(rel * scales[j], 1e-12);
    auto xp = x;
    xp[j] = x[j] + h;
    if (xp[j] > b.upper) xp[j] = x[j] - h;
    const Real h_eff = Real(xp[j]) - Real(x[j]);
    const auto f = detail::evaluate_model<Real>(layout.unpack(xp), axis);
    std::vector<Real> c(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) c[i] = (f[i] - f0[i]) / h_eff;
    return c;
  };

  std::vector<double> out(layout.size(), 0.0);
  for (std::size_t j = 0; j < layout.size(); ++j) {
    const auto a = column(j, 1e-5);
    const auto b = column(j, 1e-7);
    Real diff = 0;
    Real norm_a = 0;
    Real norm_b = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      diff += (a[i] - b[i]) * (a[i] - b[i]);
      norm_a += a[i] * a[i];
      norm_b += b[i] * b[i];
    }
    if (norm_a == 0 && norm_b == 0) continue;
    out[j] = norm_a == 0 ? std::numeric_limits<double>::infinity() : static_cast<double>(std::sqrt(diff / norm_a));
  }
  return out;
}

double jacobian_check(const CompositeModel& model, const EnergyAxis& axis) {
  const auto cols = jacobian_check_columns(model, axis);
  return cols.empty() ? 0.0 : *std::max_element(cols.begin(), cols.end());
}

const char* to_string(StopReason r) noexcept {
  switch (r) {
    case StopReason::exact_fit: return "exact_fit";
    case StopReason::cost_tolerance: return "cost_tolerance";
    case StopReason::step_tolerance: return "step_tolerance";
    case StopReason::max_iterations: return "max_iterations";
  }
  return "unknown";
}

}  // namespace rydspec
