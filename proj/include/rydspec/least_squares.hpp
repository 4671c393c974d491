#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rydspec/model.hpp"
#include "rydspec/parameters.hpp"
#include "rydspec/spectrum.hpp"

namespace rydspec {

// ---------------------------------------------------------------------------
// Generic bounded nonlinear least squares
// ---------------------------------------------------------------------------

enum class StopReason { exact_fit, cost_tolerance, step_tolerance, max_iterations };

struct SolverOptions {
  int max_iterations = 200;
  double tolerance_cost = 1e-10;  ///< relative cost decrease
  double tolerance_step = 1e-10;  ///< step size relative to each parameter's natural scale
  double relative_step = 1e-6;    ///< finite-difference step relative to the natural scale
  double absolute_step = 1e-12;   ///< finite-difference step floor
  /// Multiply the covariance by cost / (m - p). Off when the residuals are
  /// already normalized by known standard deviations.
  bool scale_covariance = true;
};

/// Residuals r(x) of length `n_residuals`; the solver minimizes sum r^2.
struct BoundedProblem {
  std::size_t n_residuals = 0;
  std::function<void(std::span<const double> x, std::span<double> r)> residuals;
  /// Optional analytic Jacobian, column-major n_residuals x x.size().
  /// Forward differences are used when empty.
  std::function<void(std::span<const double> x, std::span<double> jac)> jacobian;
  /// Natural parameter magnitudes for step sizing; |x| when empty.
  std::function<std::vector<double>(std::span<const double> x)> scales;
  std::vector<Bound> bounds;  ///< one per parameter
  std::vector<bool> free;     ///< one per parameter; false holds it at x0
};

struct SolverReport {
  std::vector<double> x;
  std::vector<double> residuals;
  double initial_cost = 0.0;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  StopReason reason = StopReason::max_iterations;
  /// One-sigma errors from the linearized covariance (0 for held
  /// parameters); absent when the normal matrix is singular.
  std::optional<std::vector<double>> std_errors;
};

/// Levenberg-Marquardt trust-region iteration with box constraints.
///
/// Steps are accepted only when they lower the cost, so the final cost
/// never exceeds the initial one. Parameters sitting on a bound with the
/// gradient pointing outward are held for that iteration; trial points
/// are projected onto the box. Convergence is declared when an accepted
/// step lowers the cost by less than tolerance_cost (relative, both
/// actual and predicted), when the projected step is below
/// tolerance_step in every coordinate, or when the cost reaches zero.
/// Running out of iterations is reported through `converged`, not thrown.
SolverReport solve_least_squares(const BoundedProblem& problem, std::vector<double> x0, const SolverOptions& options);

// ---------------------------------------------------------------------------
// Spectral fits
// ---------------------------------------------------------------------------

enum class Weighting { uniform, poisson };

struct FitConfig {
  int max_iterations = 200;
  double tolerance_cost = 1e-10;
  double tolerance_step = 1e-10;
  /// Overrides of the default physical bounds, keyed by parameter name
  /// (see ParameterLayout).
  std::map<std::string, Bound> bounds;
  /// Parameters held at their initial value.
  std::set<std::string> fixed;
  /// poisson: w = 1 / max(counts, 1). Explicit spectrum weights take
  /// precedence over either choice.
  Weighting weighting = Weighting::poisson;
  /// Let fit_yellow_series add untagged lines for unassigned peaks.
  bool extra_lines = false;

  void validate() const;
  SolverOptions solver_options() const;
};

struct FitResult {
  CompositeModel params;
  std::vector<std::string> names;
  std::vector<double> values;
  std::optional<std::vector<double>> uncertainties;
  std::vector<bool> fixed;
  double initial_cost = 0.0;
  double cost = 0.0;
  int n_iterations = 0;
  bool converged = false;
  StopReason stop_reason = StopReason::max_iterations;
  std::vector<double> residuals;  ///< data - model
  std::vector<std::string> flags;

  std::optional<double> value(std::string_view name) const;
  std::optional<double> uncertainty(std::string_view name) const;
  /// T_eff of the first phonon tail; throws if the model has none.
  double T_eff() const;
};

/// Weighted least-squares fit of `model0` to `data`.
FitResult least_squares_fit(const CompositeModel& model0, const Spectrum& data, const FitConfig& cfg = {});

/// Forward-difference Jacobians of the model at relative steps 1e-5 and
/// 1e-7 (of each parameter's natural scale), compared column by column.
/// Returns max over parameters of ||J_a - J_b|| / ||J_a||. Parameters at a
/// default bound are differenced one-sidedly into the feasible side.
double jacobian_check(const CompositeModel& model, const EnergyAxis& axis);

/// Per-parameter disagreement, in ParameterLayout order; 0 for columns
/// that vanish identically.
std::vector<double> jacobian_check_columns(const CompositeModel& model, const EnergyAxis& axis);

const char* to_string(StopReason r) noexcept;

}  // namespace rydspec
