#include "rydspec/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "rydspec/detail/evaluate.hpp"
#include "rydspec/error.hpp"

namespace rydspec {

namespace {

void check(bool ok, const std::string& what) {
  if (!ok) throw PreconditionError(what);
}

bool finite_all(std::initializer_list<double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void CompositeModel::validate_structure() const {
  check(component_count() > 0, "composite model needs at least one component");
  std::set<int> tags;
  for (const auto& line : fano_lines) {
    const auto& p = line.params;
    check(finite_all({p.E_n, p.Gamma_n, p.f_n, p.q_n}), "Fano parameters must be finite");
    check(p.Gamma_n > 0.0, "Fano linewidth must be positive");
    check(p.f_n >= 0.0, "Fano scale factor must be non-negative");
    if (line.n) {
      check(*line.n >= 2, fmt::format("principal quantum number {} is below 2", *line.n));
      check(tags.insert(*line.n).second, fmt::format("principal quantum number {} appears twice", *line.n));
    }
  }
  for (const auto& p : lorentz_lines) {
    check(finite_all({p.E_0, p.Gamma, p.amplitude}), "Lorentzian parameters must be finite");
    check(p.Gamma > 0.0, "Lorentzian linewidth must be positive");
    check(p.amplitude >= 0.0, "Lorentzian amplitude must be non-negative");
  }
  for (const auto& p : phonon_tails) {
    check(finite_all({p.E_i, p.T_eff, p.A}), "phonon tail parameters must be finite");
    check(p.T_eff > 0.0, "effective temperature must be positive");
    check(p.A >= 0.0, "phonon tail scale must be non-negative");
  }
  irf.validate();
  check(std::isfinite(baseline) && baseline >= 0.0, "baseline must be finite and non-negative");
}

void CompositeModel::validate() const {
  validate_structure();
  for (const auto& line : fano_lines) line.params.validate();
  for (const auto& p : lorentz_lines) p.validate();
  for (const auto& p : phonon_tails) p.validate();
}

const FanoLine* CompositeModel::find_line(int n) const noexcept {
  for (const auto& line : fano_lines) {
    if (line.n && *line.n == n) return &line;
  }
  return nullptr;
}

std::vector<double> evaluate(const CompositeModel& m, const EnergyAxis& axis) {
  m.validate_structure();
  return detail::evaluate_model<double>(m, axis);
}

Spectrum eval_composite(const CompositeModel& m, const EnergyAxis& axis) {
  auto values = evaluate(m, axis);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < 0.0) {
      throw DomainError(fmt::format("model is negative ({}) at E = {} eV", values[i], axis[i]));
    }
  }
  return Spectrum(axis, std::move(values));
}

std::vector<ComponentCurve> evaluate_components(const CompositeModel& m, const EnergyAxis& axis) {
  m.validate_structure();
  std::vector<ComponentCurve> curves;
  std::size_t untagged = 0;
  for (const auto& line : m.fano_lines) {
    std::vector<double> v(axis.size());
    for (std::size_t i = 0; i < axis.size(); ++i) v[i] = detail::fano<double>(line.params, axis[i]);
    curves.push_back({line.n ? fmt::format("fano_{}p", *line.n) : fmt::format("fano_extra{}", untagged++), std::move(v)});
  }
  for (std::size_t k = 0; k < m.lorentz_lines.size(); ++k) {
    std::vector<double> v(axis.size());
    for (std::size_t i = 0; i < axis.size(); ++i) v[i] = detail::lorentzian<double>(m.lorentz_lines[k], axis[i]);
    curves.push_back({fmt::format("lorentz{}", k), std::move(v)});
  }
  for (std::size_t k = 0; k < m.phonon_tails.size(); ++k) {
    CompositeModel single;
    single.phonon_tails = {m.phonon_tails[k]};
    single.irf = m.irf;
    std::vector<double> v(axis.size(), 0.0);
    detail::add_convolved_tails<double>(single, axis, std::span<double>(v));
    curves.push_back({fmt::format("phonon_tail{}", k), std::move(v)});
  }
  return curves;
}

}  // namespace rydspec
