#include "rydspec/lineshapes.hpp"

#include <cmath>

#include <fmt/format.h>

#include "rydspec/detail/kernels.hpp"
#include "rydspec/error.hpp"

namespace rydspec {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw PreconditionError(what);
}

template <class Params, class Fn>
std::vector<double> sample(const Params& p, const EnergyAxis& axis, Fn fn) {
  std::vector<double> out(axis.size());
  for (std::size_t i = 0; i < axis.size(); ++i) out[i] = fn(p, axis[i]);
  return out;
}

}  // namespace

void FanoParams::validate() const {
  require(std::isfinite(E_n) && std::isfinite(Gamma_n) && std::isfinite(f_n) && std::isfinite(q_n),
          "Fano parameters must be finite");
  require(Gamma_n > 0.0, "Fano linewidth must be positive");
  require(f_n > 0.0, "Fano scale factor must be positive");
}

void LorentzParams::validate() const {
  require(std::isfinite(E_0) && std::isfinite(Gamma) && std::isfinite(amplitude),
          "Lorentzian parameters must be finite");
  require(Gamma > 0.0, "Lorentzian linewidth must be positive");
  require(amplitude > 0.0, "Lorentzian amplitude must be positive");
}

void PhononTailParams::validate() const {
  require(std::isfinite(E_i) && std::isfinite(T_eff) && std::isfinite(A), "phonon tail parameters must be finite");
  require(T_eff > 0.0, "effective temperature must be positive");
  require(A > 0.0, "phonon tail scale must be positive");
}

std::vector<double> eval_fano(const FanoParams& p, const EnergyAxis& axis) {
  p.validate();
  return sample(p, axis, detail::fano<double>);
}

std::vector<double> eval_lorentzian(const LorentzParams& p, const EnergyAxis& axis) {
  p.validate();
  return sample(p, axis, detail::lorentzian<double>);
}

std::vector<double> eval_phonon_tail(const PhononTailParams& p, const EnergyAxis& axis) {
  p.validate();
  return sample(p, axis, detail::phonon_tail<double>);
}

double rydberg_energy(int n, double E_g, double Ry, double delta_n) {
  if (n < 2) throw DomainError(fmt::format("principal quantum number must be >= 2, got {}", n));
  if (!(Ry > 0.0)) throw DomainError("Rydberg energy must be positive");
  const double n_eff = static_cast<double>(n) - delta_n;
  if (!(n_eff > 0.0)) throw DomainError(fmt::format("n - delta must be positive (n={}, delta={})", n, delta_n));
  return E_g - Ry / (n_eff * n_eff);
}

double linewidth_scaling(int n, double alpha, double beta) {
  if (n < 1) throw DomainError(fmt::format("principal quantum number must be >= 1, got {}", n));
  if (alpha < 0.0 || beta < 0.0) throw DomainError("linewidth coefficients must be non-negative");
  const double nn = static_cast<double>(n);
  return alpha * (nn * nn - 1.0) / std::pow(nn, 5) + beta;
}

}  // namespace rydspec
