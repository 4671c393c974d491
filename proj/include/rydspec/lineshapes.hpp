#pragma once

#include <vector>

#include "rydspec/spectrum.hpp"

namespace rydspec {

/// Asymmetric Fano resonance of the n-th exciton line.
struct FanoParams {
  double E_n = 0.0;      ///< line center, eV
  double Gamma_n = 0.0;  ///< FWHM, eV
  double f_n = 0.0;      ///< scale factor (oscillator strength), counts eV
  double q_n = 0.0;      ///< dimensionless asymmetry

  void validate() const;
};

struct LorentzParams {
  double E_0 = 0.0;        ///< center, eV
  double Gamma = 0.0;      ///< FWHM, eV
  double amplitude = 0.0;  ///< peak value, counts

  void validate() const;
};

/// Maxwell-Boltzmann kinetic-energy tail of a phonon-assisted band.
struct PhononTailParams {
  double E_i = 0.0;    ///< onset energy, eV
  double T_eff = 0.0;  ///< effective exciton temperature, K
  double A = 0.0;      ///< overall scale

  void validate() const;
};

/// f (Gamma/2 + 2 q (E - E_n)) / ((Gamma/2)^2 + (E - E_n)^2), pointwise.
std::vector<double> eval_fano(const FanoParams& p, const EnergyAxis& axis);

/// amplitude (Gamma/2)^2 / ((E - E_0)^2 + (Gamma/2)^2), pointwise.
std::vector<double> eval_lorentzian(const LorentzParams& p, const EnergyAxis& axis);

/// A sqrt(E - E_i) exp(-(E - E_i) / (k_B T_eff)) above the onset, 0 at or below it.
std::vector<double> eval_phonon_tail(const PhononTailParams& p, const EnergyAxis& axis);

/// Hydrogen-like level E_g - Ry / (n - delta)^2. Throws DomainError when
/// n - delta <= 0, n < 2 or Ry <= 0.
double rydberg_energy(int n, double E_g, double Ry, double delta_n = 0.0);

/// Linewidth model alpha (n^2 - 1) / n^5 + beta.
double linewidth_scaling(int n, double alpha, double beta);

}  // namespace rydspec
