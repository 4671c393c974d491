#pragma once

namespace rydspec {

struct PhysicalConstants {
  /// Boltzmann constant in eV/K.
  static constexpr double k_B = 8.617333262e-5;
  /// Planck constant times speed of light in eV nm.
  static constexpr double hc = 1239.8420;
};

}  // namespace rydspec
