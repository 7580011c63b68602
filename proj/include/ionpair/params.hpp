#pragma once

#include <stdexcept>
#include <string>

#include "ionpair/units.hpp"

namespace ionpair {

/// Physical configuration of the driven ion. Frequencies in rad/s, field in gauss,
/// angles in radians measured between the linear laser polarization and B.
struct ExperimentParams {
  double rabi397 = 0.0;
  double rabi866 = 0.0;
  double detuning397 = 0.0;  // negative = red detuned
  double detuning866 = 0.0;
  double field_gauss = 0.0;
  double alpha397 = std::numbers::pi / 2;
  double alpha866 = std::numbers::pi / 2;
  double gamma_sp = mhz(20.7);
  double gamma_dp = mhz(1.69);
  double linewidth397 = 0.0;  // FWHM, optional laser dephasing
  double linewidth866 = 0.0;

  /// Throws std::invalid_argument when a field is outside its physical range.
  void validate() const;

  /// Stable 64-bit fingerprint (hex) of all fields, used in output headers.
  std::string fingerprint() const;
};

// Parameter sets from the weak/strong excitation model curves and the calibration spectrum.
ExperimentParams weak_excitation();
ExperimentParams strong_excitation();
ExperimentParams calibration_spectrum();
// Weak excitation with the calibrated (non-ideal) polarization angles.
ExperimentParams weak_excitation_calibrated();

}  // namespace ionpair
