#include "ionpair/params.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>

namespace ionpair {

void ExperimentParams::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!(finite(rabi397) && finite(rabi866) && finite(detuning397) && finite(detuning866) &&
        finite(field_gauss) && finite(alpha397) && finite(alpha866) && finite(gamma_sp) &&
        finite(gamma_dp) && finite(linewidth397) && finite(linewidth866)))
    throw std::invalid_argument("experiment parameters must be finite");
  if (rabi397 < 0 || rabi866 < 0) throw std::invalid_argument("Rabi frequencies must be >= 0");
  if (gamma_sp <= 0 || gamma_dp <= 0) throw std::invalid_argument("decay rates must be > 0");
  if (linewidth397 < 0 || linewidth866 < 0) throw std::invalid_argument("laser linewidths must be >= 0");
  constexpr double kSlack = 1e-12;
  if (alpha397 < -kSlack || alpha397 > std::numbers::pi + kSlack || alpha866 < -kSlack ||
      alpha866 > std::numbers::pi + kSlack)
    throw std::invalid_argument("polarization angles must lie in [0, pi]");
}

std::string ExperimentParams::fingerprint() const {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%.17g|%.17g|%.17g|%.17g|%.17g|%.17g|%.17g|%.17g|%.17g|%.17g|%.17g",
                rabi397, rabi866, detuning397, detuning866, field_gauss, alpha397, alpha866, gamma_sp,
                gamma_dp, linewidth397, linewidth866);
  // FNV-1a, 64 bit
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char* p = buf; *p; ++p) {
    h ^= static_cast<unsigned char>(*p);
    h *= 0x100000001b3ULL;
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

ExperimentParams weak_excitation() {
  ExperimentParams p;
  p.rabi397 = mhz(9.2);
  p.rabi866 = mhz(1.3);
  p.detuning397 = mhz(-15.0);
  p.detuning866 = mhz(5.8);
  p.field_gauss = 3.5;
  return p;
}

ExperimentParams strong_excitation() {
  ExperimentParams p = weak_excitation();
  p.rabi397 = mhz(20.2);
  p.rabi866 = mhz(20.3);
  return p;
}

ExperimentParams calibration_spectrum() {
  ExperimentParams p;
  p.rabi397 = mhz(9.9);
  p.rabi866 = mhz(1.5);
  p.detuning397 = mhz(-15.0);
  p.detuning866 = 0.0;
  p.field_gauss = 3.5;
  p.alpha397 = 0.46 * std::numbers::pi;
  p.alpha866 = 0.40 * std::numbers::pi;
  return p;
}

ExperimentParams weak_excitation_calibrated() {
  ExperimentParams p = weak_excitation();
  p.alpha397 = 0.46 * std::numbers::pi;
  p.alpha866 = 0.40 * std::numbers::pi;
  return p;
}

}  // namespace ionpair
