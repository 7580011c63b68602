#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ionpair/dynamics.hpp"

namespace ionpair {

enum class CurveKind {
  Total,
  MinusMinus,  // first sigma-, second sigma-
  MinusPlus,   // first sigma-, second sigma+
  PlusPlus,
  PlusMinus,
};

const char* to_string(CurveKind k);
CurveKind conditioned_kind(Polarization first, Polarization second);

struct CorrelationCurve {
  std::vector<double> tau;     // s
  std::vector<double> values;  // dimensionless g2
  CurveKind kind = CurveKind::Total;
  double rho33_ss = 0.0;
  double rho44_ss = 0.0;

  double peak_value() const;
  double peak_tau() const;
};

/// Builds and caches the Liouvillian and steady state for one parameter set so that
/// several curves can share them.
class CorrelationModel {
 public:
  explicit CorrelationModel(const ExperimentParams& params, const ModelOptions& options = {});

  const ExperimentParams& params() const { return params_; }
  const Liouvillian& liouvillian() const { return L_; }
  const DensityMatrix& steady() const { return steady_; }
  double steady_residual() const { return residual_; }

  CorrelationCurve total(std::span<const double> grid) const;
  CorrelationCurve conditioned(Polarization first, Polarization second, std::span<const double> grid) const;

  /// All four conditioned kinds from two propagations.
  struct ConditionedSet {
    CorrelationCurve mm, mp, pp, pm;
  };
  ConditionedSet conditioned_all(std::span<const double> grid) const;

 private:
  ExperimentParams params_;
  Liouvillian L_;
  DensityMatrix steady_;
  double residual_;
};

CorrelationCurve g2_total(const ExperimentParams& params, std::span<const double> grid);
CorrelationCurve g2_conditioned(const ExperimentParams& params, Polarization first, Polarization second,
                                std::span<const double> grid);

/// Least-squares slopes of log g2 vs log tau on [window_lo, window_hi] (seconds).
std::pair<double, double> short_time_exponents(const CorrelationCurve& sigma_minus,
                                               const CorrelationCurve& sigma_plus, double window_lo = 0.1e-9,
                                               double window_hi = 1e-9);
double log_log_slope(std::span<const double> tau, std::span<const double> values, double window_lo,
                     double window_hi);

/// Ratio of trapezoidal integrals of the two curves over [0, tau]. tau must be on the grid.
double purity(const CorrelationCurve& sigma_minus, const CorrelationCurve& sigma_plus, double tau);
/// p(tau) on every grid point after the first.
std::vector<double> purity_curve(const CorrelationCurve& sigma_minus, const CorrelationCurve& sigma_plus);

double pair_probability(double p);

struct ErrorModel {
  double eps_init = 0.0;   // wrong-polarization fraction of the conditioning detection
  double eps_minus = 0.0;  // sigma- channel error on the second photon
  double eps_plus = 0.0;   // sigma+ channel error on the second photon

  void validate() const;
};

/// Conditioning error mixes the initial states, detection error mixes the
/// normalized second-photon curves. Returns (g2 sigma-, g2 sigma+) conditioned on sigma-.
std::pair<CorrelationCurve, CorrelationCurve> apply_error_model(const CorrelationModel::ConditionedSet& curves,
                                                                const ErrorModel& em);

/// Adds a constant accidental-coincidence floor.
CorrelationCurve with_background(CorrelationCurve curve, double floor);

struct SpectrumPoint {
  double detuning866;  // rad/s
  double excited;      // steady-state rho33 + rho44
  bool flagged = false;
};

struct SpectrumCurve {
  std::vector<SpectrumPoint> points;
  double scale = 1.0;  // counts/s per unit excited population
  double background = 0.0;

  double value(std::size_t k) const { return scale * points[k].excited + background; }
  std::vector<double> values() const;
  /// Indices of strict interior local minima.
  std::vector<std::size_t> local_minima() const;
};

/// Steady-state fluorescence versus 866 detuning. Points whose steady state is not
/// unique are flagged rather than aborting the scan.
SpectrumCurve excitation_spectrum(const ExperimentParams& params, std::span<const double> detunings866,
                                  double scale = 1.0, double background = 0.0, const ModelOptions& options = {});

std::vector<double> default_spectrum_detunings();

/// Two-photon resonance positions Delta866 = Delta397 + shift(S) - shift(D) for every
/// S/D sublevel pair reachable through a common P sublevel.
std::vector<double> raman_resonances(const ExperimentParams& params);

/// Expected photons of the given sigma polarization emitted in the window T.
/// Steady: from the steady-state excited population. Conditioned: integrated
/// excited population after a sigma- detection.
enum class PhotonCountMode { Steady, Conditioned };
double mean_photon_number(const ExperimentParams& params, Polarization pol, double window,
                          PhotonCountMode mode = PhotonCountMode::Steady);

}  // namespace ionpair
