#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "ionpair/atom_model.hpp"

namespace ionpair {

class DegenerateSteadyState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DensityMatrix {
  Matrix8 rho;

  static DensityMatrix pure(int level);
  double population(int level) const { return rho(level, level).real(); }
  double trace() const { return rho.trace().real(); }
  double min_eigenvalue() const;
  double hermiticity_error() const { return (rho - rho.adjoint()).norm(); }

  /// Hermitian, unit trace, positive semidefinite within the stated tolerances.
  void validate(double tol_trace = 1e-10, double tol_herm = 1e-12, double tol_eig = 1e-8) const;
};

struct SteadyStateReport {
  DensityMatrix state;
  double residual;          // |L rho| / (|L| |rho|)
  double singular_ratio;    // second-smallest / largest singular value of L
};

// Degeneracy threshold on the ratio of the second-smallest to largest singular value.
inline constexpr double kDegeneracyRatio = 1e-6;

/// Unique steady state of L. Throws DegenerateSteadyState when the null space has
/// dimension greater than one.
SteadyStateReport steady_state_report(const Liouvillian& L);
DensityMatrix steady_state(const Liouvillian& L);

/// Same solution without the singular-value degeneracy check. For inner loops
/// (spectrum scans, fits) that handle degeneracy through the residual instead.
DensityMatrix steady_state_fast(const Liouvillian& L);

struct Trajectory {
  std::vector<double> tau;  // seconds
  std::vector<DensityMatrix> states;

  std::vector<double> population(int level) const;
};

/// exp(L tau) rho0 on every grid point. Grid must start at 0 and be strictly increasing.
/// Equal consecutive spacings reuse one propagator.
Trajectory propagate(const Liouvillian& L, const DensityMatrix& rho0, std::span<const double> grid);

/// Populations only, for the given levels; cheaper than a full Trajectory.
std::vector<std::vector<double>> propagate_populations(const Liouvillian& L, const DensityMatrix& rho0,
                                                       std::span<const double> grid, std::span<const int> levels);

/// Uniform grid [0, t_max] with the given spacing; t_max is included when it is a multiple.
std::vector<double> uniform_grid(double t_max, double spacing);

// Default grids: correlation work and short-time exponent checks.
std::vector<double> correlation_grid();
std::vector<double> short_time_grid();

}  // namespace ionpair
