#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ionpair/correlations.hpp"

namespace ionpair {

enum class DataKind { Spectrum, G2Minus, G2Plus };

const char* to_string(DataKind k);

/// Observed data with per-point errors. x is the 866 detuning in rad/s for spectra
/// and the delay in seconds for g2 data.
struct DataSet {
  DataKind kind = DataKind::Spectrum;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> sigma;
  double bin_width = 0.0;  // g2 only: model is averaged over [x - w/2, x + w/2]
  // Optional jackknife replicas of y (see conditioned_g2_jackknife). When present the
  // fit covariance comes from their scatter instead of the chi2 curvature, which keeps
  // errors honest when neighbouring points are correlated.
  std::vector<std::vector<double>> replicas;

  void validate() const;
  std::size_t size() const { return x.size(); }
};

/// sqrt(counts), floored at 1.
std::vector<double> poisson_errors(std::span<const double> counts);

/// Everything the forward models read. Fit parameters address its fields by name.
struct ModelState {
  ExperimentParams params;
  double scale = 1.0;       // spectrum counts/s per unit excited population
  double background = 0.0;  // spectrum counts/s
  ErrorModel errors;
  double g2_scale = 1.0;
  double g2_background = 0.0;
};

// Names: omega397 omega866 delta397 delta866 field alpha397 alpha866 scale background
// eps_init eps_minus eps_plus g2_scale g2_background. Internal units (rad/s, G, rad).
bool is_fit_parameter(const std::string& name);
double get_parameter(const ModelState& s, const std::string& name);
void set_parameter(ModelState& s, const std::string& name, double value);

struct ParameterSpec {
  std::string name;
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool free = true;
};

/// Spec with default bounds for the named parameter around its value in s.
ParameterSpec default_spec(const ModelState& s, const std::string& name, bool free = true);

struct FitOptions {
  int restarts = 5;
  int max_evals = 2000;  // per restart
  double f_tol = 1e-10;  // relative spread of the simplex values
  double x_tol = 1e-8;   // simplex size, in units of each parameter's bound range
  double spread = 0.2;   // relative perturbation of restart starting points
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0: hardware concurrency
  bool covariance = true;
};

struct MinimizeResult {
  std::vector<double> x;
  double f = 0.0;
  int evaluations = 0;
  bool converged = false;
  std::vector<double> history;  // best objective after every simplex step of the winning run
};

using Objective = std::function<double(const std::vector<double>&)>;

/// Nelder-Mead on the box [lower, upper]; trial points are projected onto the box.
MinimizeResult nelder_mead(const Objective& f, std::vector<double> x0, const std::vector<double>& lower,
                           const std::vector<double>& upper, int max_evals, double f_tol, double x_tol);

/// Restart 0 starts at x0, the others at random perturbations of it; a final run
/// restarts from the best point found. Deterministic for a given seed and any thread count.
MinimizeResult minimize(const Objective& f, const std::vector<double>& x0, const std::vector<double>& lower,
                        const std::vector<double>& upper, const FitOptions& options);

struct FitResult {
  std::vector<ParameterSpec> parameters;  // best-fit values
  std::vector<double> uncertainty;        // 1 sigma per entry of parameters; 0 when frozen, NaN if unavailable
  std::vector<std::string> free_names;
  Eigen::MatrixXd covariance;  // over free_names, internal units
  bool jackknife = false;      // covariance from the data replicas
  ModelState state;
  double chi2 = 0.0;
  std::size_t points = 0;
  std::size_t dof = 0;
  int evaluations = 0;
  bool converged = false;
  std::vector<double> history;
};

/// Steady-state rho33 + rho44 over the detunings, using a real-basis Liouvillian that is
/// affine in the 866 detuning. Skips the degeneracy check of excitation_spectrum.
std::vector<double> excited_population_scan(const ExperimentParams& params, std::span<const double> detunings866);

std::vector<double> spectrum_model(const ModelState& s, const DataSet& data);

/// Error-mixed conditioned g2 (first photon sigma-) at the data delays, bin averaged.
std::vector<double> g2_model(const ModelState& s, const DataSet& data);

double chi_square(const DataSet& data, std::span<const double> model);

/// Parameters not listed, or listed with free = false, stay at their values in init.
/// The covariance is 2 H^-1 from the chi2 Hessian, or, when every data set carries the
/// same number of replicas, the jackknife covariance of the linearized least-squares
/// estimate: (B - 1)/B sum_r d_r d_r^T with d_r = (J^T W J)^-1 J^T W (y_r - mean y).
FitResult fit_spectrum(const DataSet& data, const ModelState& init, const std::vector<ParameterSpec>& parameters,
                       const FitOptions& options = {});

/// One parameter vector scores both sigma- conditioned curves.
FitResult fit_g2_joint(const DataSet& minus, const DataSet& plus, const ModelState& init,
                       const std::vector<ParameterSpec>& parameters, const FitOptions& options = {});

}  // namespace ionpair
