#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "ionpair/fitting.hpp"
#include "ionpair/params.hpp"

namespace ionpair {

/// A user-supplied file is missing, unreadable or malformed.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Quantities typed by users carry an explicit unit suffix.
//   angles:    "0.46pi", "82.8deg", "1.44rad"
//   times:     "24ns", "1.5us", "10ms", "2s", "500ps"
//   frequency: "-15MHz", "800kHz" (value of f = omega / 2 pi)
double parse_angle(const std::string& text);
double parse_duration(const std::string& text);
double parse_frequency(const std::string& text);

std::string format_angle(double radians);

/// Parameter file keys: omega397_mhz omega866_mhz delta397_mhz delta866_mhz b_gauss
/// alpha397 alpha866, optional gamma_sp_mhz gamma_dp_mhz linewidth397_mhz
/// linewidth866_mhz. Frequencies are f = omega / 2 pi in MHz, angles are strings with a
/// unit suffix. The field must be >= 0. Unknown keys are rejected.
ExperimentParams params_from_json(const nlohmann::json& j);
nlohmann::json params_to_json(const ExperimentParams& p);

/// Reads and validates a parameter file; throws InputError.
ExperimentParams load_params_file(const std::string& path);

/// User-facing name and unit conversion of a fit parameter ("omega397" <-> "omega397_mhz").
std::string fit_parameter_key(const std::string& name);
std::string fit_parameter_name(const std::string& key);
double fit_parameter_from_json(const std::string& name, const nlohmann::json& v);
nlohmann::json fit_parameter_to_json(const std::string& name, double value);
/// Scale of the user unit in internal units, for uncertainties and covariances.
double fit_parameter_unit(const std::string& name);

/// Spectrum CSV: detuning866_mhz,counts[,error]. Errors default to Poisson.
DataSet read_spectrum_csv(const std::string& path);

/// g2 CSV, either tau_ns,g2,error or a correlogram (tau_ns,counts,g2). Correlogram
/// rows get relative errors 1/sqrt(counts) and the bin width of the file; rows whose
/// bin reaches negative delays or lies beyond tmax are dropped.
DataSet read_g2_csv(const std::string& path, DataKind kind, double tmax);

nlohmann::json fit_result_to_json(const FitResult& r);

}  // namespace ionpair
