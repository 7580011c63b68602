#include "ionpair/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <vector>

namespace ionpair {

using nlohmann::json;

namespace {

// Splits "12.5ns" into 12.5 and "ns". The number must be complete and finite.
std::pair<double, std::string> split_unit(const std::string& text) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first < last && *first == ' ') ++first;
  if (first < last && *first == '+') ++first;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || !std::isfinite(v)) throw std::invalid_argument("expected a number with a unit: '" + text + "'");
  std::string unit(ptr, last);
  while (!unit.empty() && unit.front() == ' ') unit.erase(unit.begin());
  while (!unit.empty() && unit.back() == ' ') unit.pop_back();
  return {v, unit};
}

}  // namespace

double parse_angle(const std::string& text) {
  const auto [v, unit] = split_unit(text);
  if (unit == "pi") return v * std::numbers::pi;
  if (unit == "deg") return v * std::numbers::pi / 180.0;
  if (unit == "rad") return v;
  throw std::invalid_argument("angle needs a unit suffix (pi, deg or rad): '" + text + "'");
}

double parse_duration(const std::string& text) {
  const auto [v, unit] = split_unit(text);
  if (unit == "ps") return v * 1e-12;
  if (unit == "ns") return v * 1e-9;
  if (unit == "us") return v * 1e-6;
  if (unit == "ms") return v * 1e-3;
  if (unit == "s") return v;
  throw std::invalid_argument("time needs a unit suffix (ps, ns, us, ms or s): '" + text + "'");
}

double parse_frequency(const std::string& text) {
  const auto [v, unit] = split_unit(text);
  if (unit == "MHz") return mhz(v);
  if (unit == "kHz") return mhz(v * 1e-3);
  if (unit == "Hz") return mhz(v * 1e-6);
  throw std::invalid_argument("frequency needs a unit suffix (MHz, kHz or Hz): '" + text + "'");
}

std::string format_angle(double radians) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12gpi", radians / std::numbers::pi);
  return buf;
}

namespace {

struct Key {
  const char* key;
  double ExperimentParams::*field;
  bool angle;
  bool required;
};

const Key kKeys[] = {
    {"omega397_mhz", &ExperimentParams::rabi397, false, true},
    {"omega866_mhz", &ExperimentParams::rabi866, false, true},
    {"delta397_mhz", &ExperimentParams::detuning397, false, true},
    {"delta866_mhz", &ExperimentParams::detuning866, false, true},
    {"b_gauss", &ExperimentParams::field_gauss, false, true},
    {"alpha397", &ExperimentParams::alpha397, true, true},
    {"alpha866", &ExperimentParams::alpha866, true, true},
    {"gamma_sp_mhz", &ExperimentParams::gamma_sp, false, false},
    {"gamma_dp_mhz", &ExperimentParams::gamma_dp, false, false},
    {"linewidth397_mhz", &ExperimentParams::linewidth397, false, false},
    {"linewidth866_mhz", &ExperimentParams::linewidth866, false, false},
};

double number(const json& v, const std::string& key) {
  if (!v.is_number()) throw InputError("'" + key + "' must be a number");
  return v.get<double>();
}

double angle(const json& v, const std::string& key) {
  if (!v.is_string()) throw InputError("'" + key + "' must be a string with a unit suffix, e.g. \"0.5pi\"");
  try {
    return parse_angle(v.get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw InputError("'" + key + "': " + e.what());
  }
}

}  // namespace

ExperimentParams params_from_json(const json& j) {
  if (!j.is_object()) throw InputError("parameter file must hold a JSON object");
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const Key& key : kKeys) known = known || k == key.key;
    if (!known) throw InputError("unknown parameter key '" + k + "'");
  }
  ExperimentParams p;
  for (const Key& key : kKeys) {
    if (!j.contains(key.key)) {
      if (key.required) throw InputError(std::string("missing parameter key '") + key.key + "'");
      continue;
    }
    const json& v = j.at(key.key);
    if (key.angle) {
      p.*key.field = angle(v, key.key);
    } else if (key.field == &ExperimentParams::field_gauss) {
      p.*key.field = number(v, key.key);
    } else {
      p.*key.field = mhz(number(v, key.key));
    }
  }
  if (p.field_gauss < 0) throw InputError("b_gauss must be >= 0");
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  return p;
}

json params_to_json(const ExperimentParams& p) {
  json j = json::object();
  for (const Key& key : kKeys) {
    const double v = p.*key.field;
    if (key.angle) j[key.key] = format_angle(v);
    else if (key.field == &ExperimentParams::field_gauss) j[key.key] = v;
    else j[key.key] = to_mhz(v);
  }
  return j;
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ExperimentParams load_params_file(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw InputError("'" + path + "' is not valid JSON: " + e.what());
  }
  try {
    return params_from_json(j);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

namespace {

enum class Unit { Frequency, Gauss, Angle, Plain };

Unit unit_of(const std::string& name) {
  if (name.starts_with("omega") || name.starts_with("delta")) return Unit::Frequency;
  if (name == "field") return Unit::Gauss;
  if (name.starts_with("alpha")) return Unit::Angle;
  return Unit::Plain;
}

}  // namespace

std::string fit_parameter_key(const std::string& name) {
  if (!is_fit_parameter(name)) throw std::invalid_argument("unknown fit parameter '" + name + "'");
  switch (unit_of(name)) {
    case Unit::Frequency: return name + "_mhz";
    case Unit::Gauss: return "b_gauss";
    default: return name;
  }
}

std::string fit_parameter_name(const std::string& key) {
  std::string name = key;
  if (key == "b_gauss") name = "field";
  else if (key.ends_with("_mhz")) name = key.substr(0, key.size() - 4);
  if (!is_fit_parameter(name) || fit_parameter_key(name) != key) throw InputError("unknown fit parameter '" + key + "'");
  return name;
}

double fit_parameter_from_json(const std::string& name, const json& v) {
  const std::string key = fit_parameter_key(name);
  switch (unit_of(name)) {
    case Unit::Frequency: return mhz(number(v, key));
    case Unit::Angle: return angle(v, key);
    default: return number(v, key);
  }
}

json fit_parameter_to_json(const std::string& name, double value) {
  switch (unit_of(name)) {
    case Unit::Frequency: return to_mhz(value);
    case Unit::Angle: return format_angle(value);
    default: return value;
  }
}

double fit_parameter_unit(const std::string& name) {
  switch (unit_of(name)) {
    case Unit::Frequency: return mhz(1.0);
    case Unit::Angle: return std::numbers::pi;
    default: return 1.0;
  }
}

namespace {

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

Table read_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  Table t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (t.columns.empty()) {
      t.columns = cells;
      continue;
    }
    if (cells.size() != t.columns.size())
      throw InputError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(t.columns.size()) + " columns");
    std::vector<double> row;
    for (const std::string& c : cells) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (ec != std::errc() || ptr != c.data() + c.size() || !std::isfinite(v))
        throw InputError(path + ":" + std::to_string(line_no) + ": bad number '" + c + "'");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  if (t.columns.empty() || t.rows.empty()) throw InputError(path + ": no data rows");
  return t;
}

std::size_t column(const Table& t, const std::string& name, const std::string& path) {
  for (std::size_t k = 0; k < t.columns.size(); ++k)
    if (t.columns[k] == name) return k;
  throw InputError(path + ": missing column '" + name + "'");
}

bool has_column(const Table& t, const std::string& name) {
  return std::find(t.columns.begin(), t.columns.end(), name) != t.columns.end();
}

}  // namespace

DataSet read_spectrum_csv(const std::string& path) {
  const Table t = read_csv(path);
  const std::size_t cx = column(t, "detuning866_mhz", path), cy = column(t, "counts", path);
  DataSet d;
  d.kind = DataKind::Spectrum;
  for (const auto& r : t.rows) {
    d.x.push_back(mhz(r[cx]));
    d.y.push_back(r[cy]);
  }
  if (has_column(t, "error")) {
    const std::size_t ce = column(t, "error", path);
    for (const auto& r : t.rows) d.sigma.push_back(r[ce]);
  } else {
    d.sigma = poisson_errors(d.y);
  }
  try {
    d.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(path + ": " + e.what());
  }
  return d;
}

DataSet read_g2_csv(const std::string& path, DataKind kind, double tmax) {
  const Table t = read_csv(path);
  DataSet d;
  d.kind = kind;
  const std::size_t ct = column(t, "tau_ns", path), cg = column(t, "g2", path);
  if (has_column(t, "counts")) {
    const std::size_t cc = column(t, "counts", path);
    if (t.rows.size() < 2) throw InputError(path + ": correlogram needs at least two bins");
    d.bin_width = (t.rows[1][ct] - t.rows[0][ct]) * 1e-9;
    if (!(d.bin_width > 0)) throw InputError(path + ": correlogram bins must increase");
    for (const auto& r : t.rows) {
      const double tau = r[ct] * 1e-9;
      if (tau - 0.5 * d.bin_width < 0 || tau > tmax) continue;
      d.x.push_back(tau);
      d.y.push_back(r[cg]);
      d.sigma.push_back(std::max(r[cg], 1e-300) / std::sqrt(std::max(1.0, r[cc])));
    }
    // empty bins carry no shape information: use the mean level for their error
    double level = 0.0;
    for (double y : d.y) level += y;
    if (!d.y.empty()) level /= static_cast<double>(d.y.size());
    for (std::size_t k = 0; k < d.y.size(); ++k)
      if (d.y[k] <= 0.0) d.sigma[k] = level > 0 ? level : 1.0;
  } else {
    const std::size_t ce = column(t, "error", path);
    for (const auto& r : t.rows) {
      const double tau = r[ct] * 1e-9;
      if (tau < 0 || tau > tmax) continue;
      d.x.push_back(tau);
      d.y.push_back(r[cg]);
      d.sigma.push_back(r[ce]);
    }
  }
  try {
    d.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(path + ": " + e.what());
  }
  return d;
}

json fit_result_to_json(const FitResult& r) {
  json params = json::object(), unc = json::object();
  for (std::size_t k = 0; k < r.parameters.size(); ++k) {
    const ParameterSpec& p = r.parameters[k];
    const std::string key = fit_parameter_key(p.name);
    params[key] = {{"value", fit_parameter_to_json(p.name, p.value)}, {"free", p.free}};
    if (p.free) {
      const double u = r.uncertainty[k] / fit_parameter_unit(p.name);
      params[key]["uncertainty"] = std::isfinite(u) ? json(u) : json(nullptr);
      if (unit_of(p.name) == Unit::Angle) params[key]["uncertainty_unit"] = "pi";
    }
  }
  json cov = json::array();
  for (Eigen::Index i = 0; i < r.covariance.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < r.covariance.cols(); ++j) {
      const double v = r.covariance(i, j) / (fit_parameter_unit(r.free_names[i]) * fit_parameter_unit(r.free_names[j]));
      row.push_back(std::isfinite(v) ? json(v) : json(nullptr));
    }
    cov.push_back(row);
  }
  json names = json::array();
  for (const std::string& n : r.free_names) names.push_back(fit_parameter_key(n));
  return {
      {"parameters", params},
      {"chi2", r.chi2},
      {"points", r.points},
      {"dof", r.dof},
      {"reduced_chi2", r.dof > 0 ? json(r.chi2 / static_cast<double>(r.dof)) : json(nullptr)},
      {"converged", r.converged},
      {"evaluations", r.evaluations},
      {"covariance", {{"parameters", names}, {"matrix", cov}, {"method", r.jackknife ? "jackknife" : "curvature"}}},
      {"params", params_to_json(r.state.params)},
  };
}

}  // namespace ionpair
