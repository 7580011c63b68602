#include "ionpair/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ionpair/correlations.hpp"
#include "ionpair/correlator.hpp"
#include "ionpair/fitting.hpp"
#include "ionpair/io.hpp"
#include "ionpair/trajectory.hpp"
#include "ionpair/version.hpp"

namespace ionpair {

namespace {

using nlohmann::json;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Files produced by one command. Nothing touches the file system until commit(), so a
// failing command leaves no partial output behind.
class Outputs {
 public:
  Outputs(std::ostream& stdout_stream) : stdout_(stdout_stream) {}

  void add(const std::string& path, std::string content) {
    if (path.empty() || path == "-") stdout_content_ += content;
    else files_.emplace_back(path, std::move(content));
  }

  void commit() {
    std::vector<std::string> written;
    try {
      for (const auto& [path, content] : files_) {
        const std::string tmp = path + ".tmp";
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw InputError("cannot write '" + path + "'");
        written.push_back(tmp);
        f << content;
        f.close();
        if (!f) throw InputError("cannot write '" + path + "'");
      }
    } catch (...) {
      for (const std::string& tmp : written) std::filesystem::remove(tmp);
      throw;
    }
    for (const auto& [path, content] : files_) std::filesystem::rename(path + ".tmp", path);
    stdout_ << stdout_content_;
  }

 private:
  std::ostream& stdout_;
  std::string stdout_content_;
  std::vector<std::pair<std::string, std::string>> files_;
};

std::string header(const std::string& command, const std::string& fingerprint) {
  std::string h = "# ionpair " + std::string(kVersion) + "\n# command: " + command + "\n";
  h += "# params_fingerprint: " + (fingerprint.empty() ? std::string("unknown") : fingerprint) + "\n";
  return h;
}

std::optional<Polarization> parse_pol(const std::string& s) {
  if (s == "sigma-") return Polarization::SigmaMinus;
  if (s == "sigma+") return Polarization::SigmaPlus;
  if (s == "pi") return Polarization::Pi;
  if (s == "any") return std::nullopt;
  throw std::invalid_argument("polarization must be sigma-, sigma+, pi or any: '" + s + "'");
}

std::optional<Wavelength> parse_wavelength(const std::string& s) {
  if (s == "397") return Wavelength::Blue397;
  if (s == "866") return Wavelength::Red866;
  if (s == "any") return std::nullopt;
  throw std::invalid_argument("wavelength must be 397, 866 or any: '" + s + "'");
}

std::int64_t parse_ps(const std::string& s) {
  const double t = parse_duration(s);
  const std::int64_t ps = to_ps(t);
  if (std::abs(static_cast<double>(ps) - t * 1e12) > 1e-6 * std::max(1.0, t * 1e12))
    throw std::invalid_argument("time must be a whole number of picoseconds: '" + s + "'");
  return ps;
}

std::vector<double> time_grid(const std::string& tmax, const std::string& step) {
  return uniform_grid(parse_duration(tmax), parse_duration(step));
}

// ---------------------------------------------------------------------------

struct ErrorArgs {
  double eps_init = 0.0, eps_minus = 0.0, eps_plus = 0.0;
  ErrorModel model() const {
    ErrorModel em{eps_init, eps_minus, eps_plus};
    em.validate();
    return em;
  }
  bool any() const { return eps_init != 0 || eps_minus != 0 || eps_plus != 0; }
};

void add_error_options(CLI::App* app, ErrorArgs& e) {
  app->add_option("--eps-init", e.eps_init, "wrong-polarization fraction of the first detection");
  app->add_option("--eps-minus", e.eps_minus, "error fraction of the sigma- channel");
  app->add_option("--eps-plus", e.eps_plus, "error fraction of the sigma+ channel");
}

struct G2Args {
  std::string params, first = "sigma-", second, tmax = "1000ns", step = "1ns", out;
  ErrorArgs eps;
};

void run_g2(const G2Args& a, Outputs& outputs, std::ostream& err) {
  const ExperimentParams p = load_params_file(a.params);
  const std::vector<double> grid = time_grid(a.tmax, a.step);
  const CorrelationModel model(p);
  std::string csv = header("g2", p.fingerprint());

  std::vector<std::pair<std::string, const CorrelationCurve*>> columns;
  CorrelationCurve total, minus, plus;
  if (a.first == "none") {
    if (!a.second.empty() || a.eps.any()) throw std::invalid_argument("--second and --eps-* need a conditioning photon");
    total = model.total(grid);
    columns = {{"g2_total", &total}};
  } else {
    const auto first = parse_pol(a.first);
    if (!first || *first == Polarization::Pi) throw std::invalid_argument("--first must be sigma-, sigma+ or none");
    const auto set = model.conditioned_all(grid);
    if (*first == Polarization::SigmaMinus) {
      std::tie(minus, plus) = apply_error_model(set, a.eps.model());
    } else {
      if (a.eps.any()) throw std::invalid_argument("the error model applies to sigma- conditioning only");
      minus = set.pm;
      plus = set.pp;
    }
    csv += "# first: " + a.first + "\n";
    if (a.eps.any())
      csv += "# eps_init: " + num(a.eps.eps_init) + "\n# eps_minus: " + num(a.eps.eps_minus) +
             "\n# eps_plus: " + num(a.eps.eps_plus) + "\n";
    if (a.second.empty() || a.second == "sigma-") columns.push_back({"g2_sigma_minus", &minus});
    if (a.second.empty() || a.second == "sigma+") columns.push_back({"g2_sigma_plus", &plus});
    if (columns.empty()) throw std::invalid_argument("--second must be sigma- or sigma+");
  }

  csv += "tau_ns";
  for (const auto& c : columns) csv += "," + c.first;
  csv += "\n";
  for (std::size_t k = 0; k < grid.size(); ++k) {
    csv += num(grid[k] * 1e9);
    for (const auto& c : columns) csv += "," + num(c.second->values[k]);
    csv += "\n";
  }
  outputs.add(a.out, std::move(csv));
  for (const auto& c : columns)
    err << c.first << ": max " << num(c.second->peak_value()) << " at " << num(c.second->peak_tau() * 1e9) << " ns\n";
}

struct SpectrumArgs {
  std::string params, from = "-40MHz", to = "40MHz", out;
  int points = 400;
  double scale = 1.0, background = 0.0;
};

void run_spectrum(const SpectrumArgs& a, Outputs& outputs, std::ostream& err) {
  const ExperimentParams p = load_params_file(a.params);
  if (a.points < 2) throw std::invalid_argument("--points must be >= 2");
  const double lo = parse_frequency(a.from), hi = parse_frequency(a.to);
  if (!(hi > lo)) throw std::invalid_argument("--to must exceed --from");
  std::vector<double> d(static_cast<std::size_t>(a.points));
  for (int k = 0; k < a.points; ++k) d[k] = lo + (hi - lo) * k / (a.points - 1);
  const SpectrumCurve s = excitation_spectrum(p, d, a.scale, a.background);

  std::string csv = header("spectrum", p.fingerprint());
  csv += "# raman_resonances_mhz:";
  for (double r : raman_resonances(p)) csv += " " + num(to_mhz(r));
  csv += "\ndetuning866_mhz,excited,counts,flagged\n";
  for (std::size_t k = 0; k < s.points.size(); ++k)
    csv += num(to_mhz(s.points[k].detuning866)) + "," + num(s.points[k].excited) + "," + num(s.value(k)) + "," +
           (s.points[k].flagged ? "1" : "0") + "\n";
  outputs.add(a.out, std::move(csv));
  err << "local minima:";
  for (std::size_t k : s.local_minima()) err << " " << num(to_mhz(s.points[k].detuning866)) << " MHz";
  err << "\n";
}

struct PurityArgs {
  std::string params, tau, tmax = "1000ns", step = "1ns", out;
  ErrorArgs eps;
};

void run_purity(const PurityArgs& a, Outputs& outputs, std::ostream& err) {
  const ExperimentParams p = load_params_file(a.params);
  std::vector<double> grid;
  if (!a.tau.empty()) {
    const double tau = parse_duration(a.tau), step = parse_duration(a.step);
    if (!(tau > 0) || !(step > 0)) throw std::invalid_argument("--tau and --step must be > 0");
    const double n = std::ceil(tau / step - 1e-9);
    grid = uniform_grid(tau, tau / n);
    grid.back() = tau;
  } else {
    grid = time_grid(a.tmax, a.step);
  }
  const auto [minus, plus] = apply_error_model(CorrelationModel(p).conditioned_all(grid), a.eps.model());
  const std::vector<double> pc = purity_curve(minus, plus);

  std::string csv = header("purity", p.fingerprint());
  if (a.eps.any())
    csv += "# eps_init: " + num(a.eps.eps_init) + "\n# eps_minus: " + num(a.eps.eps_minus) +
           "\n# eps_plus: " + num(a.eps.eps_plus) + "\n";
  csv += "tau_ns,purity,pair_probability\n";
  const std::size_t first = a.tau.empty() ? 1 : grid.size() - 1;
  for (std::size_t k = first; k < grid.size(); ++k)
    csv += num(grid[k] * 1e9) + "," + num(pc[k]) + "," + num(pair_probability(pc[k])) + "\n";
  outputs.add(a.out, std::move(csv));
  if (!a.tau.empty())
    err << "p(" << num(grid.back() * 1e9) << " ns) = " << num(pc.back()) << ", pair probability "
        << num(pair_probability(pc.back())) << "\n";
}

struct SimulateArgs {
  std::string params, duration, out, accept1 = "sigma-", accept2 = "sigma+", wavelength = "397";
  std::uint64_t seed = 1;
  double efficiency1 = 1.0, efficiency2 = 1.0, crosstalk1 = 0.0, crosstalk2 = 0.0, dark1 = 0.0, dark2 = 0.0;
  bool csv = false, raw = false;
};

void run_simulate(const SimulateArgs& a, Outputs& outputs, std::ostream& err) {
  const ExperimentParams p = load_params_file(a.params);
  if (a.out.empty() || a.out == "-") throw std::invalid_argument("simulate needs an --out prefix");
  const double duration = parse_duration(a.duration);
  DetectionConfig cfg;
  cfg.channels[0] = {a.efficiency1, parse_pol(a.accept1), a.crosstalk1, parse_wavelength(a.wavelength), a.dark1};
  cfg.channels[1] = {a.efficiency2, parse_pol(a.accept2), a.crosstalk2, parse_wavelength(a.wavelength), a.dark2};
  cfg.validate();

  const EmissionRecord rec = simulate_emissions(p, duration, a.seed);
  const auto [ch1, ch2] = detect(rec, cfg, a.seed);
  auto binary = [](const ClickStream& s) {
    std::ostringstream ss;
    write_ionclk(ss, s);
    return ss.str();
  };
  auto text = [](const ClickStream& s) {
    std::ostringstream ss;
    write_clicks_csv(ss, s);
    return ss.str();
  };
  std::vector<std::pair<std::string, const ClickStream*>> streams = {{"ch1", &ch1}, {"ch2", &ch2}};
  const ClickStream raw = as_stream(rec);
  if (a.raw) streams.push_back({"raw", &raw});
  json files = json::array();
  for (const auto& [name, s] : streams) {
    outputs.add(a.out + "_" + name + ".ionclk", binary(*s));
    files.push_back(a.out + "_" + name + ".ionclk");
    if (a.csv) outputs.add(a.out + "_" + name + ".csv", text(*s));
  }

  auto channel_json = [](const ChannelConfig& c, const ClickStream& s) {
    return json{{"efficiency", c.efficiency},
                {"accept", c.accept ? to_string(*c.accept) : "any"},
                {"crosstalk", c.crosstalk},
                {"wavelength", c.wavelength ? to_string(*c.wavelength) : "any"},
                {"dark_rate_per_s", c.dark_rate},
                {"events", s.events.size()}};
  };
  const json meta = {{"tool", "ionpair"},
                     {"version", kVersion},
                     {"command", "simulate"},
                     {"params_fingerprint", p.fingerprint()},
                     {"params", params_to_json(p)},
                     {"seed", a.seed},
                     {"duration_ps", rec.duration_ps},
                     {"emitted", rec.events.size()},
                     {"channels", {channel_json(cfg.channels[0], ch1), channel_json(cfg.channels[1], ch2)}},
                     {"files", files}};
  outputs.add(a.out + "_meta.json", meta.dump(2) + "\n");
  err << "emitted " << rec.events.size() << " photons; ch1 " << ch1.events.size() << ", ch2 " << ch2.events.size()
      << " clicks\n";
}

struct CorrelateArgs {
  std::string a, b, bin = "1ns", window = "100ns", filter_a = "any", filter_b = "any", wavelength = "any", out;
  bool raw = false;
  unsigned shards = 1;
};

ClickStream load_stream(const std::string& path) {
  ClickStream s;
  try {
    s = read_clicks_file(path);
    s.validate();
  } catch (const std::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  return s;
}

void run_correlate(const CorrelateArgs& a, Outputs& outputs, std::ostream& err) {
  CorrelogramConfig cfg;
  cfg.bin_width_ps = parse_ps(a.bin);
  cfg.window_ps = parse_ps(a.window);
  cfg.mode = a.raw ? Normalization::RawCounts : Normalization::RateNormalized;
  const auto wl = parse_wavelength(a.wavelength);
  cfg.filter_a = {parse_pol(a.filter_a), wl};
  cfg.filter_b = {parse_pol(a.filter_b), wl};
  cfg.validate();
  if (a.shards < 1) throw std::invalid_argument("--shards must be >= 1");

  const ClickStream sa = load_stream(a.a);
  const ClickStream sb = a.b.empty() ? ClickStream{} : load_stream(a.b);
  const Correlogram c = conditioned_g2_estimate(sa, a.b.empty() ? sa : sb, cfg, a.shards);

  std::string csv = header("correlate", sa.params_fingerprint);
  csv += "# bin_ps: " + std::to_string(cfg.bin_width_ps) + "\n# window_ps: " + std::to_string(cfg.window_ps) + "\n";
  csv += "# filter_a: " + a.filter_a + "\n# filter_b: " + a.filter_b + "\n# wavelength: " + a.wavelength + "\n";
  csv += "# overlap_ps: " + std::to_string(c.overlap_ps) + "\n# rate_a_per_s: " + num(c.rate_a) +
         "\n# rate_b_per_s: " + num(c.rate_b) + "\n# total_pairs: " + std::to_string(c.total_pairs) + "\n";
  if (c.empty) csv += "# empty: a stream has no events after filtering\n";
  csv += "tau_ns,counts,g2\n";
  for (std::size_t k = 0; k < c.counts.size(); ++k)
    csv += num(c.tau_ps[k] * 1e-3) + "," + std::to_string(c.counts[k]) + "," + num(c.normalized[k]) + "\n";
  outputs.add(a.out, std::move(csv));
  if (c.empty) err << "warning: empty correlogram, a stream has no events after filtering\n";
  else err << c.total_pairs << " pairs\n";
}

struct FitArgs {
  std::string config, out;
  int threads = 0;
};

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void run_fit(const FitArgs& a, Outputs& outputs, std::ostream& err) {
  const json cfg = load_json(a.config);
  const std::filesystem::path base = std::filesystem::path(a.config).parent_path();
  auto resolve = [&](const json& v, const char* what) {
    if (!v.is_string()) throw InputError(std::string("fit config: '") + what + "' must be a path");
    const std::filesystem::path p(v.get<std::string>());
    return (p.is_absolute() ? p : base / p).string();
  };
  try {
    for (const auto& [k, v] : cfg.items())
      if (k != "type" && k != "params" && k != "data" && k != "parameters" && k != "options" && k != "tmax")
        throw InputError("fit config: unknown key '" + k + "'");
    const std::string type = cfg.at("type").get<std::string>();
    if (type != "spectrum" && type != "g2") throw InputError("fit config: type must be spectrum or g2");

    ModelState init;
    init.params = cfg.at("params").is_object() ? params_from_json(cfg.at("params"))
                                               : load_params_file(resolve(cfg.at("params"), "params"));
    std::vector<ParameterSpec> specs;
    const json parameters = cfg.value("parameters", json::object());
    for (const auto& [key, entry] : parameters.items()) {
      const std::string name = fit_parameter_name(key);
      if (entry.contains("value")) set_parameter(init, name, fit_parameter_from_json(name, entry.at("value")));
    }
    for (const auto& [key, entry] : parameters.items()) {
      const std::string name = fit_parameter_name(key);
      for (const auto& [k, v] : entry.items())
        if (k != "value" && k != "min" && k != "max" && k != "free")
          throw InputError("fit config: unknown field '" + k + "' in '" + key + "'");
      ParameterSpec s = default_spec(init, name, entry.value("free", true));
      if (entry.contains("min")) s.lower = fit_parameter_from_json(name, entry.at("min"));
      if (entry.contains("max")) s.upper = fit_parameter_from_json(name, entry.at("max"));
      specs.push_back(s);
    }

    FitOptions opt;
    const json o = cfg.value("options", json::object());
    for (const auto& [k, v] : o.items())
      if (k != "restarts" && k != "max_evals" && k != "seed") throw InputError("fit config: unknown option '" + k + "'");
    opt.restarts = o.value("restarts", opt.restarts);
    opt.max_evals = o.value("max_evals", opt.max_evals);
    opt.seed = o.value("seed", opt.seed);
    opt.threads = static_cast<unsigned>(a.threads);

    FitResult r;
    if (type == "spectrum") {
      const DataSet d = read_spectrum_csv(resolve(cfg.at("data"), "data"));
      r = fit_spectrum(d, init, specs, opt);
    } else {
      const double tmax = parse_duration(cfg.value("tmax", std::string("300ns")));
      const json& data = cfg.at("data");
      const DataSet dm = read_g2_csv(resolve(data.at("sigma_minus"), "data.sigma_minus"), DataKind::G2Minus, tmax);
      const DataSet dp = read_g2_csv(resolve(data.at("sigma_plus"), "data.sigma_plus"), DataKind::G2Plus, tmax);
      r = fit_g2_joint(dm, dp, init, specs, opt);
    }
    json j = fit_result_to_json(r);
    j["tool"] = "ionpair";
    j["version"] = kVersion;
    j["command"] = "fit";
    j["type"] = type;
    j["params_fingerprint"] = r.state.params.fingerprint();
    j["seed"] = opt.seed;
    outputs.add(a.out, j.dump(2) + "\n");
    err << "chi2 " << num(r.chi2) << " for " << r.dof << " degrees of freedom"
        << (r.converged ? "" : " (not converged)") << "\n";
  } catch (const json::exception& e) {
    throw InputError(std::string("fit config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("fit config: ") + e.what());
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Polarization-correlated photon pairs from a driven 40Ca+ ion"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1, 1);

  G2Args g2;
  auto* c_g2 = app.add_subcommand("g2", "conditioned or total g2(tau) curves");
  c_g2->add_option("--params", g2.params, "parameter file (JSON)")->required();
  c_g2->add_option("--first", g2.first, "first photon: sigma-, sigma+ or none (total g2)");
  c_g2->add_option("--second", g2.second, "second photon: sigma- or sigma+ (default both)");
  c_g2->add_option("--tmax", g2.tmax, "last delay, e.g. 1000ns");
  c_g2->add_option("--step", g2.step, "grid spacing, e.g. 1ns");
  c_g2->add_option("--out", g2.out, "output CSV (default stdout)");
  add_error_options(c_g2, g2.eps);

  SpectrumArgs sp;
  auto* c_sp = app.add_subcommand("spectrum", "steady-state fluorescence versus 866 detuning");
  c_sp->add_option("--params", sp.params, "parameter file (JSON)")->required();
  c_sp->add_option("--from", sp.from, "first detuning, e.g. -40MHz");
  c_sp->add_option("--to", sp.to, "last detuning, e.g. 40MHz");
  c_sp->add_option("--points", sp.points, "number of detunings");
  c_sp->add_option("--scale", sp.scale, "counts/s per unit excited population");
  c_sp->add_option("--background", sp.background, "background counts/s");
  c_sp->add_option("--out", sp.out, "output CSV (default stdout)");

  PurityArgs pu;
  auto* c_pu = app.add_subcommand("purity", "purity p(tau) and pair probability p/(1+p)");
  c_pu->add_option("--params", pu.params, "parameter file (JSON)")->required();
  c_pu->add_option("--tau", pu.tau, "single delay, e.g. 24ns");
  c_pu->add_option("--tmax", pu.tmax, "last delay of the curve");
  c_pu->add_option("--step", pu.step, "grid spacing");
  c_pu->add_option("--out", pu.out, "output CSV (default stdout)");
  add_error_options(c_pu, pu.eps);

  SimulateArgs si;
  auto* c_si = app.add_subcommand("simulate", "quantum-jump photon streams for two detectors (IONCLK1)");
  c_si->add_option("--params", si.params, "parameter file (JSON)")->required();
  c_si->add_option("--duration", si.duration, "simulated time, e.g. 10ms")->required();
  c_si->add_option("--seed", si.seed, "random seed");
  c_si->add_option("--out", si.out, "output prefix")->required();
  c_si->add_option("--efficiency1", si.efficiency1, "detection efficiency of path 1");
  c_si->add_option("--efficiency2", si.efficiency2, "detection efficiency of path 2");
  c_si->add_option("--accept1", si.accept1, "polarization accepted by PMT1 (sigma-, sigma+, pi, any)");
  c_si->add_option("--accept2", si.accept2, "polarization accepted by PMT2");
  c_si->add_option("--crosstalk1", si.crosstalk1, "pass probability of other polarizations, PMT1");
  c_si->add_option("--crosstalk2", si.crosstalk2, "pass probability of other polarizations, PMT2");
  c_si->add_option("--dark-rate1", si.dark1, "dark counts per second, PMT1");
  c_si->add_option("--dark-rate2", si.dark2, "dark counts per second, PMT2");
  c_si->add_option("--wavelength", si.wavelength, "color filter: 397, 866 or any");
  c_si->add_flag("--csv", si.csv, "also write CSV mirrors");
  c_si->add_flag("--raw", si.raw, "also write the undetected emission record");

  CorrelateArgs co;
  auto* c_co = app.add_subcommand("correlate", "correlation histogram of timestamp streams");
  c_co->add_option("--a", co.a, "first stream (IONCLK1 or CSV)")->required();
  c_co->add_option("--b", co.b, "second stream (default: autocorrelation of --a)");
  c_co->add_option("--bin", co.bin, "bin width, e.g. 1ns");
  c_co->add_option("--window", co.window, "histogram half-width, e.g. 100ns");
  c_co->add_option("--filter-a", co.filter_a, "polarization filter on a (sigma-, sigma+, pi, any)");
  c_co->add_option("--filter-b", co.filter_b, "polarization filter on b");
  c_co->add_option("--wavelength", co.wavelength, "wavelength filter on both sides: 397, 866 or any");
  c_co->add_flag("--raw", co.raw, "raw counts in the g2 column");
  c_co->add_option("--shards", co.shards, "worker threads");
  c_co->add_option("--out", co.out, "output CSV (default stdout)");

  FitArgs fi;
  auto* c_fi = app.add_subcommand("fit", "fit a spectrum or a pair of conditioned g2 curves");
  c_fi->add_option("--config", fi.config, "fit configuration (JSON)")->required();
  c_fi->add_option("--out", fi.out, "result JSON (default stdout)");
  c_fi->add_option("--threads", fi.threads, "threads for the restarts (0: all cores)");

  auto* c_st = app.add_subcommand("selftest", "run the built-in invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  Outputs outputs(out);
  try {
    if (c_g2->parsed()) run_g2(g2, outputs, err);
    else if (c_sp->parsed()) run_spectrum(sp, outputs, err);
    else if (c_pu->parsed()) run_purity(pu, outputs, err);
    else if (c_si->parsed()) run_simulate(si, outputs, err);
    else if (c_co->parsed()) run_correlate(co, outputs, err);
    else if (c_fi->parsed()) run_fit(fi, outputs, err);
    else if (c_st->parsed()) return run_selftest(out) ? kExitOk : kExitSelftest;
    outputs.commit();
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const DegenerateSteadyState& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

}  // namespace ionpair
