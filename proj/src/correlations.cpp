#include "ionpair/correlations.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace ionpair {

const char* to_string(CurveKind k) {
  switch (k) {
    case CurveKind::Total: return "total";
    case CurveKind::MinusMinus: return "sigma-|sigma-";
    case CurveKind::MinusPlus: return "sigma-|sigma+";
    case CurveKind::PlusPlus: return "sigma+|sigma+";
    case CurveKind::PlusMinus: return "sigma+|sigma-";
  }
  return "?";
}

namespace {

void require_sigma(Polarization p) {
  if (p == Polarization::Pi) throw std::invalid_argument("conditioned g2 is defined for sigma photons only");
}

// A sigma- photon leaves the ion in |2>, a sigma+ photon in |1>.
int projected_level(Polarization first) {
  return first == Polarization::SigmaMinus ? level::S_p12 : level::S_m12;
}

int emitting_level(Polarization second) {
  return second == Polarization::SigmaMinus ? level::P_m12 : level::P_p12;
}

}  // namespace

CurveKind conditioned_kind(Polarization first, Polarization second) {
  require_sigma(first);
  require_sigma(second);
  if (first == Polarization::SigmaMinus)
    return second == Polarization::SigmaMinus ? CurveKind::MinusMinus : CurveKind::MinusPlus;
  return second == Polarization::SigmaPlus ? CurveKind::PlusPlus : CurveKind::PlusMinus;
}

double CorrelationCurve::peak_value() const { return *std::max_element(values.begin(), values.end()); }

double CorrelationCurve::peak_tau() const {
  return tau[static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin())];
}

CorrelationModel::CorrelationModel(const ExperimentParams& params, const ModelOptions& options)
    : params_(params), L_(build_liouvillian(params, options)), steady_{Matrix8::Zero()}, residual_(0.0) {
  SteadyStateReport r = steady_state_report(L_);
  steady_ = r.state;
  residual_ = r.residual;
}

CorrelationCurve CorrelationModel::total(std::span<const double> grid) const {
  const double r33 = steady_.population(level::P_m12), r44 = steady_.population(level::P_p12);
  // sigma_1 rho sigma_1^dag + sigma_2 rho sigma_2^dag, normalized
  DensityMatrix init{Matrix8::Zero()};
  init.rho(level::S_m12, level::S_m12) = r44 / (r33 + r44);
  init.rho(level::S_p12, level::S_p12) = r33 / (r33 + r44);

  const int levels[] = {level::P_m12, level::P_p12};
  const auto pops = propagate_populations(L_, init, grid, levels);
  CorrelationCurve c{{grid.begin(), grid.end()}, std::vector<double>(grid.size()), CurveKind::Total, r33, r44};
  for (std::size_t k = 0; k < grid.size(); ++k) c.values[k] = (pops[0][k] + pops[1][k]) / (r33 + r44);
  return c;
}

CorrelationCurve CorrelationModel::conditioned(Polarization first, Polarization second,
                                               std::span<const double> grid) const {
  const CurveKind kind = conditioned_kind(first, second);
  const int target = emitting_level(second);
  const int levels[] = {target};
  const auto pops = propagate_populations(L_, DensityMatrix::pure(projected_level(first)), grid, levels);
  const double norm = steady_.population(target);
  CorrelationCurve c{{grid.begin(), grid.end()}, std::vector<double>(grid.size()), kind,
                     steady_.population(level::P_m12), steady_.population(level::P_p12)};
  for (std::size_t k = 0; k < grid.size(); ++k) c.values[k] = pops[0][k] / norm;
  return c;
}

CorrelationModel::ConditionedSet CorrelationModel::conditioned_all(std::span<const double> grid) const {
  const double r33 = steady_.population(level::P_m12), r44 = steady_.population(level::P_p12);
  const int levels[] = {level::P_m12, level::P_p12};
  auto make = [&](int from, CurveKind k33, CurveKind k44) {
    const auto pops = propagate_populations(L_, DensityMatrix::pure(from), grid, levels);
    CorrelationCurve a{{grid.begin(), grid.end()}, pops[0], k33, r33, r44};
    CorrelationCurve b{{grid.begin(), grid.end()}, pops[1], k44, r33, r44};
    for (double& v : a.values) v /= r33;
    for (double& v : b.values) v /= r44;
    return std::pair{a, b};
  };
  auto [mm, mp] = make(level::S_p12, CurveKind::MinusMinus, CurveKind::MinusPlus);
  auto [pm, pp] = make(level::S_m12, CurveKind::PlusMinus, CurveKind::PlusPlus);
  return {mm, mp, pp, pm};
}

CorrelationCurve g2_total(const ExperimentParams& params, std::span<const double> grid) {
  return CorrelationModel(params).total(grid);
}

CorrelationCurve g2_conditioned(const ExperimentParams& params, Polarization first, Polarization second,
                                std::span<const double> grid) {
  return CorrelationModel(params).conditioned(first, second, grid);
}

double log_log_slope(std::span<const double> tau, std::span<const double> values, double window_lo,
                     double window_hi) {
  if (tau.size() != values.size()) throw std::invalid_argument("tau and values differ in length");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < tau.size(); ++k) {
    if (tau[k] < window_lo * (1 - 1e-9) || tau[k] > window_hi * (1 + 1e-9)) continue;
    if (!(values[k] > 0)) throw std::domain_error("non-positive g2 value inside the exponent fit window");
    const double x = std::log(tau[k]), y = std::log(values[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) throw std::invalid_argument("fewer than two grid points inside the exponent fit window");
  const double dn = static_cast<double>(n);
  return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

std::pair<double, double> short_time_exponents(const CorrelationCurve& sigma_minus,
                                               const CorrelationCurve& sigma_plus, double window_lo,
                                               double window_hi) {
  return {log_log_slope(sigma_minus.tau, sigma_minus.values, window_lo, window_hi),
          log_log_slope(sigma_plus.tau, sigma_plus.values, window_lo, window_hi)};
}

namespace {

void require_same_grid(const CorrelationCurve& a, const CorrelationCurve& b) {
  if (a.tau.size() != b.tau.size() || a.values.size() != a.tau.size() || b.values.size() != b.tau.size())
    throw std::invalid_argument("curves must share one grid");
  for (std::size_t k = 0; k < a.tau.size(); ++k)
    if (a.tau[k] != b.tau[k]) throw std::invalid_argument("curves must share one grid");
}

void require_integration_grid(const CorrelationCurve& a, const CorrelationCurve& b) {
  require_same_grid(a, b);
  if (a.tau.empty() || a.tau.front() != 0.0) throw std::invalid_argument("curve grid must start at 0");
}

}  // namespace

std::vector<double> purity_curve(const CorrelationCurve& sigma_minus, const CorrelationCurve& sigma_plus) {
  require_integration_grid(sigma_minus, sigma_plus);
  std::vector<double> p(sigma_minus.tau.size(), std::numeric_limits<double>::quiet_NaN());
  double num = 0, den = 0;
  for (std::size_t k = 1; k < p.size(); ++k) {
    const double h = sigma_minus.tau[k] - sigma_minus.tau[k - 1];
    num += 0.5 * h * (sigma_minus.values[k] + sigma_minus.values[k - 1]);
    den += 0.5 * h * (sigma_plus.values[k] + sigma_plus.values[k - 1]);
    p[k] = den > 0 ? num / den : std::numeric_limits<double>::infinity();
  }
  return p;
}

double purity(const CorrelationCurve& sigma_minus, const CorrelationCurve& sigma_plus, double tau) {
  require_integration_grid(sigma_minus, sigma_plus);
  const auto& g = sigma_minus.tau;
  const double tol = 1e-6 * (g.size() > 1 ? g[1] - g[0] : 1.0);
  const auto it = std::lower_bound(g.begin(), g.end(), tau - tol);
  if (it == g.end() || std::abs(*it - tau) > tol) throw std::invalid_argument("purity time is not on the grid");
  const auto idx = static_cast<std::size_t>(it - g.begin());
  double num = 0, den = 0;
  for (std::size_t k = 1; k <= idx; ++k) {
    const double h = g[k] - g[k - 1];
    num += 0.5 * h * (sigma_minus.values[k] + sigma_minus.values[k - 1]);
    den += 0.5 * h * (sigma_plus.values[k] + sigma_plus.values[k - 1]);
  }
  if (den == 0.0) throw std::domain_error("purity denominator integral is zero");
  return num / den;
}

double pair_probability(double p) {
  if (!(p >= 0)) throw std::invalid_argument("purity must be >= 0");
  if (std::isinf(p)) return 1.0;
  return p / (1.0 + p);
}

void ErrorModel::validate() const {
  for (double e : {eps_init, eps_minus, eps_plus})
    if (!(e >= 0.0 && e <= 1.0)) throw std::invalid_argument("error-model fractions must lie in [0, 1]");
}

std::pair<CorrelationCurve, CorrelationCurve> apply_error_model(const CorrelationModel::ConditionedSet& c,
                                                                const ErrorModel& em) {
  em.validate();
  require_same_grid(c.mm, c.mp);
  require_same_grid(c.mm, c.pp);
  require_same_grid(c.mm, c.pm);
  const std::size_t n = c.mm.tau.size();

  // Curves start in (1 - eps_init)|2><2| + eps_init |1><1|; the regression is linear in the
  // initial state and both terms share the steady-state normalization.
  std::vector<double> cond_minus(n), cond_plus(n);
  for (std::size_t k = 0; k < n; ++k) {
    cond_minus[k] = (1 - em.eps_init) * c.mm.values[k] + em.eps_init * c.pm.values[k];
    cond_plus[k] = (1 - em.eps_init) * c.mp.values[k] + em.eps_init * c.pp.values[k];
  }
  CorrelationCurve minus = c.mm, plus = c.mp;
  for (std::size_t k = 0; k < n; ++k) {
    minus.values[k] = (1 - em.eps_minus) * cond_minus[k] + em.eps_minus * cond_plus[k];
    plus.values[k] = (1 - em.eps_plus) * cond_plus[k] + em.eps_plus * cond_minus[k];
  }
  return {minus, plus};
}

CorrelationCurve with_background(CorrelationCurve curve, double floor) {
  if (!(floor >= 0)) throw std::invalid_argument("background floor must be >= 0");
  for (double& v : curve.values) v += floor;
  return curve;
}

std::vector<double> SpectrumCurve::values() const {
  std::vector<double> v(points.size());
  for (std::size_t k = 0; k < points.size(); ++k) v[k] = value(k);
  return v;
}

std::vector<std::size_t> SpectrumCurve::local_minima() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 1; k + 1 < points.size(); ++k) {
    const double v = points[k].excited;
    if (v < points[k - 1].excited && v < points[k + 1].excited) out.push_back(k);
  }
  return out;
}

SpectrumCurve excitation_spectrum(const ExperimentParams& params, std::span<const double> detunings866, double scale,
                                  double background, const ModelOptions& options) {
  if (!(background >= 0)) throw std::invalid_argument("spectrum background must be >= 0");
  SpectrumCurve s;
  s.scale = scale;
  s.background = background;
  s.points.reserve(detunings866.size());
  ExperimentParams p = params;
  for (double d : detunings866) {
    p.detuning866 = d;
    const Liouvillian L = build_liouvillian(p, options);
    SpectrumPoint pt{d, 0.0, false};
    try {
      const SteadyStateReport r = steady_state_report(L);
      pt.excited = r.state.population(level::P_m12) + r.state.population(level::P_p12);
    } catch (const DegenerateSteadyState&) {
      pt.flagged = true;
    }
    s.points.push_back(pt);
  }
  return s;
}

std::vector<double> default_spectrum_detunings() {
  constexpr int kPoints = 400;
  std::vector<double> d(kPoints);
  for (int k = 0; k < kPoints; ++k) d[k] = mhz(-40.0 + 80.0 * k / (kPoints - 1));
  return d;
}

std::vector<double> raman_resonances(const ExperimentParams& params) {
  const LevelScheme scheme = LevelScheme::calcium40();
  const TransitionTable table = build_transition_table(scheme, params.gamma_sp, params.gamma_dp);
  const Matrix8 h = build_hamiltonian(params, scheme, table);
  const auto shifts = zeeman_shifts(scheme, params.field_gauss);

  std::set<long long> seen;
  std::vector<double> out;
  for (int s : {level::S_m12, level::S_p12})
    for (int d = level::D_m32; d < kNumLevels; ++d)
      for (int p : {level::P_m12, level::P_p12}) {
        if (std::abs(h(p, s)) == 0.0 || std::abs(h(p, d)) == 0.0) continue;
        const double pos = params.detuning397 + shifts[s] - shifts[d];
        if (seen.insert(std::llround(pos)).second) out.push_back(pos);
      }
  std::sort(out.begin(), out.end());
  return out;
}

double mean_photon_number(const ExperimentParams& params, Polarization pol, double window, PhotonCountMode mode) {
  require_sigma(pol);
  if (!(window >= 0)) throw std::invalid_argument("photon-count window must be >= 0");
  // sigma channels carry 2/3 of the S-P decay
  const double sigma_rate = params.gamma_sp * 2.0 / 3.0;
  const int upper = emitting_level(pol);
  const CorrelationModel model(params);
  if (mode == PhotonCountMode::Steady) return sigma_rate * model.steady().population(upper) * window;
  if (window == 0.0) return 0.0;

  const auto steps = static_cast<std::size_t>(std::ceil(window / 0.01e-9));
  std::vector<double> grid(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) grid[k] = window * static_cast<double>(k) / static_cast<double>(steps);
  const int levels[] = {upper};
  const auto pops =
      propagate_populations(model.liouvillian(), DensityMatrix::pure(level::S_p12), grid, levels)[0];
  double integral = 0;
  for (std::size_t k = 1; k < grid.size(); ++k) integral += 0.5 * (grid[k] - grid[k - 1]) * (pops[k] + pops[k - 1]);
  return sigma_rate * integral;
}

}  // namespace ionpair
