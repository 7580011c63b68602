#include "ionpair/fitting.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <future>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "ionpair/rng.hpp"

namespace ionpair {

const char* to_string(DataKind k) {
  switch (k) {
    case DataKind::Spectrum: return "spectrum";
    case DataKind::G2Minus: return "g2_sigma_minus";
    case DataKind::G2Plus: return "g2_sigma_plus";
  }
  return "?";
}

void DataSet::validate() const {
  if (x.size() != y.size() || x.size() != sigma.size()) throw std::invalid_argument("data set columns differ in length");
  if (x.empty()) throw std::invalid_argument("data set is empty");
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!std::isfinite(x[k]) || !std::isfinite(y[k])) throw std::invalid_argument("data set has non-finite values");
    if (!(sigma[k] > 0) || !std::isfinite(sigma[k])) throw std::invalid_argument("data errors must be > 0");
  }
  if (!(bin_width >= 0)) throw std::invalid_argument("bin width must be >= 0");
  for (const auto& r : replicas) {
    if (r.size() != x.size()) throw std::invalid_argument("data replica differs in length from the data");
    for (double v : r)
      if (!std::isfinite(v)) throw std::invalid_argument("data replica has non-finite values");
  }
  if (replicas.size() == 1) throw std::invalid_argument("jackknife needs at least two replicas");
  if (kind != DataKind::Spectrum)
    for (double t : x)
      if (t - 0.5 * bin_width < -1e-15) throw std::invalid_argument("g2 data must lie at non-negative delays");
}

std::vector<double> poisson_errors(std::span<const double> counts) {
  std::vector<double> e(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k) e[k] = std::max(1.0, std::sqrt(std::max(0.0, counts[k])));
  return e;
}

namespace {

struct Field {
  const char* name;
  double ModelState::*top = nullptr;
  double ExperimentParams::*phys = nullptr;
  double ErrorModel::*err = nullptr;
};

const std::array<Field, 14> kFields = {{
    {"omega397", nullptr, &ExperimentParams::rabi397},
    {"omega866", nullptr, &ExperimentParams::rabi866},
    {"delta397", nullptr, &ExperimentParams::detuning397},
    {"delta866", nullptr, &ExperimentParams::detuning866},
    {"field", nullptr, &ExperimentParams::field_gauss},
    {"alpha397", nullptr, &ExperimentParams::alpha397},
    {"alpha866", nullptr, &ExperimentParams::alpha866},
    {"scale", &ModelState::scale},
    {"background", &ModelState::background},
    {"eps_init", nullptr, nullptr, &ErrorModel::eps_init},
    {"eps_minus", nullptr, nullptr, &ErrorModel::eps_minus},
    {"eps_plus", nullptr, nullptr, &ErrorModel::eps_plus},
    {"g2_scale", &ModelState::g2_scale},
    {"g2_background", &ModelState::g2_background},
}};

const Field& field(const std::string& name) {
  for (const Field& f : kFields)
    if (name == f.name) return f;
  throw std::invalid_argument("unknown fit parameter '" + name + "'");
}

}  // namespace

bool is_fit_parameter(const std::string& name) {
  return std::any_of(kFields.begin(), kFields.end(), [&](const Field& f) { return name == f.name; });
}

double get_parameter(const ModelState& s, const std::string& name) {
  const Field& f = field(name);
  if (f.top) return s.*f.top;
  if (f.phys) return s.params.*f.phys;
  return s.errors.*f.err;
}

void set_parameter(ModelState& s, const std::string& name, double value) {
  const Field& f = field(name);
  if (f.top) s.*f.top = value;
  else if (f.phys) s.params.*f.phys = value;
  else s.errors.*f.err = value;
}

ParameterSpec default_spec(const ModelState& s, const std::string& name, bool free) {
  const double v = get_parameter(s, name);
  ParameterSpec p{name, v, 0.0, 0.0, free};
  if (name == "omega397" || name == "omega866") {
    p.upper = std::max(4.0 * v, mhz(50.0));
  } else if (name == "delta397" || name == "delta866") {
    p.lower = v - mhz(30.0);
    p.upper = v + mhz(30.0);
  } else if (name == "field") {
    p.upper = std::max(3.0 * v, 10.0);
  } else if (name == "alpha397" || name == "alpha866") {
    // alpha and pi - alpha on both lasers give identical physics; stay on one branch
    p.upper = std::numbers::pi / 2;
  } else if (name == "scale" || name == "background") {
    p.upper = std::max(10.0 * v, 1000.0);
  } else if (name.starts_with("eps_")) {
    p.upper = 0.5;
  } else if (name == "g2_scale") {
    p.lower = 0.5;
    p.upper = 2.0;
  } else if (name == "g2_background") {
    p.upper = 1.0;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Optimizer

MinimizeResult nelder_mead(const Objective& f, std::vector<double> x0, const std::vector<double>& lower,
                           const std::vector<double>& upper, int max_evals, double f_tol, double x_tol) {
  const std::size_t n = x0.size();
  if (lower.size() != n || upper.size() != n) throw std::invalid_argument("bounds do not match the start point");
  for (std::size_t i = 0; i < n; ++i)
    if (!(upper[i] > lower[i])) throw std::invalid_argument("each free parameter needs lower < upper");

  // The simplex lives in the unit cube so that every parameter has the same scale.
  auto to_phys = [&](const std::vector<double>& u) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = lower[i] + std::clamp(u[i], 0.0, 1.0) * (upper[i] - lower[i]);
    return x;
  };
  MinimizeResult res;
  auto eval = [&](std::vector<double>& u) {
    for (double& c : u) c = std::clamp(c, 0.0, 1.0);
    ++res.evaluations;
    const double v = f(to_phys(u));
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  std::vector<std::vector<double>> s(n + 1, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) s[0][i] = (x0[i] - lower[i]) / (upper[i] - lower[i]);
  for (std::size_t j = 1; j <= n; ++j) {
    s[j] = s[0];
    const double step = s[0][j - 1] + 0.05 <= 1.0 ? 0.05 : -0.05;
    s[j][j - 1] += step;
  }
  std::vector<double> fv(n + 1);
  for (std::size_t j = 0; j <= n; ++j) fv[j] = eval(s[j]);

  std::vector<std::size_t> order(n + 1);
  auto sort = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
  };
  auto point = [&](const std::vector<double>& c, const std::vector<double>& w, double t) {
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = c[i] + t * (w[i] - c[i]);
    return p;
  };

  sort();
  while (true) {
    const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];
    double size = 0.0;
    for (std::size_t j = 0; j <= n; ++j)
      for (std::size_t i = 0; i < n; ++i) size = std::max(size, std::abs(s[j][i] - s[best][i]));
    const double spread = fv[worst] - fv[best];
    if (spread <= f_tol * (1.0 + std::abs(fv[best])) && size <= x_tol) {
      res.converged = true;
      break;
    }
    if (res.evaluations >= max_evals) break;

    std::vector<double> c(n, 0.0);
    for (std::size_t j = 0; j <= n; ++j)
      if (j != worst)
        for (std::size_t i = 0; i < n; ++i) c[i] += s[j][i] / static_cast<double>(n);

    std::vector<double> xr = point(c, s[worst], -1.0);
    const double fr = eval(xr);
    if (fr < fv[best]) {
      std::vector<double> xe = point(c, s[worst], -2.0);
      const double fe = eval(xe);
      if (fe < fr) {
        s[worst] = xe;
        fv[worst] = fe;
      } else {
        s[worst] = xr;
        fv[worst] = fr;
      }
    } else if (fr < fv[second]) {
      s[worst] = xr;
      fv[worst] = fr;
    } else {
      const bool outside = fr < fv[worst];
      std::vector<double> xc = point(c, outside ? xr : s[worst], 0.5);
      const double fc = eval(xc);
      if (fc < (outside ? fr : fv[worst])) {
        s[worst] = xc;
        fv[worst] = fc;
      } else {
        for (std::size_t j = 0; j <= n; ++j) {
          if (j == best) continue;
          s[j] = point(s[best], s[j], 0.5);
          fv[j] = eval(s[j]);
        }
      }
    }
    sort();
    res.history.push_back(fv[order.front()]);
  }
  res.x = to_phys(s[order.front()]);
  res.f = fv[order.front()];
  return res;
}

MinimizeResult minimize(const Objective& f, const std::vector<double>& x0, const std::vector<double>& lower,
                        const std::vector<double>& upper, const FitOptions& options) {
  if (options.restarts < 1 || options.max_evals < 1) throw std::invalid_argument("fit needs at least one run and one evaluation");
  const std::size_t n = x0.size();
  const Rng root(options.seed);
  std::vector<std::vector<double>> starts(static_cast<std::size_t>(options.restarts), x0);
  for (std::size_t r = 1; r < starts.size(); ++r) {
    Rng rng = root.split(r);
    for (std::size_t i = 0; i < n; ++i) {
      const double width = std::max(std::abs(x0[i]), 0.05 * (upper[i] - lower[i]));
      starts[r][i] = std::clamp(x0[i] + options.spread * (2.0 * rng.uniform() - 1.0) * width, lower[i], upper[i]);
    }
  }

  std::vector<MinimizeResult> runs(starts.size());
  auto run = [&](std::size_t r) {
    runs[r] = nelder_mead(f, starts[r], lower, upper, options.max_evals, options.f_tol, options.x_tol);
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned threads = std::min<unsigned>(options.threads ? options.threads : hw, static_cast<unsigned>(starts.size()));
  if (threads <= 1) {
    for (std::size_t r = 0; r < starts.size(); ++r) run(r);
  } else {
    std::vector<std::future<void>> pending;
    for (unsigned t = 0; t < threads; ++t)
      pending.push_back(std::async(std::launch::async, [&, t] {
        for (std::size_t r = t; r < starts.size(); r += threads) run(r);
      }));
    for (auto& p : pending) p.get();
  }

  std::size_t best = 0;
  int evals = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    evals += runs[r].evaluations;
    if (runs[r].f < runs[best].f) best = r;
  }
  // A fresh simplex around the best point escapes a collapsed one.
  MinimizeResult polish = nelder_mead(f, runs[best].x, lower, upper, options.max_evals, options.f_tol, options.x_tol);
  MinimizeResult out = polish.f <= runs[best].f ? polish : runs[best];
  out.evaluations = evals + polish.evaluations;
  out.converged = polish.converged;
  out.history = runs[best].history;
  for (double h : polish.history) out.history.push_back(std::min(h, runs[best].f));
  return out;
}

// ---------------------------------------------------------------------------
// Forward models

namespace {

using Real64 = Eigen::Matrix<double, kLiouvilleDim, kLiouvilleDim>;

// Coordinates of a Hermitian matrix: 8 diagonal entries, then Re and Im of each upper
// off-diagonal entry. L is real in this basis.
struct RealBasis {
  Eigen::MatrixXcd to_vec;
  Eigen::MatrixXcd from_vec;

  RealBasis() : to_vec(Eigen::MatrixXcd::Zero(kLiouvilleDim, kLiouvilleDim)) {
    const cplx i(0.0, 1.0);
    int col = 0;
    for (int k = 0; k < kNumLevels; ++k) to_vec(k + kNumLevels * k, col++) = 1.0;
    for (int r = 0; r < kNumLevels; ++r)
      for (int c = r + 1; c < kNumLevels; ++c) {
        to_vec(r + kNumLevels * c, col) = 1.0;
        to_vec(c + kNumLevels * r, col++) = 1.0;
        to_vec(r + kNumLevels * c, col) = i;
        to_vec(c + kNumLevels * r, col++) = -i;
      }
    from_vec = to_vec.inverse();
  }

  Real64 real(const Eigen::MatrixXcd& l) const { return (from_vec * l * to_vec).real(); }
};

const RealBasis& real_basis() {
  static const RealBasis basis;
  return basis;
}

}  // namespace

std::vector<double> excited_population_scan(const ExperimentParams& params, std::span<const double> detunings866) {
  if (detunings866.empty()) return {};
  // L is affine in the 866 detuning: L(d) = L(d0) + (d - d0) D.
  const double d0 = detunings866.front();
  ExperimentParams p = params;
  p.detuning866 = d0;
  Real64 a0 = real_basis().real(build_liouvillian(p).matrix());
  const double probe = d0 + mhz(10.0);
  p.detuning866 = probe;
  Real64 slope = (real_basis().real(build_liouvillian(p).matrix()) - a0) / (probe - d0);

  // Row 0 of L r = 0 is replaced by the trace condition.
  const double scale = a0.cwiseAbs().maxCoeff();
  a0.row(0).setZero();
  a0.row(0).head<kNumLevels>().setConstant(scale);
  slope.row(0).setZero();
  Eigen::Matrix<double, kLiouvilleDim, 1> rhs = Eigen::Matrix<double, kLiouvilleDim, 1>::Zero();
  rhs(0) = scale;
  auto excited = [](const auto& r) { return (r(level::P_m12) + r(level::P_p12)) / r.template head<kNumLevels>().sum(); };

  std::vector<double> out(detunings866.size());
  auto direct = [&] {
    for (std::size_t k = 0; k < detunings866.size(); ++k) {
      const Real64 a = a0 + (detunings866[k] - d0) * slope;
      out[k] = excited(a.partialPivLu().solve(rhs).eval());
    }
    return out;
  };

  // With M = A0^-1 D = Q H Q^T (H upper Hessenberg) the solution at any detuning is
  // r(d) = Q (1 + (d - d0) H)^-1 Q^T A0^-1 b, and the Hessenberg solve costs O(64^2).
  const auto lu = a0.partialPivLu();
  if (!(std::abs(lu.determinant()) > 0)) return direct();
  const Eigen::HessenbergDecomposition<Real64> hd(lu.solve(slope).eval());
  const Real64 h = hd.matrixH();
  const Real64 q = hd.matrixQ();
  const Eigen::Matrix<double, kLiouvilleDim, 1> y0 = q.transpose() * lu.solve(rhs);
  const Eigen::Matrix<double, kNumLevels, kLiouvilleDim> q_diag = q.topRows<kNumLevels>();

  Real64 b;
  Eigen::Matrix<double, kLiouvilleDim, 1> y;
  for (std::size_t k = 0; k < detunings866.size(); ++k) {
    b = (detunings866[k] - d0) * h;
    b.diagonal().array() += 1.0;
    y = y0;
    // Gaussian elimination of the single subdiagonal, pivoting between adjacent rows.
    for (int i = 0; i + 1 < kLiouvilleDim; ++i) {
      if (std::abs(b(i + 1, i)) > std::abs(b(i, i))) {
        b.row(i).tail(kLiouvilleDim - i).swap(b.row(i + 1).tail(kLiouvilleDim - i));
        std::swap(y(i), y(i + 1));
      }
      if (b(i + 1, i) == 0.0) continue;
      const double f = b(i + 1, i) / b(i, i);
      b.row(i + 1).tail(kLiouvilleDim - i) -= f * b.row(i).tail(kLiouvilleDim - i);
      y(i + 1) -= f * y(i);
    }
    b.triangularView<Eigen::Upper>().solveInPlace(y);
    const Eigen::Matrix<double, kNumLevels, 1> r = q_diag * y;
    out[k] = (r(level::P_m12) + r(level::P_p12)) / r.sum();
    if (!std::isfinite(out[k])) return direct();
  }
  return out;
}

std::vector<double> spectrum_model(const ModelState& s, const DataSet& data) {
  std::vector<double> v = excited_population_scan(s.params, data.x);
  for (double& e : v) e = s.scale * e + s.background;
  return v;
}

namespace {

// Populations of the two P sublevels after a projection onto |1> or |2>, written as a
// sum of Liouvillian eigenmodes so that any delay or bin average costs O(64).
class ModeExpansion {
 public:
  explicit ModeExpansion(const ExperimentParams& params) {
    const Liouvillian L = build_liouvillian(params);
    const Real64 l = real_basis().real(L.matrix());
    Eigen::EigenSolver<Real64> es(l);
    if (es.info() != Eigen::Success) throw std::runtime_error("Liouvillian eigendecomposition failed");
    lambda_ = es.eigenvalues();
    const Eigen::MatrixXcd v = es.eigenvectors();
    const auto lu = v.partialPivLu();
    const Eigen::MatrixXcd rebuilt = v * lambda_.asDiagonal() * lu.inverse();
    if ((rebuilt - l.cast<cplx>()).norm() > 1e-8 * l.norm())
      throw std::runtime_error("Liouvillian is not diagonalizable here");

    const DensityMatrix ss = steady_state_fast(L);
    norm_ = {ss.population(level::P_m12), ss.population(level::P_p12)};
    const int from[2] = {level::S_p12, level::S_m12};  // after a sigma- / sigma+ detection
    const int to[2] = {level::P_m12, level::P_p12};
    for (int a = 0; a < 2; ++a) {
      // diagonal entries come first in the real basis
      const Eigen::VectorXcd c = lu.solve(Eigen::VectorXcd::Unit(kLiouvilleDim, from[a]));
      for (int b = 0; b < 2; ++b) amp_[a][b] = v.row(to[b]).transpose().cwiseProduct(c) / norm_[b];
    }
  }

  // Normalized population of P sublevel b after projection a, averaged over [t, t + w].
  double value(int a, int b, double t, double w) const {
    cplx sum = 0.0;
    for (Eigen::Index k = 0; k < lambda_.size(); ++k) {
      const cplx z = lambda_(k) * w;
      const cplx avg = std::abs(z) < 1e-6 ? 1.0 + z / 2.0 + z * z / 6.0 : (std::exp(z) - 1.0) / z;
      sum += amp_[a][b](k) * std::exp(lambda_(k) * t) * avg;
    }
    return sum.real();
  }

 private:
  Eigen::VectorXcd lambda_;
  std::array<std::array<Eigen::VectorXcd, 2>, 2> amp_;
  std::array<double, 2> norm_{};
};

std::vector<double> g2_from_modes(const ModeExpansion& m, const ModelState& s, const DataSet& data) {
  if (data.kind == DataKind::Spectrum) throw std::invalid_argument("g2 model needs g2 data");
  const std::size_t n = data.size();
  CorrelationModel::ConditionedSet set;
  auto curve = [&](int a, int b, CurveKind kind) {
    CorrelationCurve c{data.x, std::vector<double>(n), kind, 0.0, 0.0};
    for (std::size_t k = 0; k < n; ++k)
      c.values[k] = m.value(a, b, std::max(0.0, data.x[k] - 0.5 * data.bin_width), data.bin_width);
    return c;
  };
  set.mm = curve(0, 0, CurveKind::MinusMinus);
  set.mp = curve(0, 1, CurveKind::MinusPlus);
  set.pm = curve(1, 0, CurveKind::PlusMinus);
  set.pp = curve(1, 1, CurveKind::PlusPlus);
  const auto [minus, plus] = apply_error_model(set, s.errors);
  std::vector<double> v = data.kind == DataKind::G2Minus ? minus.values : plus.values;
  for (double& e : v) e = s.g2_scale * e + s.g2_background;
  return v;
}

}  // namespace

std::vector<double> g2_model(const ModelState& s, const DataSet& data) {
  data.validate();
  return g2_from_modes(ModeExpansion(s.params), s, data);
}

double chi_square(const DataSet& data, std::span<const double> model) {
  if (model.size() != data.size()) throw std::invalid_argument("model and data differ in length");
  double chi2 = 0.0;
  for (std::size_t k = 0; k < model.size(); ++k) {
    const double r = (model[k] - data.y[k]) / data.sigma[k];
    chi2 += r * r;
  }
  return chi2;
}

// ---------------------------------------------------------------------------
// Fits

namespace {

using StateObjective = std::function<double(const ModelState&)>;

// Data sets of one fit laid end to end, for the jackknife covariance.
struct Stacked {
  std::function<std::vector<double>(const ModelState&)> model;
  std::vector<double> sigma;
  std::vector<std::vector<double>> replicas;
};

Stacked stack(const std::vector<const DataSet*>& sets,
              std::function<std::vector<double>(const ModelState&)> model) {
  Stacked out;
  out.model = std::move(model);
  const std::size_t b = sets.front()->replicas.size();
  for (const DataSet* d : sets)
    if (d->replicas.size() != b) throw std::invalid_argument("data sets carry different numbers of replicas");
  out.replicas.resize(b);
  for (const DataSet* d : sets) {
    out.sigma.insert(out.sigma.end(), d->sigma.begin(), d->sigma.end());
    for (std::size_t r = 0; r < b; ++r) out.replicas[r].insert(out.replicas[r].end(), d->replicas[r].begin(), d->replicas[r].end());
  }
  return out;
}

FitResult run_fit(const StateObjective& objective, std::size_t points, const ModelState& init,
                  const std::vector<ParameterSpec>& parameters, const FitOptions& options, const Stacked& stacked) {
  FitResult res;
  res.state = init;
  res.parameters = parameters;
  res.points = points;

  std::vector<std::size_t> free_idx;
  std::vector<double> x0, lo, hi;
  for (std::size_t k = 0; k < parameters.size(); ++k) {
    const ParameterSpec& p = parameters[k];
    if (!is_fit_parameter(p.name)) throw std::invalid_argument("unknown fit parameter '" + p.name + "'");
    for (std::size_t j = 0; j < k; ++j)
      if (parameters[j].name == p.name) throw std::invalid_argument("fit parameter '" + p.name + "' listed twice");
    set_parameter(res.state, p.name, p.value);
    if (!p.free) continue;
    if (!(p.lower < p.upper) || p.value < p.lower || p.value > p.upper)
      throw std::invalid_argument("fit parameter '" + p.name + "' needs lower < upper and a start inside the bounds");
    free_idx.push_back(k);
    res.free_names.push_back(p.name);
    x0.push_back(p.value);
    lo.push_back(p.lower);
    hi.push_back(p.upper);
  }

  const ModelState base = res.state;
  auto state_at = [&](const std::vector<double>& x) {
    ModelState s = base;
    for (std::size_t i = 0; i < x.size(); ++i) set_parameter(s, parameters[free_idx[i]].name, x[i]);
    return s;
  };
  const Objective f = [&](const std::vector<double>& x) {
    try {
      return objective(state_at(x));
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  const std::size_t n = free_idx.size();
  res.dof = points > n ? points - n : 0;
  res.uncertainty.assign(parameters.size(), 0.0);
  if (n == 0) {
    res.chi2 = objective(res.state);
    res.evaluations = 1;
    res.converged = true;
    res.covariance.resize(0, 0);
    return res;
  }

  const MinimizeResult m = minimize(f, x0, lo, hi, options);
  res.state = state_at(m.x);
  for (std::size_t i = 0; i < n; ++i) res.parameters[free_idx[i]].value = m.x[i];
  res.chi2 = objective(res.state);
  res.evaluations = m.evaluations;
  res.converged = m.converged && std::isfinite(res.chi2);
  res.history = m.history;

  res.covariance = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n), std::nan(""));
  for (std::size_t i = 0; i < n; ++i) res.uncertainty[free_idx[i]] = std::nan("");
  if (!options.covariance || !std::isfinite(res.chi2)) return res;

  // Central differences of chi2 around a center nudged off the bounds.
  std::vector<double> h(n), c = m.x;
  for (std::size_t i = 0; i < n; ++i) {
    h[i] = 1e-4 * (hi[i] - lo[i]);
    c[i] = std::clamp(c[i], lo[i] + h[i], hi[i] - h[i]);
  }
  auto at = [&](std::size_t i, int si, std::size_t j, int sj) {
    std::vector<double> x = c;
    x[i] += si * h[i];
    x[j] += sj * h[j];
    return f(x);
  };
  Eigen::VectorXd range(n);
  for (std::size_t i = 0; i < n; ++i) range(static_cast<Eigen::Index>(i)) = hi[i] - lo[i];

  if (!stacked.replicas.empty()) {
    const auto rows = static_cast<Eigen::Index>(stacked.sigma.size());
    const auto b = static_cast<Eigen::Index>(stacked.replicas.size());
    Eigen::MatrixXd jac(rows, static_cast<Eigen::Index>(n));  // weighted, per unit of bound range
    try {
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> xp = c, xm = c;
        xp[i] += h[i];
        xm[i] -= h[i];
        const auto mp = stacked.model(state_at(xp)), mm = stacked.model(state_at(xm));
        for (Eigen::Index k = 0; k < rows; ++k)
          jac(k, static_cast<Eigen::Index>(i)) = (mp[k] - mm[k]) / (2.0 * h[i]) * range(static_cast<Eigen::Index>(i)) / stacked.sigma[k];
      }
    } catch (const std::exception&) {
      return res;
    }
    Eigen::MatrixXd dev(rows, b);
    for (Eigen::Index k = 0; k < rows; ++k) {
      double mean = 0.0;
      for (const auto& r : stacked.replicas) mean += r[k];
      mean /= static_cast<double>(b);
      for (Eigen::Index r = 0; r < b; ++r) dev(k, r) = (stacked.replicas[r][k] - mean) / stacked.sigma[k];
    }
    const auto qr = jac.colPivHouseholderQr();
    if (!jac.allFinite() || qr.rank() < static_cast<Eigen::Index>(n)) return res;
    const Eigen::MatrixXd shifts = range.asDiagonal() * qr.solve(dev);
    res.covariance = (static_cast<double>(b) - 1.0) / static_cast<double>(b) * shifts * shifts.transpose();
    res.jackknife = true;
    for (std::size_t i = 0; i < n; ++i) res.uncertainty[free_idx[i]] = std::sqrt(res.covariance(i, i));
    return res;
  }

  const double f0 = f(c);
  Eigen::MatrixXd hess(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> xp = c, xm = c;
    xp[i] += h[i];
    xm[i] -= h[i];
    hess(i, i) = (f(xp) - 2.0 * f0 + f(xm)) / (h[i] * h[i]);
    for (std::size_t j = 0; j < i; ++j) {
      const double v = (at(i, 1, j, 1) - at(i, 1, j, -1) - at(i, -1, j, 1) + at(i, -1, j, -1)) / (4.0 * h[i] * h[j]);
      hess(i, j) = hess(j, i) = v;
    }
  }
  if (!hess.allFinite()) return res;
  // Decompose in bound-range units; raw entries span many decades (rad/s against
  // dimensionless) and would drown the small eigenvalues in rounding.
  const Eigen::MatrixXd scaled = range.asDiagonal() * hess * range.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(scaled);
  if (es.eigenvalues().minCoeff() <= 0.0) return res;
  // chi2 ~ chi2_min + d^T H d / 2, so the covariance is 2 H^-1.
  const Eigen::MatrixXd inv = range.asDiagonal() *
                              (es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose()) *
                              range.asDiagonal();
  res.covariance = inv + inv.transpose();
  for (std::size_t i = 0; i < n; ++i) res.uncertainty[free_idx[i]] = std::sqrt(res.covariance(i, i));
  return res;
}

}  // namespace

FitResult fit_spectrum(const DataSet& data, const ModelState& init, const std::vector<ParameterSpec>& parameters,
                       const FitOptions& options) {
  data.validate();
  if (data.kind != DataKind::Spectrum) throw std::invalid_argument("fit_spectrum needs spectrum data");
  for (const ParameterSpec& p : parameters)
    if (p.free && p.name == "delta866") throw std::invalid_argument("the 866 detuning is the spectrum axis, not a fit parameter");
  return run_fit([&](const ModelState& s) { return chi_square(data, spectrum_model(s, data)); }, data.size(), init,
                 parameters, options, stack({&data}, [&](const ModelState& s) { return spectrum_model(s, data); }));
}

FitResult fit_g2_joint(const DataSet& minus, const DataSet& plus, const ModelState& init,
                       const std::vector<ParameterSpec>& parameters, const FitOptions& options) {
  minus.validate();
  plus.validate();
  if (minus.kind != DataKind::G2Minus || plus.kind != DataKind::G2Plus)
    throw std::invalid_argument("fit_g2_joint needs a sigma- and a sigma+ data set");
  return run_fit(
      [&](const ModelState& s) {
        s.errors.validate();
        const ModeExpansion modes(s.params);
        return chi_square(minus, g2_from_modes(modes, s, minus)) + chi_square(plus, g2_from_modes(modes, s, plus));
      },
      minus.size() + plus.size(), init, parameters, options, stack({&minus, &plus}, [&](const ModelState& s) {
        const ModeExpansion modes(s.params);
        std::vector<double> v = g2_from_modes(modes, s, minus);
        const std::vector<double> p = g2_from_modes(modes, s, plus);
        v.insert(v.end(), p.begin(), p.end());
        return v;
      }));
}

}  // namespace ionpair
