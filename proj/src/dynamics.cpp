#include "ionpair/dynamics.hpp"

#include <cmath>
#include <optional>

#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

namespace ionpair {

DensityMatrix DensityMatrix::pure(int level) {
  if (level < 0 || level >= kNumLevels) throw std::out_of_range("level index");
  DensityMatrix d{Matrix8::Zero()};
  d.rho(level, level) = 1.0;
  return d;
}

double DensityMatrix::min_eigenvalue() const {
  const Matrix8 h = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix8> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

void DensityMatrix::validate(double tol_trace, double tol_herm, double tol_eig) const {
  if (!rho.allFinite()) throw std::invalid_argument("density matrix has non-finite entries");
  if (hermiticity_error() > tol_herm) throw std::invalid_argument("density matrix is not Hermitian");
  if (std::abs(trace() - 1.0) > tol_trace) throw std::invalid_argument("density matrix trace != 1");
  if (min_eigenvalue() < -tol_eig) throw std::invalid_argument("density matrix is not positive semidefinite");
}

namespace {

Eigen::VectorXcd solve_with_trace_row(const Eigen::MatrixXcd& l) {
  // Replace the first row of L v = 0 by the trace constraint, scaled to the size of L.
  const double scale = l.cwiseAbs().maxCoeff();
  Eigen::MatrixXcd a = l;
  a.row(0).setZero();
  for (int k = 0; k < kNumLevels; ++k) a(0, k + kNumLevels * k) = scale;
  Eigen::VectorXcd b = Eigen::VectorXcd::Zero(kLiouvilleDim);
  b(0) = scale;
  return a.partialPivLu().solve(b);
}

DensityMatrix finish(const Eigen::VectorXcd& v) {
  DensityMatrix d{unvectorize(v)};
  d.rho = 0.5 * (d.rho + d.rho.adjoint());
  d.rho /= d.rho.trace().real();
  return d;
}

}  // namespace

SteadyStateReport steady_state_report(const Liouvillian& L) {
  const Eigen::MatrixXcd& l = L.matrix();
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(l);
  const auto& s = svd.singularValues();  // descending
  const double ratio = s(kLiouvilleDim - 2) / s(0);
  if (ratio < kDegeneracyRatio)
    throw DegenerateSteadyState("degenerate steady state: Liouvillian null space has dimension > 1");

  DensityMatrix d = finish(solve_with_trace_row(l));
  const double residual = (l * vectorize(d.rho)).norm() / (l.norm() * d.rho.norm());
  return {d, residual, ratio};
}

DensityMatrix steady_state(const Liouvillian& L) { return steady_state_report(L).state; }

DensityMatrix steady_state_fast(const Liouvillian& L) { return finish(solve_with_trace_row(L.matrix())); }

std::vector<double> Trajectory::population(int level) const {
  std::vector<double> out;
  out.reserve(states.size());
  for (const DensityMatrix& d : states) out.push_back(d.population(level));
  return out;
}

namespace {

void check_grid(std::span<const double> grid) {
  if (grid.empty() || grid.front() != 0.0) throw std::invalid_argument("time grid must start at 0");
  for (std::size_t k = 1; k < grid.size(); ++k)
    if (!(grid[k] > grid[k - 1])) throw std::invalid_argument("time grid must be strictly increasing");
}

// Walks a grid with exp(L h), reusing the propagator while the spacing is unchanged.
// Spacings of a uniform grid built as k * h differ by rounding (~1e-12 relative), so
// they count as equal within 1e-9.
template <typename Visit>
void walk(const Liouvillian& L, const DensityMatrix& rho0, std::span<const double> grid, Visit&& visit) {
  check_grid(grid);
  Eigen::VectorXcd v = vectorize(rho0.rho);
  visit(std::size_t{0}, v);
  Eigen::MatrixXcd step;
  std::optional<double> step_h;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double h = grid[k] - grid[k - 1];
    if (!step_h || std::abs(h - *step_h) > 1e-9 * *step_h) {
      step = (L.matrix() * h).exp();
      step_h = h;
    }
    v = step * v;
    visit(k, v);
  }
}

}  // namespace

Trajectory propagate(const Liouvillian& L, const DensityMatrix& rho0, std::span<const double> grid) {
  Trajectory t;
  t.tau.assign(grid.begin(), grid.end());
  t.states.reserve(grid.size());
  walk(L, rho0, grid, [&](std::size_t k, const Eigen::VectorXcd& v) {
    t.states.push_back(k == 0 ? rho0 : DensityMatrix{unvectorize(v)});
  });
  return t;
}

std::vector<std::vector<double>> propagate_populations(const Liouvillian& L, const DensityMatrix& rho0,
                                                       std::span<const double> grid,
                                                       std::span<const int> levels) {
  std::vector<std::vector<double>> out(levels.size(), std::vector<double>(grid.size()));
  walk(L, rho0, grid, [&](std::size_t k, const Eigen::VectorXcd& v) {
    for (std::size_t i = 0; i < levels.size(); ++i) out[i][k] = v(levels[i] * (kNumLevels + 1)).real();
  });
  return out;
}

std::vector<double> uniform_grid(double t_max, double spacing) {
  if (!(spacing > 0) || !(t_max > 0)) throw std::invalid_argument("grid needs positive span and spacing");
  const auto n = static_cast<std::size_t>(std::floor(t_max / spacing + 1e-9));
  std::vector<double> g(n + 1);
  for (std::size_t k = 0; k <= n; ++k) g[k] = static_cast<double>(k) * spacing;
  return g;
}

std::vector<double> correlation_grid() { return uniform_grid(1e-6, 1e-9); }
std::vector<double> short_time_grid() { return uniform_grid(2e-9, 0.05e-9); }

}  // namespace ionpair
