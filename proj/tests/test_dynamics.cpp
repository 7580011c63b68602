#include <doctest.h>

#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

#include "ionpair/dynamics.hpp"

using namespace ionpair;

namespace {

ExperimentParams dark() {
  ExperimentParams p = weak_excitation();
  p.rabi397 = 0.0;
  p.rabi866 = 0.0;
  return p;
}

}  // namespace

TEST_CASE("steady state is a valid density matrix with tiny residual") {
  for (const ExperimentParams& p : {weak_excitation(), strong_excitation(), calibration_spectrum(),
                                    weak_excitation_calibrated()}) {
    const SteadyStateReport r = steady_state_report(build_liouvillian(p));
    CHECK(r.residual < 1e-10);
    CHECK(r.singular_ratio > kDegeneracyRatio);
    CHECK_NOTHROW(r.state.validate());
    CHECK(r.state.trace() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("steady state equals long-time propagation") {
  const Liouvillian L = build_liouvillian(weak_excitation());
  const DensityMatrix ss = steady_state(L);
  // 200 us is thousands of optical-pumping times
  const Eigen::MatrixXcd far = (L.matrix() * 200e-6).exp();
  const DensityMatrix late{unvectorize(far * vectorize(DensityMatrix::pure(level::S_m12).rho))};
  CHECK((late.rho - ss.rho).norm() < 1e-8);
  CHECK(steady_state_fast(L).rho.isApprox(ss.rho, 1e-10));
}

TEST_CASE("no driving gives a degenerate steady state") {
  CHECK_THROWS_AS(steady_state(build_liouvillian(dark())), DegenerateSteadyState);
  ExperimentParams p = weak_excitation();
  p.rabi866 = 0.0;  // everything pumps into D3/2, which is then a dark multiplet
  CHECK_THROWS_AS(steady_state(build_liouvillian(p)), DegenerateSteadyState);
}

TEST_CASE("spontaneous decay of a P sublevel is exponential") {
  const ExperimentParams p = dark();
  const Liouvillian L = build_liouvillian(p);
  const auto grid = uniform_grid(100e-9, 0.5e-9);
  const Trajectory t = propagate(L, DensityMatrix::pure(level::P_m12), grid);
  const double gamma = p.gamma_sp + p.gamma_dp;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    CHECK(t.states[k].population(level::P_m12) == doctest::Approx(std::exp(-gamma * grid[k])).epsilon(1e-9));
    // D3/2 receives the Gamma_DP share
    double d = 0.0;
    for (int l = level::D_m32; l < kNumLevels; ++l) d += t.states[k].population(l);
    CHECK(d == doctest::Approx(p.gamma_dp / gamma * (1 - std::exp(-gamma * grid[k]))).epsilon(1e-9));
  }
}

TEST_CASE("resonant two-level atom matches the closed-form Rabi solution") {
  // S-1/2 <-> P-1/2 only, resonant drive, decay back to S-1/2.
  const double gamma = mhz(20.0), omega = mhz(30.0);
  Matrix8 h = Matrix8::Zero();
  h(level::P_m12, level::S_m12) = h(level::S_m12, level::P_m12) = omega / 2;
  Matrix8 op = Matrix8::Zero();
  op(level::S_m12, level::P_m12) = std::sqrt(gamma);
  const Liouvillian L(h, {{op, Polarization::Pi, Manifold::S12, true}});

  const auto grid = uniform_grid(200e-9, 0.25e-9);
  const int lv[] = {level::P_m12};
  const auto pe = propagate_populations(L, DensityMatrix::pure(level::S_m12), grid, lv)[0];
  const double ss = omega * omega / 4 / (gamma * gamma / 4 + omega * omega / 2);
  const double mu = std::sqrt(omega * omega - gamma * gamma / 16);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double t = grid[k];
    const double exact = ss * (1 - std::exp(-0.75 * gamma * t) * (std::cos(mu * t) + 0.75 * gamma / mu * std::sin(mu * t)));
    CHECK(pe[k] == doctest::Approx(exact).epsilon(1e-9).scale(1e-3));
  }
}

TEST_CASE("propagation obeys the semigroup law and keeps the trace") {
  const Liouvillian L = build_liouvillian(strong_excitation());
  const DensityMatrix r0 = DensityMatrix::pure(level::S_p12);
  const std::vector<double> g1 = {0.0, 37e-9};
  const std::vector<double> g2 = {0.0, 12e-9, 37e-9};  // unequal steps
  const Trajectory a = propagate(L, r0, g1);
  const Trajectory b = propagate(L, r0, g2);
  CHECK((a.states.back().rho - b.states.back().rho).norm() < 1e-11);
  const Trajectory c = propagate(L, b.states[1], std::vector<double>{0.0, 25e-9});
  CHECK((c.states.back().rho - a.states.back().rho).norm() < 1e-11);

  const Trajectory long_run = propagate(L, r0, uniform_grid(1e-6, 1e-9));
  for (const DensityMatrix& d : long_run.states) {
    CHECK(std::abs(d.trace() - 1.0) < 1e-10);
    CHECK(d.hermiticity_error() < 1e-10);
    CHECK(d.min_eigenvalue() > -1e-10);
  }
}

TEST_CASE("propagate_populations agrees with propagate") {
  const Liouvillian L = build_liouvillian(weak_excitation());
  const auto grid = uniform_grid(50e-9, 1e-9);
  const Trajectory t = propagate(L, DensityMatrix::pure(level::S_p12), grid);
  const int lv[] = {level::P_m12, level::D_m32};
  const auto pops = propagate_populations(L, DensityMatrix::pure(level::S_p12), grid, lv);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    CHECK(pops[0][k] == doctest::Approx(t.states[k].population(level::P_m12)).epsilon(1e-12));
    CHECK(pops[1][k] == doctest::Approx(t.states[k].population(level::D_m32)).epsilon(1e-12));
  }
  CHECK(t.population(level::P_m12).size() == grid.size());
}

TEST_CASE("time grids") {
  const auto g = uniform_grid(1e-6, 1e-9);
  CHECK(g.size() == 1001);
  CHECK(g.back() == doctest::Approx(1e-6));
  CHECK(correlation_grid().size() == 1001);
  CHECK(short_time_grid().size() == 41);
  CHECK_THROWS_AS(uniform_grid(0.0, 1e-9), std::invalid_argument);
  CHECK_THROWS_AS(uniform_grid(1e-6, -1e-9), std::invalid_argument);

  const Liouvillian L = build_liouvillian(weak_excitation());
  const DensityMatrix r0 = DensityMatrix::pure(0);
  CHECK_THROWS_AS(propagate(L, r0, std::vector<double>{1e-9, 2e-9}), std::invalid_argument);
  CHECK_THROWS_AS(propagate(L, r0, std::vector<double>{0.0, 2e-9, 2e-9}), std::invalid_argument);
  CHECK_THROWS_AS(propagate(L, r0, std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("density matrix validation") {
  CHECK_NOTHROW(DensityMatrix::pure(3).validate());
  CHECK_THROWS_AS(DensityMatrix::pure(8), std::out_of_range);
  DensityMatrix d = DensityMatrix::pure(0);
  d.rho(0, 0) = 0.9;
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);  // trace
  d = DensityMatrix::pure(0);
  d.rho(0, 1) = 0.3;
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);  // not Hermitian
  d.rho(1, 0) = 0.3;
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);  // negative eigenvalue
  d = DensityMatrix::pure(0);
  d.rho(2, 2) = std::nan("");
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
}
