#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ionpair/correlations.hpp"

using namespace ionpair;

TEST_CASE("conditioned curves vanish at zero delay and relax to one") {
  const CorrelationModel m(weak_excitation());
  const auto grid = uniform_grid(200e-6, 1e-6);  // the D-pumping tail takes tens of us
  const auto set = m.conditioned_all(grid);
  for (const CorrelationCurve* c : {&set.mm, &set.mp, &set.pp, &set.pm}) {
    CHECK(std::abs(c->values.front()) < 1e-10);
    CHECK(c->values.back() == doctest::Approx(1.0).epsilon(1e-4));
  }
  const CorrelationCurve total = m.total(grid);
  CHECK(std::abs(total.values.front()) < 1e-10);
  CHECK(total.values.back() == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("conditioned and total curves agree with the single-curve API") {
  const auto grid = uniform_grid(100e-9, 1e-9);
  const CorrelationModel m(strong_excitation());
  const auto set = m.conditioned_all(grid);
  const CorrelationCurve mm = g2_conditioned(strong_excitation(), Polarization::SigmaMinus, Polarization::SigmaMinus, grid);
  const CorrelationCurve pm = m.conditioned(Polarization::SigmaPlus, Polarization::SigmaMinus, grid);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    CHECK(mm.values[k] == doctest::Approx(set.mm.values[k]).epsilon(1e-12));
    CHECK(pm.values[k] == doctest::Approx(set.pm.values[k]).epsilon(1e-12));
  }
  CHECK(set.mm.kind == CurveKind::MinusMinus);
  CHECK(set.pm.kind == CurveKind::PlusMinus);
  CHECK(std::string(to_string(CurveKind::PlusPlus)) == "sigma+|sigma+");
  CHECK(g2_total(strong_excitation(), grid).kind == CurveKind::Total);
  CHECK_THROWS_AS(m.conditioned(Polarization::Pi, Polarization::SigmaMinus, grid), std::invalid_argument);
}

TEST_CASE("mirror symmetry: reversing B exchanges sigma+ and sigma-") {
  ExperimentParams p = weak_excitation_calibrated();
  ExperimentParams q = p;
  q.field_gauss = -p.field_gauss;
  const auto grid = uniform_grid(200e-9, 1e-9);
  const auto a = CorrelationModel(p).conditioned_all(grid);
  const auto b = CorrelationModel(q).conditioned_all(grid);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    CHECK(a.mm.values[k] == doctest::Approx(b.pp.values[k]).epsilon(1e-8));
    CHECK(a.mp.values[k] == doctest::Approx(b.pm.values[k]).epsilon(1e-8));
  }
}

TEST_CASE("weak-excitation curve shape") {
  const auto set = CorrelationModel(weak_excitation()).conditioned_all(correlation_grid());
  CHECK(set.mm.peak_value() == doctest::Approx(15.6).epsilon(0.15));
  CHECK(set.mm.peak_tau() == doctest::Approx(29e-9).epsilon(0.15));
  // sigma- -> sigma+ stays on a near-zero plateau for the first few ns
  for (std::size_t k = 0; k <= 5; ++k) CHECK(set.mp.values[k] < 0.05);
}

TEST_CASE("short-time power laws") {
  const auto set = CorrelationModel(weak_excitation()).conditioned_all(short_time_grid());
  const auto [a, b] = short_time_exponents(set.mm, set.mp);
  CHECK(a == doctest::Approx(2.0).epsilon(0.05));
  // Pure sigma light: reaching P+1/2 from S+1/2 needs a spontaneous decay between two
  // coherent steps, so the opposite-polarization curve starts as tau^5.
  CHECK(b == doctest::Approx(5.0).epsilon(0.02));
  ExperimentParams tilted = weak_excitation();
  tilted.alpha397 = 0.45 * std::numbers::pi;  // a pi component couples S+1/2 to P+1/2 directly
  const auto tl = CorrelationModel(tilted).conditioned_all(short_time_grid());
  CHECK(short_time_exponents(tl.mm, tl.mp).second == doctest::Approx(2.0).epsilon(0.03));
  CHECK_THROWS_AS(short_time_exponents(set.mm, set.mp, 0.0, 1e-9), std::domain_error);
  const std::vector<double> t = {1, 2, 4}, v = {3, 12, 48};
  CHECK(log_log_slope(t, v, 1, 4) == doctest::Approx(2.0));
}

TEST_CASE("purity: ratio of integrals") {
  CorrelationCurve m{{0, 1, 2, 3}, {0, 2, 2, 2}, CurveKind::MinusMinus};
  CorrelationCurve p{{0, 1, 2, 3}, {0, 1, 1, 1}, CurveKind::MinusPlus};
  // trapezoids: (1 + 2 + 2) / (0.5 + 1 + 1)
  CHECK(purity(m, p, 3) == doctest::Approx(2.0));
  CHECK(purity(m, p, 1) == doctest::Approx(2.0));
  const auto curve = purity_curve(m, p);
  CHECK(std::isnan(curve[0]));
  CHECK(curve[3] == doctest::Approx(2.0));
  CHECK_THROWS_AS(purity(m, p, 1.5), std::invalid_argument);
  CorrelationCurve z{{0, 1}, {0, 0}};
  CHECK_THROWS_AS(purity(m, z, 1), std::invalid_argument);  // grids differ in length
  CorrelationCurve m2{{0, 1}, {0, 1}}, z2{{0, 1}, {0, 0}};
  CHECK_THROWS_AS(purity(m2, z2, 1), std::domain_error);
  CorrelationCurve shifted{{1, 2}, {0, 1}}, shifted2{{1, 2}, {0, 1}};
  CHECK_THROWS_AS(purity(shifted, shifted2, 2), std::invalid_argument);
}

TEST_CASE("pair probability") {
  CHECK(pair_probability(10.0) == doctest::Approx(10.0 / 11.0));
  CHECK(pair_probability(0.0) == 0.0);
  CHECK_THROWS(pair_probability(-1.0));
}

TEST_CASE("error model: identity and full mixing") {
  const auto grid = uniform_grid(300e-9, 1e-9);
  const auto set = CorrelationModel(weak_excitation_calibrated()).conditioned_all(grid);
  const auto [m0, p0] = apply_error_model(set, {});
  for (std::size_t k = 0; k < grid.size(); ++k) {
    CHECK(m0.values[k] == set.mm.values[k]);
    CHECK(p0.values[k] == set.mp.values[k]);
  }
  // Every first photon wrong: the curves become those conditioned on sigma+.
  const auto [m1, p1] = apply_error_model(set, {1.0, 0.0, 0.0});
  for (std::size_t k = 0; k < grid.size(); ++k) {
    CHECK(m1.values[k] == doctest::Approx(set.pm.values[k]));
    CHECK(p1.values[k] == doctest::Approx(set.pp.values[k]));
  }
  // Both detection channels fully crossed: the two curves swap.
  const auto [m2, p2] = apply_error_model(set, {0.0, 1.0, 1.0});
  for (std::size_t k = 0; k < grid.size(); ++k) {
    CHECK(m2.values[k] == doctest::Approx(set.mp.values[k]));
    CHECK(p2.values[k] == doctest::Approx(set.mm.values[k]));
  }
  // Hand-mixed value at one delay.
  const ErrorModel em{0.025, 0.05, 0.018};
  const auto [m3, p3] = apply_error_model(set, em);
  const std::size_t k = 24;
  const double cm = 0.975 * set.mm.values[k] + 0.025 * set.pm.values[k];
  const double cp = 0.975 * set.mp.values[k] + 0.025 * set.pp.values[k];
  CHECK(m3.values[k] == doctest::Approx(0.95 * cm + 0.05 * cp));
  CHECK(p3.values[k] == doctest::Approx(0.982 * cp + 0.018 * cm));
  CHECK_THROWS_AS(apply_error_model(set, {1.5, 0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(apply_error_model(set, {0, -0.1, 0}), std::invalid_argument);
}

TEST_CASE("background floor") {
  CorrelationCurve c{{0, 1}, {0, 1}};
  const CorrelationCurve b = with_background(c, 0.1);
  CHECK(b.values[0] == doctest::Approx(0.1));
  CHECK_THROWS_AS(with_background(c, -0.1), std::invalid_argument);
}

TEST_CASE("excitation spectrum and Raman resonances") {
  const ExperimentParams p = calibration_spectrum();
  const SpectrumCurve s = excitation_spectrum(p, default_spectrum_detunings(), 2.0, 5.0);
  CHECK(s.points.size() == 400);
  for (std::size_t k = 0; k < s.points.size(); ++k) {
    CHECK(!s.points[k].flagged);
    CHECK(s.points[k].excited > 0.0);
    CHECK(s.value(k) == doctest::Approx(2.0 * s.points[k].excited + 5.0));
  }
  // Dark resonances sit at two-photon conditions.
  const auto raman = raman_resonances(p);
  CHECK(raman.size() == 8);
  for (std::size_t k : s.local_minima()) {
    double nearest = 1e300;
    for (double r : raman) nearest = std::min(nearest, std::abs(s.points[k].detuning866 - r));
    CHECK(nearest < p.gamma_sp);
  }
  CHECK_THROWS_AS(excitation_spectrum(p, default_spectrum_detunings(), 1.0, -1.0), std::invalid_argument);
}

TEST_CASE("Raman resonance positions by hand") {
  ExperimentParams p = weak_excitation();
  p.field_gauss = 0.0;
  const auto r0 = raman_resonances(p);
  REQUIRE(r0.size() == 1);
  CHECK(r0[0] == doctest::Approx(p.detuning397));
  // alpha = pi/2 on both lasers: only Delta m = +-1 couplings, S and D sublevels linked
  // through a common P sublevel; shift = B muB (gS mS - gD mD).
  p.field_gauss = 3.5;
  const auto r = raman_resonances(p);
  const double u = mhz(kBohrMhzPerGauss) * 3.5;
  // S-1/2 (via P+1/2) with D+3/2, D-1/2 (sigma couplings)
  CHECK(std::find_if(r.begin(), r.end(), [&](double x) {
          return std::abs(x - (p.detuning397 - u - 0.8 * 1.5 * u)) < 1.0;
        }) != r.end());
}

TEST_CASE("spectrum flags degenerate points instead of failing") {
  ExperimentParams p = calibration_spectrum();
  p.rabi866 = 0.0;
  const std::vector<double> d = {0.0, mhz(5.0)};
  const SpectrumCurve s = excitation_spectrum(p, d);
  for (const SpectrumPoint& pt : s.points) CHECK(pt.flagged);
}

TEST_CASE("mean photon number") {
  const ExperimentParams p = strong_excitation();
  const double steady = mean_photon_number(p, Polarization::SigmaMinus, 24e-9, PhotonCountMode::Steady);
  const CorrelationModel m(p);
  CHECK(steady == doctest::Approx(p.gamma_sp * 2.0 / 3.0 * m.steady().population(level::P_m12) * 24e-9));
  CHECK(mean_photon_number(p, Polarization::SigmaMinus, 0.0) == 0.0);
  const double c12 = mean_photon_number(p, Polarization::SigmaMinus, 12e-9);
  const double c24 = mean_photon_number(p, Polarization::SigmaMinus, 24e-9);
  CHECK(c24 > c12);
  CHECK_THROWS_AS(mean_photon_number(p, Polarization::Pi, 24e-9), std::invalid_argument);
  CHECK_THROWS_AS(mean_photon_number(p, Polarization::SigmaMinus, -1e-9), std::invalid_argument);
}
