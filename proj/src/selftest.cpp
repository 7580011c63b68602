#include <cmath>
#include <functional>
#include <ostream>
#include <sstream>

#include "ionpair/cli.hpp"
#include "ionpair/correlations.hpp"
#include "ionpair/correlator.hpp"
#include "ionpair/fitting.hpp"
#include "ionpair/trajectory.hpp"

namespace ionpair {

namespace {

struct Check {
  const char* name;
  std::function<std::string()> run;  // empty string on success, else the failure reason
};

std::string expect(bool ok, const std::string& what) { return ok ? "" : what; }

ClickStream random_stream(Rng& rng, std::size_t n, std::int64_t duration, std::uint32_t channel) {
  ClickStream s;
  s.channel = channel;
  s.duration_ps = duration;
  std::int64_t t = 0;
  for (std::size_t k = 0; k < n; ++k) {
    t += 1 + static_cast<std::int64_t>(rng.exponential(1.0) * static_cast<double>(duration) / static_cast<double>(n + 1));
    if (t > duration) break;
    s.events.push_back({t, static_cast<Polarization>(rng.next() % 3), Wavelength::Blue397});
  }
  return s;
}

std::vector<Check> checks() {
  return {
      {"clebsch-gordan sum rules",
       [] {
         const TransitionTable t = build_transition_table(LevelScheme::calcium40(), 1.0, 1.0);
         std::array<double, kNumLevels> s{}, d{};
         for (const Channel& c : t.channels)
           (c.lower_manifold == Manifold::S12 ? s : d)[c.upper] += c.amplitude * c.amplitude;
         for (int u : {level::P_m12, level::P_p12})
           if (std::abs(s[u] - 1.0) > 1e-12 || std::abs(d[u] - 1.0) > 1e-12) return std::string("branching sums != 1");
         return std::string();
       }},
      {"liouvillian preserves trace",
       [] {
         const double r = build_liouvillian(weak_excitation()).trace_residual();
         return expect(r < 1e-12, "trace residual " + std::to_string(r));
       }},
      {"steady state residual",
       [] {
         for (const ExperimentParams& p : {weak_excitation(), strong_excitation(), calibration_spectrum()}) {
           const SteadyStateReport r = steady_state_report(build_liouvillian(p));
           r.state.validate();
           if (!(r.residual < 1e-10)) return "residual " + std::to_string(r.residual);
         }
         return std::string();
       }},
      {"antibunching g2(0) = 0",
       [] {
         const CorrelationModel m(weak_excitation());
         const std::vector<double> grid = uniform_grid(10e-9, 1e-9);
         const auto set = m.conditioned_all(grid);
         for (const CorrelationCurve* c : {&set.mm, &set.mp, &set.pp, &set.pm})
           if (!(std::abs(c->values[0]) < 1e-10)) return std::string("nonzero g2(0)");
         return expect(std::abs(m.total(grid).values[0]) < 1e-10, "nonzero total g2(0)");
       }},
      {"propagation keeps unit trace",
       [] {
         const Trajectory t = propagate(build_liouvillian(strong_excitation()), DensityMatrix::pure(level::S_p12),
                                        uniform_grid(1e-6, 10e-9));
         double drift = 0.0;
         for (const DensityMatrix& d : t.states) drift = std::max(drift, std::abs(d.trace() - 1.0));
         return expect(drift < 1e-10, "trace drift " + std::to_string(drift));
       }},
      {"fast spectrum scan matches steady states",
       [] {
         const ExperimentParams p = calibration_spectrum();
         std::vector<double> d;
         for (int k = 0; k < 21; ++k) d.push_back(mhz(-40.0 + 4.0 * k + 0.37));
         const SpectrumCurve ref = excitation_spectrum(p, d);
         const std::vector<double> fast = excited_population_scan(p, d);
         for (std::size_t k = 0; k < d.size(); ++k)
           if (std::abs(fast[k] - ref.points[k].excited) > 1e-10) return std::string("scan differs");
         return std::string();
       }},
      {"eigenmode g2 matches propagation",
       [] {
         ModelState s;
         s.params = weak_excitation_calibrated();
         DataSet d;
         d.kind = DataKind::G2Minus;
         for (int k = 0; k <= 200; k += 5) d.x.push_back(k * 1e-9);
         d.y.assign(d.x.size(), 1.0);
         d.sigma.assign(d.x.size(), 1.0);
         const std::vector<double> fast = g2_model(s, d);
         const CorrelationCurve ref =
             CorrelationModel(s.params).conditioned(Polarization::SigmaMinus, Polarization::SigmaMinus, d.x);
         for (std::size_t k = 0; k < d.x.size(); ++k)
           if (std::abs(fast[k] - ref.values[k]) > 1e-8) return std::string("g2 differs");
         return std::string();
       }},
      {"correlator equals brute force",
       [] {
         Rng rng(99);
         const ClickStream a = random_stream(rng, 3000, 3'000'000'000, 1);
         const ClickStream b = random_stream(rng, 3000, 3'000'000'000, 2);
         CorrelogramConfig cfg;
         cfg.bin_width_ps = 777;
         cfg.window_ps = 777 * 40;
         const Correlogram c = correlate(a, b, cfg, 3);
         std::vector<std::uint64_t> ref(c.counts.size(), 0);
         for (const PhotonEvent& x : a.events)
           for (const PhotonEvent& y : b.events)
             if (auto k = delay_bin(y.t_ps - x.t_ps, cfg.bin_width_ps, cfg.half_bins())) ++ref[*k + cfg.half_bins()];
         return expect(ref == c.counts, "histograms differ");
       }},
      {"IONCLK1 round trip",
       [] {
         Rng rng(5);
         ClickStream s = random_stream(rng, 500, 1'000'000'000, 7);
         std::stringstream ss;
         write_ionclk(ss, s);
         const ClickStream back = read_ionclk(ss);
         return expect(back.events == s.events && back.channel == 7 && back.duration_ps == s.duration_ps,
                       "stream changed");
       }},
      {"simulation is reproducible",
       [] {
         const EmissionRecord a = simulate_emissions(weak_excitation(), 20e-6, 11);
         const EmissionRecord b = simulate_emissions(weak_excitation(), 20e-6, 11);
         return expect(a.events == b.events && !a.events.empty(), "streams differ");
       }},
  };
}

}  // namespace

bool run_selftest(std::ostream& out) {
  bool all = true;
  for (const Check& c : checks()) {
    std::string reason;
    try {
      reason = c.run();
    } catch (const std::exception& e) {
      reason = e.what();
    }
    out << (reason.empty() ? "ok   " : "FAIL ") << c.name;
    if (!reason.empty()) out << ": " << reason;
    out << "\n";
    all = all && reason.empty();
  }
  return all;
}

}  // namespace ionpair
