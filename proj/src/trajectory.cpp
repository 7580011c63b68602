#include "ionpair/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include <unsupported/Eigen/MatrixFunctions>

namespace ionpair {

namespace {

Wavelength wavelength_of(const JumpOperator& j) {
  return j.lower_manifold == Manifold::S12 ? Wavelength::Blue397 : Wavelength::Red866;
}

}  // namespace

std::int64_t to_ps(double seconds) { return std::llround(seconds * 1e12); }

JumpSimulator::JumpSimulator(const Liouvillian& L) : jumps_(L.jumps()) {
  for (const JumpOperator& j : jumps_)
    if (!j.emits_photon)
      throw std::invalid_argument("quantum-jump simulation supports photon-emitting jumps only (no laser linewidths)");
  const Eigen::MatrixXcd h_eff = L.effective_hamiltonian();
  const cplx minus_i(0.0, -1.0);
  for (int k = 0; k < kLevels; ++k) {
    const double dt = std::ldexp(1e-12, k);
    const Eigen::MatrixXcd u = (minus_i * dt * h_eff).exp();
    step_[k] = u;
  }
}

std::optional<JumpSimulator::Jump> JumpSimulator::next_jump(Vector8& psi, Rng& rng, std::int64_t max_wait_ps) const {
  const double r = rng.uniform_open0();
  Vector8 phi = psi;
  std::int64_t t = 0;
  constexpr int top = kLevels - 1;
  const std::int64_t top_span = std::int64_t{1} << top;
  while (t + top_span <= max_wait_ps) {
    const Vector8 cand = step_[top] * phi;
    if (cand.squaredNorm() <= r) break;
    phi = cand;
    t += top_span;
  }
  for (int k = top - 1; k >= 0; --k) {
    const std::int64_t span = std::int64_t{1} << k;
    if (t + span > max_wait_ps) continue;
    const Vector8 cand = step_[k] * phi;
    if (cand.squaredNorm() > r) {
      phi = cand;
      t += span;
    }
  }
  // survival is still above r at t; the jump falls on the next lattice tick
  const std::int64_t t_jump = t + 1;
  if (t_jump > max_wait_ps) return std::nullopt;
  phi = step_[0] * phi;

  double total = 0.0;
  std::vector<double> w(jumps_.size());
  for (std::size_t j = 0; j < jumps_.size(); ++j) {
    w[j] = (jumps_[j].op * phi).squaredNorm();
    total += w[j];
  }
  if (!(total > 0.0)) throw std::logic_error("jump sampled from a state with zero emission rate");
  double pick = rng.uniform() * total;
  std::size_t chosen = jumps_.size() - 1;
  for (std::size_t j = 0; j < jumps_.size(); ++j) {
    if (pick < w[j]) {
      chosen = j;
      break;
    }
    pick -= w[j];
  }
  psi = jumps_[chosen].op * phi;
  psi /= psi.norm();
  return Jump{t_jump, chosen};
}

Vector8 JumpSimulator::evolve(const Vector8& psi, std::int64_t dt_ps) const {
  if (dt_ps < 0) throw std::invalid_argument("negative evolution time");
  Vector8 phi = psi;
  for (int k = 0; k < kLevels && dt_ps != 0; ++k) {
    if (dt_ps & (std::int64_t{1} << k)) {
      phi = step_[k] * phi;
      dt_ps &= ~(std::int64_t{1} << k);
    }
  }
  while (dt_ps > 0) {  // beyond the table
    phi = step_[kLevels - 1] * phi;
    dt_ps -= std::int64_t{1} << (kLevels - 1);
  }
  const double n = phi.norm();
  return n > 0 ? Vector8(phi / n) : phi;
}

EmissionRecord simulate_emissions(const ExperimentParams& params, double duration, std::uint64_t seed,
                                  const ModelOptions& options) {
  return simulate_emissions(params, duration, seed, level::S_m12, options);
}

EmissionRecord simulate_emissions(const ExperimentParams& params, double duration, std::uint64_t seed,
                                  int initial_level, const ModelOptions& options) {
  if (!(duration > 0)) throw std::invalid_argument("simulation duration must be > 0");
  if (initial_level < 0 || initial_level >= kNumLevels) throw std::out_of_range("initial level");
  const JumpSimulator sim(build_liouvillian(params, options));
  Rng rng(seed);
  EmissionRecord rec;
  rec.duration_ps = to_ps(duration);
  rec.seed = seed;
  rec.params_fingerprint = params.fingerprint();

  Vector8 psi = Vector8::Zero();
  psi(initial_level) = 1.0;
  std::int64_t now = 0;
  while (auto jump = sim.next_jump(psi, rng, rec.duration_ps - now)) {
    now += jump->t_ps;
    const JumpOperator& j = sim.jumps()[jump->channel];
    rec.events.push_back({now, j.polarization, wavelength_of(j)});
  }
  return rec;
}

EnsembleAverage ensemble_populations(const ExperimentParams& params, int initial_level, std::span<const double> grid,
                                     std::size_t trajectories, std::uint64_t seed, unsigned threads,
                                     const ModelOptions& options) {
  if (grid.empty() || grid.front() != 0.0) throw std::invalid_argument("ensemble grid must start at 0");
  std::vector<std::int64_t> ticks(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    ticks[k] = to_ps(grid[k]);
    if (k > 0 && ticks[k] <= ticks[k - 1]) throw std::invalid_argument("ensemble grid must be increasing on a 1 ps lattice");
  }
  const JumpSimulator sim(build_liouvillian(params, options));
  const Rng root(seed);
  const std::size_t n_grid = grid.size();

  // Fixed-size blocks summed in block order keep the floating-point result independent
  // of the thread count.
  constexpr std::size_t kBlock = 64;
  const std::size_t n_blocks = (trajectories + kBlock - 1) / kBlock;
  std::vector<std::vector<double>> block_sum(n_blocks), block_sq(n_blocks);

  auto run_block = [&](std::size_t b) {
    std::vector<double> sum(kNumLevels * n_grid, 0.0), sq(kNumLevels * n_grid, 0.0);
    for (std::size_t i = b * kBlock; i < std::min(trajectories, (b + 1) * kBlock); ++i) {
      Rng rng = root.split(i);
      Vector8 psi = Vector8::Zero();
      psi(initial_level) = 1.0;
      std::int64_t now = 0;
      std::size_t g = 0;
      while (g < n_grid) {
        Vector8 start = psi;
        const auto jump = sim.next_jump(psi, rng, ticks.back() - now);
        const std::int64_t until = jump ? now + jump->t_ps : ticks.back() + 1;
        for (; g < n_grid && ticks[g] < until; ++g) {
          const Vector8 s = sim.evolve(start, ticks[g] - now);
          for (int l = 0; l < kNumLevels; ++l) {
            const double p = std::norm(s(l));
            sum[l * n_grid + g] += p;
            sq[l * n_grid + g] += p * p;
          }
        }
        if (!jump) break;
        now = until;
      }
    }
    block_sum[b] = std::move(sum);
    block_sq[b] = std::move(sq);
  };

  unsigned n_threads = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, std::max<std::size_t>(n_blocks, 1)));
  if (n_threads <= 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) run_block(b);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t b = t; b < n_blocks; b += n_threads) run_block(b);
      });
    for (auto& th : pool) th.join();
  }

  EnsembleAverage out;
  out.tau.assign(grid.begin(), grid.end());
  out.mean.assign(kNumLevels, std::vector<double>(n_grid, 0.0));
  out.stderr_.assign(kNumLevels, std::vector<double>(n_grid, 0.0));
  const double n = static_cast<double>(trajectories);
  for (int l = 0; l < kNumLevels; ++l)
    for (std::size_t g = 0; g < n_grid; ++g) {
      double s = 0, q = 0;
      for (std::size_t b = 0; b < n_blocks; ++b) {
        s += block_sum[b][l * n_grid + g];
        q += block_sq[b][l * n_grid + g];
      }
      const double mean = s / n;
      const double var = std::max(0.0, q / n - mean * mean);
      out.mean[l][g] = mean;
      out.stderr_[l][g] = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;
    }
  return out;
}

void ChannelConfig::validate() const {
  for (double p : {efficiency, crosstalk})
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("detection probabilities must lie in [0, 1]");
  if (!(dark_rate >= 0.0)) throw std::invalid_argument("dark-count rate must be >= 0");
}

void DetectionConfig::validate() const {
  for (const ChannelConfig& c : channels) c.validate();
}

std::pair<ClickStream, ClickStream> detect(const EmissionRecord& emissions, const DetectionConfig& config,
                                           std::uint64_t seed) {
  config.validate();
  const Rng root(seed);
  Rng routing = root.split(0);
  std::array<Rng, 2> filter_rng{root.split(1), root.split(2)};
  std::array<Rng, 2> dark_rng{root.split(3), root.split(4)};

  const double eta1 = config.channels[0].efficiency, eta2 = config.channels[1].efficiency;
  const double norm = std::max(1.0, eta1 + eta2);
  std::array<ClickStream, 2> out;
  for (std::uint32_t c = 0; c < 2; ++c) {
    out[c].channel = c + 1;
    out[c].duration_ps = emissions.duration_ps;
    out[c].seed = seed;
    out[c].params_fingerprint = emissions.params_fingerprint;
    out[c].efficiency = config.channels[c].efficiency;
  }

  for (const PhotonEvent& e : emissions.events) {
    const double u = routing.uniform();
    int c = -1;
    if (u < eta1 / norm) c = 0;
    else if (u < (eta1 + eta2) / norm) c = 1;
    if (c < 0) continue;
    const ChannelConfig& ch = config.channels[c];
    if (ch.wavelength && e.wl != *ch.wavelength) continue;
    if (ch.accept) {
      const double pass = e.pol == *ch.accept ? 1.0 - ch.crosstalk : ch.crosstalk;
      if (!filter_rng[c].bernoulli(pass)) continue;
    }
    out[c].events.push_back(e);
  }

  for (int c = 0; c < 2; ++c) {
    const ChannelConfig& ch = config.channels[c];
    if (ch.dark_rate <= 0) continue;
    const Polarization tag = ch.accept.value_or(Polarization::Pi);
    const Wavelength wl = ch.wavelength.value_or(Wavelength::Blue397);
    std::vector<PhotonEvent> dark;
    double t = 0.0;
    const double horizon = static_cast<double>(emissions.duration_ps) * 1e-12;
    while (true) {
      t += dark_rng[c].exponential(ch.dark_rate);
      if (t > horizon) break;
      dark.push_back({std::min(to_ps(t), emissions.duration_ps), tag, wl});
    }
    std::vector<PhotonEvent> merged;
    merged.reserve(out[c].events.size() + dark.size());
    std::merge(out[c].events.begin(), out[c].events.end(), dark.begin(), dark.end(), std::back_inserter(merged),
               [](const PhotonEvent& a, const PhotonEvent& b) { return a.t_ps < b.t_ps; });
    out[c].events = std::move(merged);
  }
  for (auto& s : out) {
    auto last = std::unique(s.events.begin(), s.events.end(),
                            [](const PhotonEvent& a, const PhotonEvent& b) { return a.t_ps == b.t_ps; });
    s.events.erase(last, s.events.end());
  }
  return {std::move(out[0]), std::move(out[1])};
}

ClickStream as_stream(const EmissionRecord& emissions, std::uint32_t channel) {
  ClickStream s;
  s.channel = channel;
  s.events = emissions.events;
  s.duration_ps = emissions.duration_ps;
  s.seed = emissions.seed;
  s.params_fingerprint = emissions.params_fingerprint;
  return s;
}

}  // namespace ionpair
