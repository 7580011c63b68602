#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "ionpair/clickstream.hpp"
#include "ionpair/rng.hpp"

namespace ionpair {

/// Quantum-jump unraveling of the master equation with photon-counting jumps.
///
/// Waiting times are sampled exactly on a 1 ps lattice: the no-jump propagator
/// exp(-i H_eff t) is tabulated for t = 2^k ps and the first lattice time at which the
/// survival probability drops below a uniform draw is found by binary descent. The
/// emitting channel is then chosen with probability |L_j psi|^2.
class JumpSimulator {
 public:
  /// Throws std::invalid_argument if L carries non-photon (dephasing) jump operators.
  explicit JumpSimulator(const Liouvillian& L);

  struct Jump {
    std::int64_t t_ps;  // time of the jump, measured from the start of the waiting period
    std::size_t channel;
  };

  /// Next jump from the normalized state psi, or nothing within max_wait_ps.
  /// On a jump psi is replaced by the normalized post-jump state.
  std::optional<Jump> next_jump(Vector8& psi, Rng& rng, std::int64_t max_wait_ps) const;

  /// Normalized no-jump evolution of psi over dt_ps.
  Vector8 evolve(const Vector8& psi, std::int64_t dt_ps) const;

  const std::vector<JumpOperator>& jumps() const { return jumps_; }

 private:
  static constexpr int kLevels = 41;  // 2^40 ps ~ 1.1 s
  std::array<Matrix8, kLevels> step_;  // exp(-i H_eff 2^k ps)
  std::vector<JumpOperator> jumps_;
};

struct EmissionRecord {
  std::vector<PhotonEvent> events;  // every emitted photon, time ordered
  std::int64_t duration_ps = 0;
  std::uint64_t seed = 0;
  std::string params_fingerprint;
};

std::int64_t to_ps(double seconds);

/// One long trajectory starting in |1>.
EmissionRecord simulate_emissions(const ExperimentParams& params, double duration, std::uint64_t seed,
                                  const ModelOptions& options = {});
/// Same, from a chosen basis state.
EmissionRecord simulate_emissions(const ExperimentParams& params, double duration, std::uint64_t seed,
                                  int initial_level, const ModelOptions& options = {});

struct EnsembleAverage {
  std::vector<double> tau;
  // [level][grid point]
  std::vector<std::vector<double>> mean;
  std::vector<std::vector<double>> stderr_;
};

/// Populations averaged over independent trajectories. Trajectory i uses
/// rng.split(i), so the result does not depend on the number of threads.
EnsembleAverage ensemble_populations(const ExperimentParams& params, int initial_level, std::span<const double> grid,
                                     std::size_t trajectories, std::uint64_t seed, unsigned threads = 0,
                                     const ModelOptions& options = {});

struct ChannelConfig {
  double efficiency = 1.0;               // probability an emitted photon is routed to this detector
  std::optional<Polarization> accept;    // nullopt: no polarization filter
  double crosstalk = 0.0;                // pass probability of a non-accepted polarization
  std::optional<Wavelength> wavelength = Wavelength::Blue397;  // nullopt: no color filter
  double dark_rate = 0.0;                // counts per second

  void validate() const;
};

struct DetectionConfig {
  std::array<ChannelConfig, 2> channels;

  void validate() const;
};

/// Splits the photons between two detectors and thins them. A photon is routed to
/// detector k with probability eta_k / max(1, eta_1 + eta_2), so two unit-efficiency
/// channels act as a lossless beam splitter. The accepted polarization passes with
/// probability 1 - crosstalk, any other with probability crosstalk. Dark counts are an
/// independent Poisson process tagged with the channel's accepted polarization (pi if
/// unfiltered). Coincident timestamps on one channel keep the first click only.
std::pair<ClickStream, ClickStream> detect(const EmissionRecord& emissions, const DetectionConfig& config,
                                           std::uint64_t seed);

/// Converts an emission record to a stream without detector effects.
ClickStream as_stream(const EmissionRecord& emissions, std::uint32_t channel = 0);

}  // namespace ionpair
