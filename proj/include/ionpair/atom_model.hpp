#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "ionpair/params.hpp"

namespace ionpair {

using cplx = std::complex<double>;
using Matrix8 = Eigen::Matrix<cplx, 8, 8>;
using Vector8 = Eigen::Matrix<cplx, 8, 1>;

inline constexpr int kNumLevels = 8;
inline constexpr int kLiouvilleDim = kNumLevels * kNumLevels;

enum class Manifold : std::uint8_t { S12, P12, D32 };

// Zero-based indices of the eight sublevels |1>..|8>.
namespace level {
inline constexpr int S_m12 = 0;   // |1> S1/2 m=-1/2
inline constexpr int S_p12 = 1;   // |2> S1/2 m=+1/2
inline constexpr int P_m12 = 2;   // |3> P1/2 m=-1/2
inline constexpr int P_p12 = 3;   // |4> P1/2 m=+1/2
inline constexpr int D_m32 = 4;   // |5>..|8> D3/2 m=-3/2..+3/2
}  // namespace level

struct Level {
  Manifold manifold;
  double j;
  double m;
  double lande;
};

struct LevelScheme {
  std::array<Level, kNumLevels> levels;

  static LevelScheme calcium40();
};

/// Zeeman shift g_j m_j mu_B B of every level in rad/s. B is the signed field
/// component along the quantization axis.
std::array<double, kNumLevels> zeeman_shifts(const LevelScheme& scheme, double field_gauss);

/// Photon polarization label of a transition, q = m_upper - m_lower.
enum class Polarization : std::uint8_t { SigmaMinus = 0, Pi = 1, SigmaPlus = 2 };

Polarization polarization_from_q(int q);
const char* to_string(Polarization p);

/// Clebsch-Gordan coefficient <j1 m1; j2 m2 | J M> (Condon-Shortley phase), Racah formula.
double clebsch_gordan(double j1, double m1, double j2, double m2, double J, double M);

struct ChannelAmplitude {
  double m_upper;
  double m_lower;
  int q;
  double amplitude;
};

/// Dipole decay amplitudes <J_l m_l; 1 q | J_u m_u> for every sublevel pair.
/// Supported pairs: (1/2, 1/2) and (1/2, 3/2); anything else throws.
std::vector<ChannelAmplitude> transition_amplitudes(double j_upper, double j_lower);

struct Channel {
  int upper;
  int lower;
  int q;
  double amplitude;
  Manifold lower_manifold;

  Polarization polarization() const { return polarization_from_q(q); }
};

struct TransitionTable {
  std::vector<Channel> channels;  // S-P channels first, then D-P
  double gamma_sp;
  double gamma_dp;

  double rate(const Channel& c) const {
    const double g = c.lower_manifold == Manifold::S12 ? gamma_sp : gamma_dp;
    return g * c.amplitude * c.amplitude;
  }
};

TransitionTable build_transition_table(const LevelScheme& scheme, double gamma_sp, double gamma_dp);

/// Spherical components of a linear polarization at angle alpha to B, for a beam
/// propagating perpendicular to B.
struct PolarizationComponents {
  cplx pi;
  cplx sigma_plus;
  cplx sigma_minus;

  cplx component(int q) const { return q == 0 ? pi : (q > 0 ? sigma_plus : sigma_minus); }
};

PolarizationComponents polarization_components(double alpha);

/// How spontaneous decay is split into Lindblad operators.
enum class DecayGrouping {
  // One operator per photon polarization q and manifold: sum_u,l c |l><u|. Carries the
  // coherence transfer between upper sublevels that share a decay polarization.
  PerPolarization,
  // One operator per individual sublevel channel |l><u|.
  PerChannel,
};

struct ModelOptions {
  DecayGrouping decay = DecayGrouping::PerPolarization;
};

/// A collapse operator together with the photon it emits.
struct JumpOperator {
  Matrix8 op;  // includes sqrt(rate)
  Polarization polarization;
  Manifold lower_manifold;  // S12 -> 397 nm photon, D32 -> 866 nm photon, P12 for dephasing
  bool emits_photon;
};

/// Master-equation generator on column-major vectorized 8x8 density matrices,
/// vec index = row + 8 * col.
class Liouvillian {
 public:
  Liouvillian(Matrix8 hamiltonian, std::vector<JumpOperator> jumps);

  const Eigen::MatrixXcd& matrix() const { return generator_; }
  const Matrix8& hamiltonian() const { return hamiltonian_; }
  const std::vector<JumpOperator>& jumps() const { return jumps_; }
  /// H - i/2 sum L^dag L
  Matrix8 effective_hamiltonian() const;

  Eigen::VectorXcd apply(const Eigen::VectorXcd& vec_rho) const { return generator_ * vec_rho; }
  Matrix8 apply(const Matrix8& rho) const;

  /// |t^T L| / |L| where t is the trace functional.
  double trace_residual() const;

 private:
  Matrix8 hamiltonian_;
  std::vector<JumpOperator> jumps_;
  Eigen::MatrixXcd generator_;
};

/// Hamiltonian in the frame rotating with both lasers (RWA), hbar = 1.
Matrix8 build_hamiltonian(const ExperimentParams& params, const LevelScheme& scheme,
                          const TransitionTable& table);

Liouvillian build_liouvillian(const ExperimentParams& params, const ModelOptions& options = {});

Eigen::VectorXcd vectorize(const Matrix8& rho);
Matrix8 unvectorize(const Eigen::VectorXcd& v);

}  // namespace ionpair
