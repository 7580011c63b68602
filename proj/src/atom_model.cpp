#include "ionpair/atom_model.hpp"

#include <cmath>
#include <stdexcept>

namespace ionpair {

namespace {

// Angular momenta are handled as doubled integers so that half-integers are exact.
int twice(double x) {
  const double t = 2.0 * x;
  const double r = std::round(t);
  if (std::abs(t - r) > 1e-9) throw std::invalid_argument("angular momentum must be a half-integer");
  return static_cast<int>(r);
}

double factorial(int n) {
  if (n < 0) throw std::logic_error("negative factorial");
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

Eigen::MatrixXcd superop(const Matrix8& left, const Matrix8& right) {
  // vec(A rho B) = (B^T kron A) vec(rho)
  Eigen::MatrixXcd s(kLiouvilleDim, kLiouvilleDim);
  for (int i = 0; i < kNumLevels; ++i)
    for (int j = 0; j < kNumLevels; ++j) s.block<8, 8>(i * 8, j * 8) = right(j, i) * left;
  return s;
}

}  // namespace

LevelScheme LevelScheme::calcium40() {
  LevelScheme s;
  s.levels = {{
      {Manifold::S12, 0.5, -0.5, 2.0},
      {Manifold::S12, 0.5, 0.5, 2.0},
      {Manifold::P12, 0.5, -0.5, 2.0 / 3.0},
      {Manifold::P12, 0.5, 0.5, 2.0 / 3.0},
      {Manifold::D32, 1.5, -1.5, 0.8},
      {Manifold::D32, 1.5, -0.5, 0.8},
      {Manifold::D32, 1.5, 0.5, 0.8},
      {Manifold::D32, 1.5, 1.5, 0.8},
  }};
  return s;
}

std::array<double, kNumLevels> zeeman_shifts(const LevelScheme& scheme, double field_gauss) {
  std::array<double, kNumLevels> shifts{};
  for (int i = 0; i < kNumLevels; ++i) {
    const Level& l = scheme.levels[i];
    shifts[i] = l.lande * l.m * mhz(kBohrMhzPerGauss) * field_gauss;
  }
  return shifts;
}

Polarization polarization_from_q(int q) {
  switch (q) {
    case -1: return Polarization::SigmaMinus;
    case 0: return Polarization::Pi;
    case 1: return Polarization::SigmaPlus;
  }
  throw std::invalid_argument("dipole polarization index must be -1, 0 or +1");
}

const char* to_string(Polarization p) {
  switch (p) {
    case Polarization::SigmaMinus: return "sigma-";
    case Polarization::Pi: return "pi";
    case Polarization::SigmaPlus: return "sigma+";
  }
  return "?";
}

double clebsch_gordan(double j1, double m1, double j2, double m2, double J, double M) {
  const int tj1 = twice(j1), tm1 = twice(m1), tj2 = twice(j2), tm2 = twice(m2), tJ = twice(J), tM = twice(M);
  if (tm1 + tm2 != tM) return 0.0;
  if (std::abs(tm1) > tj1 || std::abs(tm2) > tj2 || std::abs(tM) > tJ) return 0.0;
  if (tJ < std::abs(tj1 - tj2) || tJ > tj1 + tj2) return 0.0;
  if ((tj1 + tj2 + tJ) % 2 != 0 || (tj1 + tm1) % 2 != 0 || (tj2 + tm2) % 2 != 0 || (tJ + tM) % 2 != 0)
    return 0.0;

  // All of these are integers once the doubled values are halved.
  const int a = (tJ + tj1 - tj2) / 2, b = (tJ - tj1 + tj2) / 2, c = (tj1 + tj2 - tJ) / 2;
  const int d = (tj1 + tj2 + tJ) / 2 + 1;
  const double pre = std::sqrt((tJ + 1) * factorial(a) * factorial(b) * factorial(c) / factorial(d));
  const double norm = std::sqrt(factorial((tJ + tM) / 2) * factorial((tJ - tM) / 2) * factorial((tj1 - tm1) / 2) *
                                factorial((tj1 + tm1) / 2) * factorial((tj2 - tm2) / 2) *
                                factorial((tj2 + tm2) / 2));
  double sum = 0.0;
  for (int k = 0; k <= c; ++k) {
    const int d1 = c - k;
    const int d2 = (tj1 - tm1) / 2 - k;
    const int d3 = (tj2 + tm2) / 2 - k;
    const int d4 = (tJ - tj2 + tm1) / 2 + k;
    const int d5 = (tJ - tj1 - tm2) / 2 + k;
    if (d1 < 0 || d2 < 0 || d3 < 0 || d4 < 0 || d5 < 0) continue;
    const double term =
        1.0 / (factorial(k) * factorial(d1) * factorial(d2) * factorial(d3) * factorial(d4) * factorial(d5));
    sum += (k % 2 == 0) ? term : -term;
  }
  return pre * norm * sum;
}

std::vector<ChannelAmplitude> transition_amplitudes(double j_upper, double j_lower) {
  const bool supported = std::abs(j_upper - 0.5) < 1e-12 &&
                         (std::abs(j_lower - 0.5) < 1e-12 || std::abs(j_lower - 1.5) < 1e-12);
  if (!supported) throw std::invalid_argument("unsupported J pair for dipole transition amplitudes");

  std::vector<ChannelAmplitude> out;
  for (double mu = -j_upper; mu <= j_upper + 1e-9; mu += 1.0) {
    for (double ml = -j_lower; ml <= j_lower + 1e-9; ml += 1.0) {
      const int q = static_cast<int>(std::lround(mu - ml));
      if (std::abs(q) > 1) continue;
      out.push_back({mu, ml, q, clebsch_gordan(j_lower, ml, 1.0, q, j_upper, mu)});
    }
  }
  return out;
}

TransitionTable build_transition_table(const LevelScheme& scheme, double gamma_sp, double gamma_dp) {
  auto index_of = [&](Manifold man, double m) {
    for (int i = 0; i < kNumLevels; ++i)
      if (scheme.levels[i].manifold == man && std::abs(scheme.levels[i].m - m) < 1e-9) return i;
    throw std::logic_error("level not found in scheme");
  };

  TransitionTable table{{}, gamma_sp, gamma_dp};
  for (Manifold lower : {Manifold::S12, Manifold::D32}) {
    const double jl = lower == Manifold::S12 ? 0.5 : 1.5;
    for (const ChannelAmplitude& a : transition_amplitudes(0.5, jl)) {
      table.channels.push_back(
          {index_of(Manifold::P12, a.m_upper), index_of(lower, a.m_lower), a.q, a.amplitude, lower});
    }
  }
  return table;
}

PolarizationComponents polarization_components(double alpha) {
  const double s = std::sin(alpha) / std::sqrt(2.0);
  return {cplx(std::cos(alpha), 0.0), cplx(-s, 0.0), cplx(s, 0.0)};
}

Matrix8 build_hamiltonian(const ExperimentParams& params, const LevelScheme& scheme,
                          const TransitionTable& table) {
  Matrix8 h = Matrix8::Zero();
  const auto shifts = zeeman_shifts(scheme, params.field_gauss);
  for (int i = 0; i < kNumLevels; ++i) {
    double e = shifts[i];
    switch (scheme.levels[i].manifold) {
      case Manifold::S12: break;
      case Manifold::P12: e -= params.detuning397; break;
      case Manifold::D32: e += params.detuning866 - params.detuning397; break;
    }
    h(i, i) = e;
  }
  const PolarizationComponents blue = polarization_components(params.alpha397);
  const PolarizationComponents red = polarization_components(params.alpha866);
  for (const Channel& c : table.channels) {
    const bool sp = c.lower_manifold == Manifold::S12;
    const double rabi = sp ? params.rabi397 : params.rabi866;
    const cplx a = (sp ? blue : red).component(c.q);
    // Rabi frequencies refer to the reduced dipole element: the coupling of a sublevel
    // pair is Omega times its polarization component and Clebsch-Gordan factor.
    const cplx coupling = rabi * a * c.amplitude;
    h(c.upper, c.lower) += coupling;
    h(c.lower, c.upper) += std::conj(coupling);
  }
  return h;
}

Liouvillian::Liouvillian(Matrix8 hamiltonian, std::vector<JumpOperator> jumps)
    : hamiltonian_(std::move(hamiltonian)), jumps_(std::move(jumps)) {
  const Matrix8 id = Matrix8::Identity();
  const cplx i(0.0, 1.0);
  generator_ = -i * (superop(hamiltonian_, id) - superop(id, hamiltonian_));
  for (const JumpOperator& j : jumps_) {
    const Matrix8 ldl = j.op.adjoint() * j.op;
    generator_ += superop(j.op, j.op.adjoint()) - 0.5 * superop(ldl, id) - 0.5 * superop(id, ldl);
  }
}

Matrix8 Liouvillian::effective_hamiltonian() const {
  Matrix8 h = hamiltonian_;
  for (const JumpOperator& j : jumps_) h -= cplx(0.0, 0.5) * (j.op.adjoint() * j.op);
  return h;
}

Matrix8 Liouvillian::apply(const Matrix8& rho) const { return unvectorize(generator_ * vectorize(rho)); }

double Liouvillian::trace_residual() const {
  Eigen::RowVectorXcd t = Eigen::RowVectorXcd::Zero(kLiouvilleDim);
  for (int k = 0; k < kNumLevels; ++k) t(k + kNumLevels * k) = 1.0;
  return (t * generator_).norm() / generator_.norm();
}

Liouvillian build_liouvillian(const ExperimentParams& params, const ModelOptions& options) {
  params.validate();
  const LevelScheme scheme = LevelScheme::calcium40();
  const TransitionTable table = build_transition_table(scheme, params.gamma_sp, params.gamma_dp);
  Matrix8 h = build_hamiltonian(params, scheme, table);

  std::vector<JumpOperator> jumps;
  if (options.decay == DecayGrouping::PerChannel) {
    for (const Channel& c : table.channels) {
      Matrix8 op = Matrix8::Zero();
      op(c.lower, c.upper) = std::sqrt(table.rate(c));
      jumps.push_back({op, c.polarization(), c.lower_manifold, true});
    }
  } else {
    for (Manifold lower : {Manifold::S12, Manifold::D32}) {
      const double gamma = lower == Manifold::S12 ? params.gamma_sp : params.gamma_dp;
      for (int q = -1; q <= 1; ++q) {
        Matrix8 op = Matrix8::Zero();
        bool any = false;
        for (const Channel& c : table.channels) {
          if (c.lower_manifold != lower || c.q != q) continue;
          op(c.lower, c.upper) = std::sqrt(gamma) * c.amplitude;
          any = true;
        }
        if (any) jumps.push_back({op, polarization_from_q(q), lower, true});
      }
    }
  }

  auto projector = [&](std::initializer_list<Manifold> manifolds) {
    Matrix8 p = Matrix8::Zero();
    for (int i = 0; i < kNumLevels; ++i)
      for (Manifold m : manifolds)
        if (scheme.levels[i].manifold == m) p(i, i) = 1.0;
    return p;
  };
  // Laser phase noise: the 397 phase enters the P and D frames, the 866 phase only D.
  if (params.linewidth397 > 0)
    jumps.push_back({std::sqrt(params.linewidth397) * projector({Manifold::P12, Manifold::D32}),
                     Polarization::Pi, Manifold::P12, false});
  if (params.linewidth866 > 0)
    jumps.push_back({std::sqrt(params.linewidth866) * projector({Manifold::D32}), Polarization::Pi,
                     Manifold::P12, false});
  return Liouvillian(std::move(h), std::move(jumps));
}

Eigen::VectorXcd vectorize(const Matrix8& rho) {
  Eigen::VectorXcd v(kLiouvilleDim);
  for (int c = 0; c < kNumLevels; ++c)
    for (int r = 0; r < kNumLevels; ++r) v(r + kNumLevels * c) = rho(r, c);
  return v;
}

Matrix8 unvectorize(const Eigen::VectorXcd& v) {
  Matrix8 rho;
  for (int c = 0; c < kNumLevels; ++c)
    for (int r = 0; r < kNumLevels; ++r) rho(r, c) = v(r + kNumLevels * c);
  return rho;
}

}  // namespace ionpair
