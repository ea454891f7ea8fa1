#pragma once

// Two spin-1/2 particles A (slot 0) and B (slot 1), basis order
// |↑↑>, |↑↓>, |↓↑>, |↓↓>. Measurement prescriptions for S², S^z and
// state verification, including the causal and the signalling choices of
// post-measurement basis.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "causal_probe/quantum_core.hpp"

namespace causal_probe::spin {

using Axis = std::array<double, 3>;

inline const Dims kTwoSpins{2, 2};

inline void require_unit(const Axis& n) {
  const double len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
  if (std::abs(len - 1.0) > numeric_policy().exact_tol)
    throw InvalidArgument("spin axis must be a unit vector");
}

struct SpinLabel {
  enum class Kind { up, down, right, left, plus, minus };
  Kind kind = Kind::up;
  Axis axis{0.0, 0.0, 1.0};  // used by plus/minus only

  static SpinLabel up() { return {Kind::up, {0, 0, 1}}; }
  static SpinLabel down() { return {Kind::down, {0, 0, 1}}; }
  static SpinLabel right() { return {Kind::right, {1, 0, 0}}; }
  static SpinLabel left() { return {Kind::left, {1, 0, 0}}; }
  static SpinLabel plus(Axis n) {
    require_unit(n);
    return {Kind::plus, n};
  }
  static SpinLabel minus(Axis n) {
    require_unit(n);
    return {Kind::minus, n};
  }
};

// Accepts up/down/right/left (or u/d/r/l).
inline SpinLabel parse_label(const std::string& s) {
  if (s == "up" || s == "u") return SpinLabel::up();
  if (s == "down" || s == "d") return SpinLabel::down();
  if (s == "right" || s == "r") return SpinLabel::right();
  if (s == "left" || s == "l") return SpinLabel::left();
  throw InvalidArgument("unknown spin label '" + s + "'");
}

inline CMatrix pauli_x() { return (CMatrix(2, 2) << 0, 1, 1, 0).finished(); }
inline CMatrix pauli_y() {
  return (CMatrix(2, 2) << 0, cplx(0, -1), cplx(0, 1), 0).finished();
}
inline CMatrix pauli_z() { return (CMatrix(2, 2) << 1, 0, 0, -1).finished(); }

inline CMatrix n_dot_sigma(const Axis& n) {
  return n[0] * pauli_x() + n[1] * pauli_y() + n[2] * pauli_z();
}

// +1 eigenvector of n·σ: (cos θ/2, e^{iφ} sin θ/2).
inline CVector plus_ket(const Axis& n) {
  const double theta = std::acos(std::clamp(n[2], -1.0, 1.0));
  const double phi = (n[0] == 0.0 && n[1] == 0.0) ? 0.0 : std::atan2(n[1], n[0]);
  CVector v(2);
  v << std::cos(theta / 2), std::polar(std::sin(theta / 2), phi);
  return v;
}

// -1 eigenvector of n·σ: (-e^{-iφ} sin θ/2, cos θ/2) up to phase.
inline CVector minus_ket(const Axis& n) {
  const double theta = std::acos(std::clamp(n[2], -1.0, 1.0));
  const double phi = (n[0] == 0.0 && n[1] == 0.0) ? 0.0 : std::atan2(n[1], n[0]);
  CVector v(2);
  v << -std::polar(std::sin(theta / 2), -phi), std::cos(theta / 2);
  return v;
}

inline CVector ket(const SpinLabel& l) {
  const double r = 1.0 / std::sqrt(2.0);
  CVector v(2);
  switch (l.kind) {
    case SpinLabel::Kind::up: v << 1, 0; break;
    case SpinLabel::Kind::down: v << 0, 1; break;
    case SpinLabel::Kind::right: v << r, r; break;
    case SpinLabel::Kind::left: v << r, -r; break;
    case SpinLabel::Kind::plus: return plus_ket(l.axis);
    case SpinLabel::Kind::minus: return minus_ket(l.axis);
  }
  return v;
}

inline StateVector spin_state(const SpinLabel& a, const SpinLabel& b) {
  return tensor_state({StateVector({2}, ket(a)), StateVector({2}, ket(b))});
}

inline CMatrix rotation(const Axis& axis, double angle) {
  require_unit(axis);
  return std::cos(angle / 2) * CMatrix::Identity(2, 2) -
         cplx(0, 1) * std::sin(angle / 2) * n_dot_sigma(axis);
}

// exp(-i angle (n·σ_A)/2) ⊗ 1_B.
inline StateVector alice_rotate(const StateVector& state, const Axis& axis, double angle) {
  if (state.dims() != kTwoSpins) throw InvalidArgument("alice_rotate expects a two-spin state");
  return apply_local(state, rotation(axis, angle), 0);
}

// ---------------------------------------------------------------- observables

inline Operator s_component(std::size_t slot, const CMatrix& sigma, double hbar) {
  return embed_local(Operator({2}, 0.5 * hbar * sigma, true), slot, kTwoSpins);
}

inline Operator sAz(double hbar = 1.0) { return s_component(0, pauli_z(), hbar); }
inline Operator sAx(double hbar = 1.0) { return s_component(0, pauli_x(), hbar); }
inline Operator sBz(double hbar = 1.0) { return s_component(1, pauli_z(), hbar); }
inline Operator sBx(double hbar = 1.0) { return s_component(1, pauli_x(), hbar); }
inline Operator sBy(double hbar = 1.0) { return s_component(1, pauli_y(), hbar); }

inline Operator total_Sz(double hbar = 1.0) {
  return hermitian_sum(sAz(hbar), sBz(hbar));
}

inline Operator total_S2(double hbar = 1.0) {
  CMatrix m = CMatrix::Zero(4, 4);
  for (const auto& sigma : {pauli_x(), pauli_y(), pauli_z()}) {
    const CMatrix s = 0.5 * hbar * (kron(sigma, CMatrix::Identity(2, 2)) +
                                    kron(CMatrix::Identity(2, 2), sigma));
    m += s * s;
  }
  // Clean rounding so the hermitian check is exact.
  m = 0.5 * (m + m.adjoint()).eval();
  return Operator(kTwoSpins, m, true);
}

// Names: sAz sAx sBz sBx sBy Sz S2.
inline Operator observable(const std::string& name, double hbar = 1.0) {
  if (name == "sAz") return sAz(hbar);
  if (name == "sAx") return sAx(hbar);
  if (name == "sBz") return sBz(hbar);
  if (name == "sBx") return sBx(hbar);
  if (name == "sBy") return sBy(hbar);
  if (name == "Sz") return total_Sz(hbar);
  if (name == "S2") return total_S2(hbar);
  throw InvalidArgument("unknown spin observable '" + name + "'");
}

// ---------------------------------------------------------------- schemes

enum class BasisChoice { standard, bell, luders };

inline BasisChoice parse_basis(const std::string& s) {
  if (s == "standard") return BasisChoice::standard;
  if (s == "bell") return BasisChoice::bell;
  if (s == "luders") return BasisChoice::luders;
  throw InvalidArgument("unknown basis choice '" + s + "'");
}

namespace detail {
inline CVector v4(cplx a, cplx b, cplx c, cplx d) {
  CVector v(4);
  v << a, b, c, d;
  return v;
}
}  // namespace detail

inline MeasurementScheme scheme_S2(BasisChoice choice) {
  using detail::v4;
  const double r = 1.0 / std::sqrt(2.0);
  const CVector singlet = v4(0, r, -r, 0);
  const CVector t0 = v4(0, r, r, 0);
  switch (choice) {
    case BasisChoice::standard:
      return MeasurementScheme::from_vectors(kTwoSpins, {{"S=0 singlet", singlet},
                                                         {"S=1 (ud+du)", t0},
                                                         {"S=1 uu", v4(1, 0, 0, 0)},
                                                         {"S=1 dd", v4(0, 0, 0, 1)}});
    case BasisChoice::bell:
      return MeasurementScheme::from_vectors(kTwoSpins, {{"S=0 singlet", singlet},
                                                         {"S=1 (ud+du)", t0},
                                                         {"S=1 (uu+dd)", v4(r, 0, 0, r)},
                                                         {"S=1 (uu-dd)", v4(r, 0, 0, -r)}});
    case BasisChoice::luders: {
      CMatrix triplet(4, 3);
      triplet.col(0) = v4(1, 0, 0, 0);
      triplet.col(1) = t0;
      triplet.col(2) = v4(0, 0, 0, 1);
      return MeasurementScheme(kTwoSpins, {{"S=0", CMatrix(singlet)}, {"S=1", triplet}},
                               SchemeKind::luders);
    }
  }
  throw InvalidArgument("bad basis choice");
}

inline MeasurementScheme scheme_Sz(BasisChoice choice) {
  using detail::v4;
  const double r = 1.0 / std::sqrt(2.0);
  switch (choice) {
    case BasisChoice::standard:
      return MeasurementScheme::from_vectors(kTwoSpins, {{"m=1 uu", v4(1, 0, 0, 0)},
                                                         {"m=-1 dd", v4(0, 0, 0, 1)},
                                                         {"m=0 ud", v4(0, 1, 0, 0)},
                                                         {"m=0 du", v4(0, 0, 1, 0)}});
    case BasisChoice::bell:
      return MeasurementScheme::from_vectors(kTwoSpins, {{"m=1 uu", v4(1, 0, 0, 0)},
                                                         {"m=-1 dd", v4(0, 0, 0, 1)},
                                                         {"m=0 (ud+du)", v4(0, r, r, 0)},
                                                         {"m=0 (ud-du)", v4(0, r, -r, 0)}});
    case BasisChoice::luders: {
      CMatrix m0(4, 2);
      m0.col(0) = v4(0, 1, 0, 0);
      m0.col(1) = v4(0, 0, 1, 0);
      return MeasurementScheme(kTwoSpins,
                               {{"m=1", CMatrix(v4(1, 0, 0, 0))},
                                {"m=0", m0},
                                {"m=-1", CMatrix(v4(0, 0, 0, 1))}},
                               SchemeKind::luders);
    }
  }
  throw InvalidArgument("bad basis choice");
}

inline MeasurementScheme qndsv(const SpinLabel& a, const SpinLabel& b) {
  return qndsv_scheme(spin_state(a, b));
}

struct BeforeAfter {
  double before = 0.0;
  double after = 0.0;
};

// <obs> on the pre-measurement state and after the scheme acts.
inline BeforeAfter measured_flag_observable(const MeasurementScheme& scheme,
                                            const StateVector& prestate, const Operator& obs) {
  return {obs.expectation(prestate), post_measurement_expectation(prestate, scheme, obs)};
}

}  // namespace causal_probe::spin
