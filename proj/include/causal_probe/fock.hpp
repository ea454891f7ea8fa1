#pragma once

// Single-mode truncated Fock utilities shared by the oscillator and field
// labs. Levels 0..dim-1; the lowering operator never leaves the space, so
// moments are formed from a|ψ> only and [a, a†] = 1 is applied exactly.

#include <cmath>
#include <complex>

#include "causal_probe/quantum_core.hpp"

namespace causal_probe::fock {

// Coherent amplitudes e^{-|α|²/2} α^n / sqrt(n!) for n < dim.
inline CVector coherent(cplx alpha, std::size_t dim) {
  CVector v(static_cast<Eigen::Index>(dim));
  cplx term = std::exp(-0.5 * std::norm(alpha));
  for (std::size_t n = 0; n < dim; ++n) {
    v(static_cast<Eigen::Index>(n)) = term;
    term *= alpha / std::sqrt(static_cast<double>(n + 1));
  }
  return v;
}

// Norm² of the coherent state outside the truncation.
inline double coherent_tail(cplx alpha, std::size_t dim) {
  return std::max(0.0, 1.0 - coherent(alpha, dim).squaredNorm());
}

inline CVector number_state(std::size_t n, std::size_t dim) {
  if (n >= dim) throw InvalidArgument("number state outside truncation");
  CVector v = CVector::Zero(static_cast<Eigen::Index>(dim));
  v(static_cast<Eigen::Index>(n)) = 1.0;
  return v;
}

inline CMatrix lowering(std::size_t dim) {
  CMatrix a = CMatrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t n = 1; n < dim; ++n)
    a(static_cast<Eigen::Index>(n - 1), static_cast<Eigen::Index>(n)) = std::sqrt(static_cast<double>(n));
  return a;
}

inline CMatrix number_op(std::size_t dim) {
  CMatrix n = CMatrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t k = 0; k < dim; ++k) n(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = static_cast<double>(k);
  return n;
}

// a|ψ> for a single mode.
inline CVector lower(const CVector& psi) {
  CVector out = CVector::Zero(psi.size());
  for (Eigen::Index n = 1; n < psi.size(); ++n) out(n - 1) = std::sqrt(static_cast<double>(n)) * psi(n);
  return out;
}

// Applies the lowering operator of mode `slot` to a state over `dims`.
inline CVector lower_slot(const CVector& psi, const Dims& dims, std::size_t slot) {
  std::size_t inner = 1;
  for (std::size_t k = slot + 1; k < dims.size(); ++k) inner *= dims[k];
  const std::size_t d = dims[slot];
  const std::size_t outer = static_cast<std::size_t>(psi.size()) / (inner * d);
  CVector out = CVector::Zero(psi.size());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t n = 1; n < d; ++n) {
      const double s = std::sqrt(static_cast<double>(n));
      const auto src = static_cast<Eigen::Index>((o * d + n) * inner);
      const auto dst = static_cast<Eigen::Index>((o * d + n - 1) * inner);
      out.segment(dst, static_cast<Eigen::Index>(inner)) = s * psi.segment(src, static_cast<Eigen::Index>(inner));
    }
  return out;
}

// Normal-ordered single-mode moments <a>, <a²>, <a†a>.
struct LadderMoments {
  cplx a{0.0, 0.0};
  cplx a2{0.0, 0.0};
  double n = 0.0;
};

inline LadderMoments ladder_moments(const CVector& psi) {
  const CVector a1 = lower(psi);
  const CVector a2 = lower(a1);
  return {psi.dot(a1), psi.dot(a2), a1.squaredNorm()};
}

// Quadrature moments of one oscillator of mass m, frequency Ω:
// Q = sqrt(ħ/2mΩ)(a + a†), P = i sqrt(ħmΩ/2)(a† - a).
struct QuadratureMoments {
  double q = 0.0, p = 0.0, q2 = 0.0, p2 = 0.0;
};

inline QuadratureMoments quadratures(const LadderMoments& l, double mass, double omega, double hbar) {
  const double sq = std::sqrt(hbar / (2.0 * mass * omega));
  const double sp = std::sqrt(hbar * mass * omega / 2.0);
  QuadratureMoments m;
  m.q = sq * 2.0 * l.a.real();
  m.p = sp * 2.0 * l.a.imag();
  m.q2 = sq * sq * (2.0 * l.a2.real() + 2.0 * l.n + 1.0);
  m.p2 = sp * sp * (-2.0 * l.a2.real() + 2.0 * l.n + 1.0);
  return m;
}

}  // namespace causal_probe::fock
