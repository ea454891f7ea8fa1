#pragma once

// Two harmonic oscillators A and B (equal mass and frequency) in truncated
// Fock space. Amplitudes are held as a matrix indexed (n_A, n_B) or
// (n_+, n_-) where a_± = (a_A ± a_B)/sqrt(2).

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "causal_probe/fock.hpp"
#include "causal_probe/quantum_core.hpp"

namespace causal_probe::oscillator {

struct OscParams {
  double mass = 1.0;
  double omega = 1.0;
  double hbar = 1.0;

  void validate() const {
    if (!(mass > 0.0) || !(omega > 0.0) || !(hbar > 0.0))
      throw InvalidArgument("oscillator mass, frequency and hbar must be positive");
  }
  // κ = sqrt(mΩ/ħ)
  double kappa() const { return std::sqrt(mass * omega / hbar); }
};

// Initial momenta and Alice's kick λ on Q_A.
struct KickParams {
  double p_A = 0.0;
  double p_B = 0.0;
  double lambda = 0.0;

  double lambda_plus() const { return p_A + p_B + lambda; }
  double lambda_minus() const { return p_A - p_B + lambda; }
  // Λ_± = λ_± / (2ħκ)
  double Lambda_plus(const OscParams& o) const { return lambda_plus() / (2.0 * o.hbar * o.kappa()); }
  double Lambda_minus(const OscParams& o) const { return lambda_minus() / (2.0 * o.hbar * o.kappa()); }
};

enum class FockBasis { AB, PM };

class TwoModeFock {
 public:
  TwoModeFock(OscParams params, CMatrix amps, FockBasis basis, double tail_bound)
      : params_(params), amps_(std::move(amps)), basis_(basis), tail_(tail_bound) {
    params_.validate();
    if (amps_.rows() == 0 || amps_.cols() == 0) throw InvalidArgument("empty Fock truncation");
  }

  const OscParams& params() const { return params_; }
  const CMatrix& amplitudes() const { return amps_; }
  FockBasis basis() const { return basis_; }
  double tail_bound() const { return tail_; }
  std::size_t dim0() const { return static_cast<std::size_t>(amps_.rows()); }
  std::size_t dim1() const { return static_cast<std::size_t>(amps_.cols()); }

  // Normalized state over dims {dim0, dim1}.
  StateVector to_state() const {
    CVector v(amps_.size());
    for (Eigen::Index i = 0; i < amps_.rows(); ++i)
      for (Eigen::Index j = 0; j < amps_.cols(); ++j) v(i * amps_.cols() + j) = amps_(i, j);
    return StateVector({dim0(), dim1()}, v).normalized();
  }

  // Cuts or zero-pads each mode; removed norm is added to the tail bound.
  TwoModeFock resized(std::size_t d0, std::size_t d1) const {
    CMatrix out = CMatrix::Zero(static_cast<Eigen::Index>(d0), static_cast<Eigen::Index>(d1));
    const auto r = std::min<Eigen::Index>(amps_.rows(), static_cast<Eigen::Index>(d0));
    const auto c = std::min<Eigen::Index>(amps_.cols(), static_cast<Eigen::Index>(d1));
    out.topLeftCorner(r, c) = amps_.topLeftCorner(r, c);
    const double lost = amps_.squaredNorm() - out.squaredNorm();
    return TwoModeFock(params_, std::move(out), basis_, tail_ + std::max(0.0, lost));
  }

 private:
  OscParams params_;
  CMatrix amps_;
  FockBasis basis_;
  double tail_;
};

inline void check_tail(double tail, const std::string& what) {
  if (tail > numeric_policy().tail_tol)
    throw TruncationError(what + ": truncation tail " + short_number(tail) + " exceeds " +
                          short_number(numeric_policy().tail_tol));
}

// Coherent amplitude produced by the momentum kick e^{iqQ/ħ} on the ground
// state: α = iq/(sqrt(2) ħ κ).
inline cplx kick_amplitude(double q, const OscParams& o) {
  return cplx(0.0, q / (std::sqrt(2.0) * o.hbar * o.kappa()));
}

// Product of coherent states after the kick, in the requested basis. In the
// PM basis the amplitudes are iΛ_+ and iΛ_-.
inline TwoModeFock coherent_prestate(const OscParams& params, const KickParams& kick,
                                     std::size_t trunc, FockBasis basis = FockBasis::PM) {
  params.validate();
  if (trunc == 0) throw InvalidArgument("truncation must be positive");
  cplx a0, a1;
  if (basis == FockBasis::AB) {
    a0 = kick_amplitude(kick.p_A + kick.lambda, params);
    a1 = kick_amplitude(kick.p_B, params);
  } else {
    a0 = cplx(0.0, kick.Lambda_plus(params));
    a1 = cplx(0.0, kick.Lambda_minus(params));
  }
  const CVector v0 = fock::coherent(a0, trunc);
  const CVector v1 = fock::coherent(a1, trunc);
  CMatrix amps = v0 * v1.transpose();
  const double tail = std::max(0.0, 1.0 - amps.squaredNorm());
  check_tail(tail, "coherent_prestate");
  return TwoModeFock(params, std::move(amps), basis, tail);
}

// Beamsplitter blocks on the total-number sectors 0..nmax. In block n,
// column k holds the image of |k, n-k> (first mode, second mode) expanded
// over |j, n-j> in the rotated modes (a_0 ± a_1)/sqrt(2). Each block is real
// orthogonal and its own inverse.
inline std::vector<Eigen::MatrixXd> beamsplitter_blocks(std::size_t nmax) {
  // |k, n-k> comes from |k-1, n-k> by the first-mode creator
  // (a_+† + a_-†)/sqrt(2), and |0, n> from |0, n-1> by (a_+† - a_-†)/sqrt(2).
  std::vector<Eigen::MatrixXd> blocks;
  blocks.reserve(nmax + 1);
  blocks.emplace_back(Eigen::MatrixXd::Ones(1, 1));
  const double r = 1.0 / std::sqrt(2.0);
  for (std::size_t m = 1; m <= nmax; ++m) {
    const Eigen::MatrixXd& prev = blocks.back();
    const auto size = static_cast<Eigen::Index>(m + 1);
    Eigen::MatrixXd cur = Eigen::MatrixXd::Zero(size, size);
    for (std::size_t k = 0; k <= m; ++k) {
      const bool first = k > 0;
      const auto src = static_cast<Eigen::Index>(first ? k - 1 : 0);
      const double norm = std::sqrt(static_cast<double>(first ? k : m));
      const double sign_minus = first ? 1.0 : -1.0;
      const auto col = static_cast<Eigen::Index>(k);
      for (std::size_t j = 0; j < m; ++j) {
        const double c = prev(static_cast<Eigen::Index>(j), src);
        if (c == 0.0) continue;
        const auto row = static_cast<Eigen::Index>(j);
        cur(row + 1, col) += r * c * std::sqrt(static_cast<double>(j + 1)) / norm;
        cur(row, col) += sign_minus * r * c * std::sqrt(static_cast<double>(m - j)) / norm;
      }
    }
    blocks.push_back(std::move(cur));
  }
  return blocks;
}

inline Eigen::MatrixXd beamsplitter_block(std::size_t n) {
  return beamsplitter_blocks(n).back();
}

// Applies the 50:50 mode transform a_± = (a_A ± a_B)/sqrt(2) to the Fock
// amplitudes. The transform is involutive, so the same routine maps PM back
// to AB. Amplitude pushed outside the per-mode truncation is dropped and
// counted in the tail bound.
inline TwoModeFock mode_transform(const TwoModeFock& state) {
  const auto d0 = state.dim0(), d1 = state.dim1();
  const CMatrix& in = state.amplitudes();
  CMatrix out = CMatrix::Zero(in.rows(), in.cols());
  const std::size_t nmax = (d0 - 1) + (d1 - 1);
  const auto blocks = beamsplitter_blocks(nmax);
  for (std::size_t n = 0; n <= nmax; ++n) {
    const Eigen::MatrixXd& u = blocks[n];
    for (std::size_t k = 0; k <= n; ++k) {
      if (k >= d0 || n - k >= d1) continue;
      const cplx c = in(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n - k));
      if (c == cplx(0.0, 0.0)) continue;
      for (std::size_t j = 0; j <= n; ++j) {
        if (j >= d0 || n - j >= d1) continue;
        out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(n - j)) += u(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) * c;
      }
    }
  }
  const double lost = std::max(0.0, in.squaredNorm() - out.squaredNorm());
  const FockBasis to = state.basis() == FockBasis::AB ? FockBasis::PM : FockBasis::AB;
  return TwoModeFock(state.params(), std::move(out), to, state.tail_bound() + lost);
}

inline TwoModeFock ab_to_pm(const TwoModeFock& state) {
  if (state.basis() != FockBasis::AB) throw InvalidArgument("ab_to_pm expects an AB-basis state");
  return mode_transform(state);
}

inline TwoModeFock pm_to_ab(const TwoModeFock& state) {
  if (state.basis() != FockBasis::PM) throw InvalidArgument("pm_to_ab expects a PM-basis state");
  return mode_transform(state);
}

// Factors of a product state; throws if the Schmidt rank exceeds one.
struct ProductFactors {
  CVector first;   // normalized
  CVector second;  // normalized
};

inline ProductFactors separable_factors(const TwoModeFock& state) {
  Eigen::JacobiSVD<CMatrix> svd(state.amplitudes(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (s(0) <= 0.0) throw InvalidArgument("zero two-mode state");
  if (s.size() > 1 && s(1) / s(0) > numeric_policy().schmidt_tol)
    throw InvalidArgument("pre-measurement state is not separable across the ± modes");
  // amps = s0 u v^T with v = conj(V col 0).
  CVector u = svd.matrixU().col(0);
  CVector v = svd.matrixV().col(0).conjugate();
  // Fix the split of the global phase: make the largest entry of u real.
  Eigen::Index imax = 0;
  u.cwiseAbs().maxCoeff(&imax);
  const cplx ph = u(imax) / std::abs(u(imax));
  u /= ph;
  v *= ph;
  return {u, v};
}

// --------------------------------------------------------------- schemes

inline MeasurementScheme number_scheme(std::size_t dim) {
  std::vector<std::pair<std::string, CVector>> v;
  for (std::size_t n = 0; n < dim; ++n) v.emplace_back("n=" + std::to_string(n), fock::number_state(n, dim));
  return MeasurementScheme::from_vectors({dim}, v);
}

inline void require_even_cut(int s_cut) {
  if (s_cut < 0) throw InvalidArgument("S_cut must be non-negative");
  if (s_cut % 2 != 0)
    throw InvalidArgument("S_cut must be even (phase states are orthonormal only for odd S_cut+1)");
}

// (S+1)^{-1/2} Σ_{n=0}^{S} e^{i(2n+b)θ_s} |2n+b>, θ_s = 2πs/(S+1).
inline CVector phase_state(int b, int s, int s_cut, std::size_t dim) {
  require_even_cut(s_cut);
  if (b != 0 && b != 1) throw InvalidArgument("parity bit must be 0 or 1");
  if (s < 0 || s > s_cut) throw InvalidArgument("phase index out of range");
  if (dim < static_cast<std::size_t>(2 * s_cut + 2))
    throw InvalidArgument("truncation too small to host the phase states");
  const double norm = 1.0 / std::sqrt(static_cast<double>(s_cut + 1));
  CVector v = CVector::Zero(static_cast<Eigen::Index>(dim));
  for (int n = 0; n <= s_cut; ++n) {
    const int level = 2 * n + b;
    // Reduce the phase argument mod 2π in integers to keep it exact.
    const long k = (static_cast<long>(level) * s) % (s_cut + 1);
    v(level) = std::polar(norm, 2.0 * std::numbers::pi * static_cast<double>(k) / (s_cut + 1));
  }
  return v;
}

inline std::string phase_label(int b, int s) {
  return "b=" + std::to_string(b) + ",s=" + std::to_string(s);
}

// Complete orthogonal scheme on one mode: the 2(S+1) phase states, plus the
// Fock states above 2S+1 when the truncation is larger.
inline MeasurementScheme phase_scheme_minus(int s_cut, std::size_t dim) {
  std::vector<std::pair<std::string, CVector>> v;
  for (int b = 0; b <= 1; ++b)
    for (int s = 0; s <= s_cut; ++s) v.emplace_back(phase_label(b, s), phase_state(b, s, s_cut, dim));
  for (std::size_t k = static_cast<std::size_t>(2 * s_cut + 2); k < dim; ++k)
    v.emplace_back("residual k=" + std::to_string(k), fock::number_state(k, dim));
  return MeasurementScheme::from_vectors({dim}, v);
}

// Outcomes ψ_n(Q_+) χ^{(b)}_{θ_s}(Q_-) on the PM space {n_plus_dim, n_minus_dim}.
inline MeasurementScheme phase_scheme_Nplus(int s_cut, std::size_t n_plus_dim, std::size_t n_minus_dim) {
  require_even_cut(s_cut);
  if (n_minus_dim < static_cast<std::size_t>(2 * s_cut + 2))
    throw InvalidArgument("mode - truncation must be at least 2*S_cut+2");
  if (n_plus_dim == 0) throw InvalidArgument("mode + truncation must be positive");
  const MeasurementScheme minus = phase_scheme_minus(s_cut, n_minus_dim);
  std::vector<std::pair<std::string, CVector>> v;
  v.reserve(n_plus_dim * minus.size());
  for (std::size_t n = 0; n < n_plus_dim; ++n) {
    const CVector plus = fock::number_state(n, n_plus_dim);
    for (const auto& o : minus.outcomes()) {
      CVector prod(static_cast<Eigen::Index>(n_plus_dim * n_minus_dim));
      for (std::size_t i = 0; i < n_plus_dim; ++i)
        prod.segment(static_cast<Eigen::Index>(i * n_minus_dim), static_cast<Eigen::Index>(n_minus_dim)) =
            plus(static_cast<Eigen::Index>(i)) * o.range.col(0);
      v.emplace_back("n=" + std::to_string(n) + "," + o.label, std::move(prod));
    }
  }
  return MeasurementScheme::from_vectors({n_plus_dim, n_minus_dim}, v);
}

// Expansion coefficient of the kicked pre-state on ψ_n χ^{(b)}_{θ_s}:
// e^{-(Λ+²+Λ-²)/2} (iΛ+)^n/sqrt(n!) Σ_j (iΛ- e^{-iθ_s})^{2j+b} / sqrt((2j+b)!(S+1)).
inline cplx phase_coefficient(int n, int b, int s, int s_cut, double Lp, double Lm) {
  require_even_cut(s_cut);
  const double theta = 2.0 * std::numbers::pi * s / (s_cut + 1);
  cplx plus = std::exp(-0.5 * (Lp * Lp + Lm * Lm));
  for (int k = 1; k <= n; ++k) plus *= cplx(0.0, Lp) / std::sqrt(static_cast<double>(k));
  const cplx z = cplx(0.0, Lm) * std::polar(1.0, -theta);
  // Running term z^l / sqrt(l!) for l = 0, 1, 2, ...
  cplx sum = 0.0;
  cplx term = 1.0;
  for (int l = 0; l <= 2 * s_cut + 1; ++l) {
    if (l % 2 == b) sum += term;
    term *= z / std::sqrt(static_cast<double>(l + 1));
  }
  return plus * sum / std::sqrt(static_cast<double>(s_cut + 1));
}

// --------------------------------------------------------------- ensembles

// Naive N_+ measurement: Lüders projection |n><n| ⊗ 1 on the + mode of a
// separable PM-basis pre-state. Equivalent to born_ensemble with the
// embedded number scheme; done by row slicing.
inline OutcomeEnsemble naive_Nplus_ensemble(const TwoModeFock& prestate) {
  if (prestate.basis() != FockBasis::PM) throw InvalidArgument("naive_Nplus_ensemble expects a PM-basis state");
  (void)separable_factors(prestate);
  const StateVector psi = prestate.to_state();
  const auto d0 = prestate.dim0(), d1 = prestate.dim1();
  OutcomeEnsemble ens;
  ens.tail_bound = prestate.tail_bound();
  for (std::size_t n = 0; n < d0; ++n) {
    CVector proj = CVector::Zero(psi.amplitudes().size());
    const auto off = static_cast<Eigen::Index>(n * d1);
    proj.segment(off, static_cast<Eigen::Index>(d1)) = psi.amplitudes().segment(off, static_cast<Eigen::Index>(d1));
    const double p = proj.squaredNorm();
    const std::string label = "n=" + std::to_string(n);
    if (p < numeric_policy().zero_probability) {
      ens.entries.emplace_back(label, p, std::nullopt);
    } else {
      ens.entries.emplace_back(label, p, StateVector(psi.dims(), proj / std::sqrt(p)));
    }
  }
  return ens;
}

// Ensemble of a product scheme on a product pre-state: outcome (i, j) has
// probability plus_i * minus_j and post-state plus_i ⊗ minus_j.
struct ProductEnsemble {
  OutcomeEnsemble plus;
  OutcomeEnsemble minus;
  double tail_bound = 0.0;
};

// Phase-state measurement evaluated factor by factor; identical to
// born_ensemble with phase_scheme_Nplus on the product pre-state.
inline ProductEnsemble phase_ensemble(const TwoModeFock& prestate, int s_cut) {
  if (prestate.basis() != FockBasis::PM) throw InvalidArgument("phase_ensemble expects a PM-basis state");
  require_even_cut(s_cut);
  const TwoModeFock sized =
      prestate.dim1() < static_cast<std::size_t>(2 * s_cut + 2)
          ? prestate.resized(prestate.dim0(), static_cast<std::size_t>(2 * s_cut + 2))
          : prestate;
  const auto f = separable_factors(sized);
  ProductEnsemble e;
  e.plus = born_ensemble(number_scheme(sized.dim0()), StateVector({sized.dim0()}, f.first));
  e.minus = born_ensemble(phase_scheme_minus(s_cut, sized.dim1()), StateVector({sized.dim1()}, f.second));
  e.tail_bound = sized.tail_bound();
  return e;
}

// --------------------------------------------------------------- moments

struct BMoments {
  double q = 0.0;
  double p = 0.0;
  double q2 = 0.0;
  double p2 = 0.0;
  double energy = 0.0;
  double tail_bound = 0.0;
};

namespace detail {

inline BMoments from_ladder(const fock::LadderMoments& l, const OscParams& o, double tail) {
  const auto m = fock::quadratures(l, o.mass, o.omega, o.hbar);
  BMoments b{m.q, m.p, m.q2, m.p2, 0.0, tail};
  b.energy = m.p2 / (2.0 * o.mass) + 0.5 * o.mass * o.omega * o.omega * m.q2;
  return b;
}

// Ladder moments of a_B for a normalized two-mode vector.
inline fock::LadderMoments b_ladder(const CVector& psi, const Dims& dims, FockBasis basis) {
  if (basis == FockBasis::AB) {
    const CVector a1 = fock::lower_slot(psi, dims, 1);
    const CVector a2 = fock::lower_slot(a1, dims, 1);
    return {psi.dot(a1), psi.dot(a2), a1.squaredNorm()};
  }
  const double r = 1.0 / std::sqrt(2.0);
  const CVector ap = fock::lower_slot(psi, dims, 0);
  const CVector am = fock::lower_slot(psi, dims, 1);
  const CVector app = fock::lower_slot(ap, dims, 0);
  const CVector amm = fock::lower_slot(am, dims, 1);
  const CVector apm = fock::lower_slot(am, dims, 0);
  fock::LadderMoments l;
  l.a = r * (psi.dot(ap) - psi.dot(am));
  l.a2 = 0.5 * (psi.dot(app) - 2.0 * psi.dot(apm) + psi.dot(amm));
  l.n = 0.5 * (ap.squaredNorm() + am.squaredNorm() - 2.0 * ap.dot(am).real());
  return l;
}

}  // namespace detail

inline BMoments local_moments_B(const TwoModeFock& state) {
  check_tail(state.tail_bound(), "local_moments_B");
  const StateVector psi = state.to_state();
  return detail::from_ladder(detail::b_ladder(psi.amplitudes(), psi.dims(), state.basis()),
                             state.params(), state.tail_bound());
}

// Ensemble over PM-basis two-mode post-states (e.g. naive_Nplus_ensemble).
inline BMoments local_moments_B(const OutcomeEnsemble& ens, const OscParams& params,
                                FockBasis basis = FockBasis::PM) {
  check_tail(ens.tail_bound, "local_moments_B");
  fock::LadderMoments acc;
  for (const auto& e : ens.entries) {
    if (e.zero_branch()) continue;
    const auto& s = e.post_state();
    const auto l = detail::b_ladder(s.amplitudes(), s.dims(), basis);
    acc.a += e.probability() * l.a;
    acc.a2 += e.probability() * l.a2;
    acc.n += e.probability() * l.n;
  }
  return detail::from_ladder(acc, params, ens.tail_bound);
}

inline BMoments local_moments_B(const ProductEnsemble& ens, const OscParams& params,
                                bool enforce_tail = true) {
  if (enforce_tail) check_tail(ens.tail_bound, "local_moments_B");
  auto average = [](const OutcomeEnsemble& e) {
    fock::LadderMoments acc;
    for (const auto& x : e.entries) {
      if (x.zero_branch()) continue;
      const auto l = fock::ladder_moments(x.post_state().amplitudes());
      acc.a += x.probability() * l.a;
      acc.a2 += x.probability() * l.a2;
      acc.n += x.probability() * l.n;
    }
    return acc;
  };
  const auto p = average(ens.plus);
  const auto m = average(ens.minus);
  const double r = 1.0 / std::sqrt(2.0);
  fock::LadderMoments b;
  b.a = r * (p.a - m.a);
  b.a2 = 0.5 * (p.a2 - 2.0 * p.a * m.a + m.a2);
  b.n = 0.5 * (p.n + m.n - 2.0 * (std::conj(p.a) * m.a).real());
  return detail::from_ladder(b, params, ens.tail_bound);
}

}  // namespace causal_probe::oscillator
