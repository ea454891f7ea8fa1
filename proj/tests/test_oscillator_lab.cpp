#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <vector>

#include "causal_probe/harness.hpp"
#include "causal_probe/oscillator_lab.hpp"
#include "test_support.hpp"

using namespace causal_probe;
using namespace causal_probe::oscillator;
using test_support::max_abs;

namespace {

// Dense P_B = i sqrt(ħmΩ/2)(a_B† - a_B) on the ± mode space, a_B = (a_+ - a_-)/sqrt(2).
Operator dense_PB(const OscParams& o, std::size_t d0, std::size_t d1) {
  const CMatrix ap = kron(fock::lowering(d0), CMatrix::Identity(d1, d1));
  const CMatrix am = kron(CMatrix::Identity(d0, d0), fock::lowering(d1));
  const CMatrix ab = (ap - am) / std::sqrt(2.0);
  const CMatrix p = cplx(0.0, std::sqrt(o.hbar * o.mass * o.omega / 2.0)) * (ab.adjoint() - ab);
  return Operator({d0, d1}, p, true);
}

}  // namespace

TEST(Fock, CoherentMatchesDisplacementExponential) {
  const std::size_t big = 80;
  const CMatrix a = fock::lowering(big);
  for (cplx alpha : {cplx(0.3, 0.0), cplx(0.0, 1.2), cplx(-0.7, 0.5)}) {
    const CMatrix gen = alpha * a.adjoint() - std::conj(alpha) * a;
    const CMatrix d = gen.exp();
    const CVector ref = d.col(0).head(20);
    EXPECT_LT(max_abs(fock::coherent(alpha, 20) - ref), 1e-12) << alpha;
  }
}

TEST(Fock, LadderMomentsOfCoherentState) {
  const cplx alpha(0.4, -0.9);
  const auto m = fock::ladder_moments(fock::coherent(alpha, 60));
  EXPECT_NEAR(std::abs(m.a - alpha), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(m.a2 - alpha * alpha), 0.0, 1e-12);
  EXPECT_NEAR(m.n, std::norm(alpha), 1e-12);
}

TEST(Fock, LowerSlotMatchesKron) {
  std::mt19937_64 rng(21);
  const CVector psi = test_support::random_vector(rng, 3 * 4 * 2);
  const CMatrix a1 = kron(kron(CMatrix::Identity(3, 3), fock::lowering(4)), CMatrix::Identity(2, 2));
  EXPECT_LT(max_abs(fock::lower_slot(psi, {3, 4, 2}, 1) - a1 * psi), 1e-15);
}

TEST(Beamsplitter, BlocksAreOrthogonalInvolutions) {
  const auto blocks = beamsplitter_blocks(12);
  ASSERT_EQ(blocks.size(), 13u);
  for (std::size_t n = 0; n < blocks.size(); ++n) {
    const auto& b = blocks[n];
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(b.rows(), b.cols());
    EXPECT_LT((b * b.transpose() - id).cwiseAbs().maxCoeff(), 1e-13) << n;
    EXPECT_LT((b * b - id).cwiseAbs().maxCoeff(), 1e-13) << n;
  }
}

TEST(Beamsplitter, MapsKickedProductToPlusMinusCoherentStates) {
  const OscParams o{1.3, 0.8, 1.0};
  const KickParams k{0.2, -0.1, 0.35};
  const auto ab = coherent_prestate(o, k, 30, FockBasis::AB);
  const auto pm = coherent_prestate(o, k, 30, FockBasis::PM);
  EXPECT_LT(max_abs(ab_to_pm(ab).amplitudes() - pm.amplitudes()), 1e-12);
  EXPECT_LT(max_abs(pm_to_ab(pm).amplitudes() - ab.amplitudes()), 1e-12);
  EXPECT_THROW(ab_to_pm(pm), InvalidArgument);
}

TEST(Prestate, MomentsOfBobBeforeMeasurement) {
  const OscParams o{1.0, 1.0, 1.0};
  const KickParams k{0.3, 0.1, 0.5};
  const auto m = local_moments_B(coherent_prestate(o, k, 40));
  EXPECT_NEAR(m.p, k.p_B, 1e-12);
  EXPECT_NEAR(m.q, 0.0, 1e-12);
  EXPECT_NEAR(m.q2, 0.5, 1e-12);
}

TEST(Prestate, TruncationTooSmallThrows) {
  EXPECT_THROW(coherent_prestate({}, {0.0, 0.0, 8.0}, 5), TruncationError);
}

TEST(Separable, EntangledStateRejected) {
  CMatrix amps = CMatrix::Zero(3, 3);
  amps(0, 1) = amps(1, 0) = 1.0 / std::sqrt(2.0);
  const TwoModeFock ent({}, amps, FockBasis::PM, 0.0);
  EXPECT_THROW(separable_factors(ent), InvalidArgument);
  EXPECT_THROW(naive_Nplus_ensemble(ent), InvalidArgument);
}

TEST(Naive, BobMomentumAfterNumberMeasurement) {
  const OscParams o{1.0, 1.0, 1.0};
  for (double lambda = -1.0; lambda <= 1.0 + 1e-12; lambda += 0.25) {
    const KickParams k{0.3, -0.2, lambda};
    const auto ens = naive_Nplus_ensemble(coherent_prestate(o, k, 40));
    EXPECT_LE(ens.tail_bound, 1e-8);
    const auto m = local_moments_B(ens, o);
    EXPECT_NEAR(m.p, -(k.p_A - k.p_B + lambda) / 2.0, 1e-8) << lambda;
  }
}

TEST(Naive, SlicedEnsembleMatchesDenseEmbeddedScheme) {
  const OscParams o{0.7, 1.4, 1.1};
  const KickParams k{0.1, 0.2, 0.4};
  const auto pre = coherent_prestate(o, k, 16);
  const auto sliced = naive_Nplus_ensemble(pre);
  const auto scheme = embed_scheme(number_scheme(16), {0}, {16, 16});
  const auto dense = born_ensemble(scheme, pre.to_state());
  ASSERT_EQ(dense.entries.size(), sliced.entries.size());
  for (std::size_t i = 0; i < dense.entries.size(); ++i)
    EXPECT_NEAR(dense.entries[i].probability(), sliced.entries[i].probability(), 1e-14);
  const double ref = post_measurement_expectation(pre.to_state(), scheme, dense_PB(o, 16, 16));
  EXPECT_NEAR(local_moments_B(sliced, o).p, ref, 1e-12);
}

TEST(Phase, StatesAreOrthonormalAndSchemeComplete) {
  for (int s_cut : {2, 4, 8}) {
    const auto s = phase_scheme_minus(s_cut, static_cast<std::size_t>(2 * s_cut + 6));
    EXPECT_LT(validate_scheme(s).worst(), 1e-12) << s_cut;
  }
  EXPECT_LT(validate_scheme(phase_scheme_Nplus(2, 4, 6)).worst(), 1e-12);
  EXPECT_THROW(phase_state(0, 0, 3, 20), InvalidArgument);
  EXPECT_THROW(phase_scheme_minus(4, 8), InvalidArgument);
}

TEST(Phase, CoefficientMatchesProjection) {
  const OscParams o{1.0, 1.0, 1.0};
  for (int s_cut : {2, 8, 16}) {
    for (double lambda : {-1.0, 0.4, 1.0}) {
      const KickParams k{0.5, -0.3, lambda};
      ASSERT_LE(std::abs(k.Lambda_plus(o)), 1.5);
      ASSERT_LE(std::abs(k.Lambda_minus(o)), 1.5);
      const auto pre = coherent_prestate(o, k, 40);
      const CMatrix& amps = pre.amplitudes();
      for (int n : {0, 1, 3})
        for (int b : {0, 1})
          for (int s = 0; s <= s_cut; s += std::max(1, s_cut / 4)) {
            const CVector chi = phase_state(b, s, s_cut, 40);
            const cplx numeric = chi.dot(amps.row(n).transpose());
            const cplx closed = phase_coefficient(n, b, s, s_cut, k.Lambda_plus(o), k.Lambda_minus(o));
            EXPECT_LT(std::abs(numeric - closed), 1e-8) << s_cut << " " << n << " " << b << " " << s;
          }
    }
  }
}

TEST(Phase, FactorizedEnsembleMatchesDenseBorn) {
  const OscParams o{1.0, 1.0, 1.0};
  const KickParams k{0.1, 0.05, 0.2};
  const int s_cut = 2;
  const auto pre = coherent_prestate(o, k, 8);
  const auto prod = phase_ensemble(pre, s_cut);
  const auto dense = born_ensemble(phase_scheme_Nplus(s_cut, 8, 8), pre.to_state());
  ASSERT_EQ(dense.entries.size(), prod.plus.entries.size() * prod.minus.entries.size());
  std::size_t i = 0;
  for (const auto& p : prod.plus.entries)
    for (const auto& m : prod.minus.entries)
      EXPECT_NEAR(dense.entries[i++].probability(), p.probability() * m.probability(), 1e-14);
  const auto a = local_moments_B(dense, o);
  const auto b = local_moments_B(prod, o);
  EXPECT_NEAR(a.q, b.q, 1e-12);
  EXPECT_NEAR(a.p, b.p, 1e-12);
  EXPECT_NEAR(a.q2, b.q2, 1e-12);
  EXPECT_NEAR(a.p2, b.p2, 1e-12);
}

TEST(Phase, FirstMomentsDoNotDependOnKick) {
  const OscParams o{1.0, 1.0, 1.0};
  auto moments = [&](double lambda) {
    return local_moments_B(phase_ensemble(coherent_prestate(o, {0.3, -0.2, lambda}, 40), 16), o);
  };
  const double h = 1e-3;
  for (double lambda : {-0.5, 0.0, 0.5}) {
    const auto up = moments(lambda + h), dn = moments(lambda - h);
    EXPECT_LE(std::abs(up.q - dn.q) / (2 * h), 1e-6);
    EXPECT_LE(std::abs(up.p - dn.p) / (2 * h), 1e-6);
  }
}

TEST(Phase, SecondMomentGrowsLinearlyWithCut) {
  const OscParams o{1.0, 1.0, 1.0};
  std::vector<double> xs, ys;
  for (int s_cut : {4, 8, 16, 32}) {
    const auto m = local_moments_B(phase_ensemble(coherent_prestate(o, {0.0, 0.0, 0.3}, 40), s_cut), o);
    xs.push_back(s_cut);
    ys.push_back(m.q2);
  }
  const auto fit = harness::least_squares(xs, ys);
  EXPECT_GT(fit.r2, 0.99);
  EXPECT_GT(fit.slope, 0.0);
  EXPECT_TRUE(std::is_sorted(ys.begin(), ys.end()));
}
