#include <gtest/gtest.h>

#include <random>

#include "causal_probe/quantum_core.hpp"
#include "test_support.hpp"

using namespace causal_probe;
using test_support::max_abs;

namespace {

// Dense Σ_i P_i ρ P_i from explicit projector matrices.
CMatrix dense_luders(const MeasurementScheme& s, const CMatrix& rho) {
  CMatrix out = CMatrix::Zero(rho.rows(), rho.cols());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const CMatrix p = s.projector(i).matrix();
    out += p * rho * p;
  }
  return out;
}

// Tr_B of a d_A*d_B square matrix, by explicit index sums.
CMatrix trace_out_second(const CMatrix& m, Eigen::Index da, Eigen::Index db) {
  CMatrix r = CMatrix::Zero(da, da);
  for (Eigen::Index i = 0; i < da; ++i)
    for (Eigen::Index j = 0; j < da; ++j)
      for (Eigen::Index k = 0; k < db; ++k) r(i, j) += m(i * db + k, j * db + k);
  return r;
}

}  // namespace

TEST(StateVector, RejectsWrongAmplitudeCount) {
  EXPECT_THROW(StateVector({2, 2}, CVector::Zero(3)), InvalidArgument);
  EXPECT_THROW(StateVector({}, CVector::Zero(1)), InvalidArgument);
}

TEST(StateVector, NormalizingZeroVectorThrows) {
  const StateVector z({2}, CVector::Zero(2));
  EXPECT_THROW(z.normalized(), ZeroBranchError);
}

TEST(Operator, HermitianFlagIsChecked) {
  CMatrix m(2, 2);
  m << 0, 1, 0, 0;
  EXPECT_THROW(Operator({2}, m, true), InvalidArgument);
  EXPECT_NO_THROW(Operator({2}, m, false));
}

TEST(Tensor, RowMajorOrdering) {
  const auto s = tensor_state({StateVector::basis({2}, 0), StateVector::basis({3}, 2)});
  EXPECT_EQ(s.dims(), (Dims{2, 3}));
  EXPECT_EQ(s[2], cplx(1.0));
  EXPECT_EQ(ravel({1, 2}, {2, 3}), 5u);
  EXPECT_EQ(unravel(5, {2, 3}), (std::vector<std::size_t>{1, 2}));
}

TEST(Tensor, KronMatchesIndexFormula) {
  std::mt19937_64 rng(11);
  const CMatrix a = test_support::random_matrix(rng, 2, 3);
  const CMatrix b = test_support::random_matrix(rng, 3, 2);
  const CMatrix k = kron(a, b);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j)
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 2; ++c) EXPECT_EQ(k(i * 3 + r, j * 2 + c), a(i, j) * b(r, c));
}

TEST(Tensor, EmbedLocalAndApplyLocalAgreeWithKron) {
  std::mt19937_64 rng(12);
  const CMatrix u = test_support::random_unitary(rng, 3);
  const CVector psi = test_support::random_vector(rng, 12);
  const StateVector s({2, 3, 2}, psi);
  const CMatrix expected = kron(kron(CMatrix::Identity(2, 2), u), CMatrix::Identity(2, 2));
  EXPECT_LT(max_abs(embed_local(Operator({3}, u), 1, {2, 3, 2}).matrix() - expected), 1e-15);
  EXPECT_LT(max_abs(apply_local(s, u, 1).amplitudes() - expected * psi), 1e-14);
}

TEST(Born, ProbabilitiesAndZeroBranches) {
  const auto s = tensor_state({StateVector::basis({2}, 0), StateVector::basis({2}, 1)});
  const auto scheme = MeasurementScheme::from_vectors(
      {2, 2}, {{"00", CVector::Unit(4, 0)}, {"01", CVector::Unit(4, 1)}, {"10", CVector::Unit(4, 2)},
               {"11", CVector::Unit(4, 3)}});
  const auto ens = born_ensemble(scheme, s);
  EXPECT_DOUBLE_EQ(ens.total_probability(), 1.0);
  EXPECT_DOUBLE_EQ(ens.find("01").probability(), 1.0);
  EXPECT_TRUE(ens.find("00").zero_branch());
  EXPECT_THROW(ens.find("00").post_state(), ZeroBranchError);
  EXPECT_THROW(ens.find("nope"), InvalidArgument);
}

TEST(Born, UnnormalizedStateRejected) {
  const StateVector s({2}, CVector::Ones(2));
  EXPECT_THROW(born_ensemble(identity_scheme({2}), s), InvalidArgument);
}

TEST(Qndsv, YesBranchLeavesTargetIntact) {
  std::mt19937_64 rng(3);
  const StateVector t({4}, test_support::random_vector(rng, 4));
  const auto scheme = qndsv_scheme(t);
  const auto ens = born_ensemble(scheme, t);
  EXPECT_NEAR(ens.find("yes").probability(), 1.0, 1e-14);
  EXPECT_TRUE(same_ray(ens.find("yes").post_state(), t));
  EXPECT_TRUE(ens.find("no").zero_branch());
}

TEST(Qndsv, ComplementProjectorMatchesDenseFormula) {
  std::mt19937_64 rng(4);
  const CVector t = test_support::random_vector(rng, 6);
  const CVector psi = test_support::random_vector(rng, 6);
  const auto scheme = qndsv_scheme(StateVector({6}, t));
  const CMatrix p_no = CMatrix::Identity(6, 6) - t * t.adjoint();
  EXPECT_LT(max_abs(scheme.projector(1).matrix() - p_no), 1e-14);
  EXPECT_LT(max_abs(scheme.project(1, psi) - p_no * psi), 1e-14);
  EXPECT_EQ(scheme.outcome(1).rank(), 5u);
  const CMatrix v = scheme.explicit_range(1);
  EXPECT_EQ(v.cols(), 5);
  EXPECT_LT(max_abs(v.adjoint() * v - CMatrix::Identity(5, 5)), 1e-14);
  EXPECT_LT(max_abs(v * v.adjoint() - p_no), 1e-14);
}

TEST(Validate, CompleteSchemesPass) {
  std::mt19937_64 rng(5);
  const CMatrix u = test_support::random_unitary(rng, 5);
  std::vector<std::pair<std::string, CVector>> vecs;
  for (int i = 0; i < 5; ++i) vecs.emplace_back(std::to_string(i), u.col(i));
  EXPECT_LT(validate_scheme(MeasurementScheme::from_vectors({5}, vecs)).worst(), 1e-12);
  EXPECT_LT(validate_scheme(qndsv_scheme(StateVector({5}, u.col(0)))).worst(), 1e-12);
  EXPECT_LT(validate_scheme(identity_scheme({5})).worst(), 1e-12);
}

TEST(Validate, DetectsIncompleteNonOrthogonalAndNonIdempotent) {
  const auto incomplete = MeasurementScheme::from_vectors({3}, {{"a", CVector::Unit(3, 0)}});
  EXPECT_GE(validate_scheme(incomplete).completeness, 1.0);

  CVector skew(3);
  skew << 1, 1, 0;
  const auto overlap = MeasurementScheme::from_vectors(
      {3}, {{"a", CVector::Unit(3, 0)}, {"b", skew}, {"c", CVector::Unit(3, 2)}});
  EXPECT_NEAR(validate_scheme(overlap).orthogonality, 1.0 / std::sqrt(2.0), 1e-12);

  CMatrix almost = CMatrix::Zero(2, 2);
  almost(0, 0) = 0.9;
  CMatrix rest = CMatrix::Zero(2, 2);
  rest(1, 1) = 1.0;
  const auto dense = MeasurementScheme::from_projectors(
      {2}, {{"a", Operator({2}, almost, true)}, {"b", Operator({2}, rest, true)}});
  EXPECT_NEAR(validate_scheme(dense).idempotence, 0.09, 1e-12);
}

TEST(Validate, FromProjectorsRecoversRanges) {
  std::mt19937_64 rng(6);
  const CMatrix u = test_support::random_unitary(rng, 4);
  const CMatrix p1 = u.leftCols(2) * u.leftCols(2).adjoint();
  const CMatrix p2 = u.rightCols(2) * u.rightCols(2).adjoint();
  const auto s = MeasurementScheme::from_projectors(
      {4}, {{"a", Operator({4}, 0.5 * (p1 + p1.adjoint()), true)},
            {"b", Operator({4}, 0.5 * (p2 + p2.adjoint()), true)}});
  EXPECT_EQ(s.outcome(0).rank(), 2u);
  EXPECT_LT(max_abs(s.projector(0).matrix() - p1), 1e-12);
  EXPECT_LT(validate_scheme(s).worst(), 1e-12);
}

TEST(Ensemble, PostMeasurementExpectationMatchesDenseLuders) {
  std::mt19937_64 rng(7);
  const CVector psi = test_support::random_vector(rng, 6);
  const CMatrix h = test_support::random_hermitian(rng, 6);
  const CMatrix u = test_support::random_unitary(rng, 6);
  CMatrix r1 = u.leftCols(1), r2 = u.middleCols(1, 3), r3 = u.rightCols(2);
  const MeasurementScheme s({6}, {{"a", r1}, {"b", r2}, {"c", r3}}, SchemeKind::luders);
  const StateVector state({6}, psi);
  const Operator obs({6}, h, true);
  const double dense = (dense_luders(s, psi * psi.adjoint()) * h).trace().real();
  EXPECT_NEAR(post_measurement_expectation(state, s, obs), dense, 1e-13);
  EXPECT_NEAR(ensemble_expectation(born_ensemble(s, state), obs), dense, 1e-13);
}

TEST(Ensemble, NonHermitianObservableRejected) {
  CMatrix m(2, 2);
  m << 0, 1, 0, 0;
  EXPECT_THROW(post_measurement_expectation(StateVector::basis({2}, 0), identity_scheme({2}), Operator({2}, m)),
               InvalidArgument);
}

TEST(Embed, SchemeOnSubsystemMatchesKronProjectors) {
  std::mt19937_64 rng(8);
  const CMatrix u = test_support::random_unitary(rng, 3);
  std::vector<std::pair<std::string, CVector>> vecs;
  for (int i = 0; i < 3; ++i) vecs.emplace_back(std::to_string(i), u.col(i));
  const auto local = MeasurementScheme::from_vectors({3}, vecs);
  const Dims dims{2, 3, 2};
  const auto lifted = embed_scheme(local, {1}, dims);
  EXPECT_EQ(lifted.kind(), SchemeKind::luders);
  for (std::size_t i = 0; i < 3; ++i) {
    const CMatrix expected =
        kron(kron(CMatrix::Identity(2, 2), u.col(i) * u.col(i).adjoint()), CMatrix::Identity(2, 2));
    EXPECT_LT(max_abs(lifted.projector(i).matrix() - expected), 1e-14);
  }
  EXPECT_LT(validate_scheme(lifted).worst(), 1e-12);
}

TEST(Embed, SlotOrderIsRespected) {
  // Outcome |0>|1> on slots (2, 0) means subsystem 2 in 0 and subsystem 0 in 1.
  const auto local = MeasurementScheme::from_vectors({2, 2}, {{"x", CVector::Unit(4, 1)}});
  const auto lifted = embed_scheme(local, {2, 0}, {2, 2, 2});
  const auto idx = ravel({1, 1, 0}, {2, 2, 2});
  const CVector psi = CVector::Unit(8, static_cast<Eigen::Index>(idx));
  EXPECT_NEAR(lifted.project(0, psi).norm(), 1.0, 1e-15);
  EXPECT_THROW(embed_scheme(local, {0, 0}, {2, 2, 2}), InvalidArgument);
}

TEST(PartialTrace, MatchesIndexSums) {
  std::mt19937_64 rng(9);
  const CMatrix m = test_support::random_matrix(rng, 6, 6);
  const Operator op({2, 3}, m);
  EXPECT_LT(max_abs(partial_trace(op, {0}).matrix() - trace_out_second(m, 2, 3)), 1e-14);
  // Keeping the second factor: swap roles by explicit sum.
  CMatrix rb = CMatrix::Zero(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 2; ++k) rb(i, j) += m(k * 3 + i, k * 3 + j);
  EXPECT_LT(max_abs(partial_trace(op, {1}).matrix() - rb), 1e-14);
}

TEST(PartialTrace, BellProjectorReducesToHalfIdentity) {
  CVector bell(4);
  bell << 1, 0, 0, 1;
  bell /= std::sqrt(2.0);
  const Operator p({2, 2}, bell * bell.adjoint(), true);
  EXPECT_LT(max_abs(reduced_projector(p, 1).matrix() - 0.5 * CMatrix::Identity(2, 2)), 1e-15);
  EXPECT_THROW(reduced_projector(Operator::identity({2, 2, 2}), 0), InvalidArgument);
}

TEST(SameRay, GlobalPhaseIgnored) {
  std::mt19937_64 rng(10);
  const CVector v = test_support::random_vector(rng, 3);
  EXPECT_TRUE(same_ray(StateVector({3}, v), StateVector({3}, std::polar(1.0, 0.7) * v)));
  EXPECT_FALSE(same_ray(StateVector({3}, v), StateVector({3}, test_support::random_vector(rng, 3))));
}
