#pragma once

// Finite-dimensional Hilbert-space engine: states, operators, tensor
// embedding, Born rule, post-measurement ensembles, state-verification
// schemes and scheme diagnostics.
//
// Composite spaces are row-major over subsystem indices: for dims
// {d0, d1, ...} the basis index of (i0, i1, ...) is ((i0*d1 + i1)*d2 + ...).

#include <algorithm>
#include <complex>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "causal_probe/policy.hpp"

namespace causal_probe {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using Dims = std::vector<std::size_t>;

inline std::size_t total_dim(const Dims& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string dims_string(const Dims& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

namespace detail {

inline void require_dims(const Dims& dims) {
  if (dims.empty()) throw InvalidArgument("empty dimension list");
  for (auto d : dims)
    if (d == 0) throw InvalidArgument("subsystem dimension must be positive");
}

inline double max_abs(const CMatrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

// Largest singular value.
inline double spectral_norm(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1 && m.cols() == 1) return std::abs(m(0, 0));
  Eigen::JacobiSVD<CMatrix> svd(m);
  return svd.singularValues()(0);
}

}  // namespace detail

class StateVector {
 public:
  StateVector(Dims dims, CVector amplitudes)
      : dims_(std::move(dims)), amps_(std::move(amplitudes)) {
    detail::require_dims(dims_);
    if (static_cast<std::size_t>(amps_.size()) != total_dim(dims_))
      throw InvalidArgument("amplitude count " + std::to_string(amps_.size()) +
                            " does not match dims " + dims_string(dims_));
    norm_ = amps_.norm();
  }

  static StateVector basis(Dims dims, std::size_t index) {
    CVector v = CVector::Zero(static_cast<Eigen::Index>(total_dim(dims)));
    if (index >= static_cast<std::size_t>(v.size()))
      throw InvalidArgument("basis index out of range");
    v(static_cast<Eigen::Index>(index)) = 1.0;
    return StateVector(std::move(dims), std::move(v));
  }

  const Dims& dims() const { return dims_; }
  const CVector& amplitudes() const { return amps_; }
  std::size_t size() const { return static_cast<std::size_t>(amps_.size()); }
  double norm() const { return norm_; }
  cplx operator[](std::size_t i) const { return amps_(static_cast<Eigen::Index>(i)); }

  bool is_normalized(double tol = numeric_policy().exact_tol) const {
    return std::abs(norm_ - 1.0) <= tol;
  }

  StateVector normalized() const {
    if (norm_ <= 0.0) throw ZeroBranchError("cannot normalize a zero vector");
    return StateVector(dims_, amps_ / norm_);
  }

  cplx inner(const StateVector& other) const {
    if (other.dims_ != dims_) throw InvalidArgument("inner product dimension mismatch");
    return amps_.dot(other.amps_);
  }

 private:
  Dims dims_;
  CVector amps_;
  double norm_ = 0.0;
};

class Operator {
 public:
  Operator(Dims dims, CMatrix matrix, bool hermitian = false)
      : dims_(std::move(dims)), m_(std::move(matrix)), hermitian_(hermitian) {
    detail::require_dims(dims_);
    const auto n = static_cast<Eigen::Index>(total_dim(dims_));
    if (m_.rows() != n || m_.cols() != n)
      throw InvalidArgument("operator side does not match dims " + dims_string(dims_));
    if (hermitian_ &&
        detail::max_abs(m_ - m_.adjoint()) > numeric_policy().exact_tol)
      throw InvalidArgument("operator flagged hermitian but M != M^dagger");
  }

  static Operator identity(Dims dims) {
    const auto n = static_cast<Eigen::Index>(total_dim(dims));
    return Operator(std::move(dims), CMatrix::Identity(n, n), true);
  }

  const Dims& dims() const { return dims_; }
  const CMatrix& matrix() const { return m_; }
  bool is_hermitian() const { return hermitian_; }
  std::size_t size() const { return static_cast<std::size_t>(m_.rows()); }

  StateVector apply(const StateVector& s) const {
    if (s.dims() != dims_) throw InvalidArgument("operator/state dimension mismatch");
    return StateVector(dims_, m_ * s.amplitudes());
  }

  // Re⟨ψ|O|ψ⟩; exact for hermitian O.
  double expectation(const StateVector& s) const {
    if (s.dims() != dims_) throw InvalidArgument("operator/state dimension mismatch");
    return s.amplitudes().dot(m_ * s.amplitudes()).real();
  }

 private:
  Dims dims_;
  CMatrix m_;
  bool hermitian_ = false;
};

inline Operator operator*(const Operator& a, const Operator& b) {
  if (a.dims() != b.dims()) throw InvalidArgument("operator product dimension mismatch");
  CMatrix m = a.matrix() * b.matrix();
  return Operator(a.dims(), std::move(m));
}

inline Operator hermitian_sum(const Operator& a, const Operator& b, double wa = 1.0,
                              double wb = 1.0) {
  if (a.dims() != b.dims()) throw InvalidArgument("operator sum dimension mismatch");
  return Operator(a.dims(), wa * a.matrix() + wb * b.matrix(),
                  a.is_hermitian() && b.is_hermitian());
}

enum class SchemeKind { complete_orthogonal, qndsv, luders };

inline const char* to_string(SchemeKind k) {
  switch (k) {
    case SchemeKind::complete_orthogonal: return "complete-orthogonal";
    case SchemeKind::qndsv: return "qndsv";
    case SchemeKind::luders: return "luders";
  }
  return "?";
}

// Ordered family of outcome-labelled projectors. Each projector is held as
// an orthonormal basis of its range (P = V V^dagger); dense matrices are
// produced on demand by projector().
class MeasurementScheme {
 public:
  // P = V V^† with V = range, or P = 1 - V V^† when complement is set
  // (used for the "no" branch of state verification).
  struct Outcome {
    std::string label;
    CMatrix range;  // total_dim x cols, orthonormal columns
    bool complement = false;

    std::size_t rank() const {
      const auto c = static_cast<std::size_t>(range.cols());
      return complement ? static_cast<std::size_t>(range.rows()) - c : c;
    }
  };

  MeasurementScheme(Dims dims, std::vector<Outcome> outcomes, SchemeKind kind)
      : dims_(std::move(dims)), outcomes_(std::move(outcomes)), kind_(kind) {
    detail::require_dims(dims_);
    const auto n = static_cast<Eigen::Index>(total_dim(dims_));
    for (const auto& o : outcomes_)
      if (o.range.rows() != n)
        throw InvalidArgument("outcome '" + o.label + "' has wrong row count");
  }

  // Rank-1 outcomes |v><v|; vectors are normalized here.
  static MeasurementScheme from_vectors(
      Dims dims, const std::vector<std::pair<std::string, CVector>>& vectors,
      SchemeKind kind = SchemeKind::complete_orthogonal) {
    std::vector<Outcome> out;
    out.reserve(vectors.size());
    for (const auto& [label, v] : vectors) {
      const double n = v.norm();
      if (n <= 0.0) throw InvalidArgument("zero vector for outcome '" + label + "'");
      out.push_back({label, CMatrix(v / n)});
    }
    return MeasurementScheme(std::move(dims), std::move(out), kind);
  }

  // Dense projector input. The range is recovered from the eigenvectors of
  // the hermitian part with eigenvalue above 1/2; departures of the input
  // from P^2 = P = P^dagger are kept for validate_scheme.
  static MeasurementScheme from_projectors(
      Dims dims, const std::vector<std::pair<std::string, Operator>>& projectors,
      SchemeKind kind = SchemeKind::luders) {
    std::vector<Outcome> out;
    double idem = 0.0, herm = 0.0;
    for (const auto& [label, p] : projectors) {
      if (p.dims() != dims) throw InvalidArgument("projector dims mismatch for '" + label + "'");
      const CMatrix& m = p.matrix();
      idem = std::max(idem, detail::spectral_norm(m * m - m));
      herm = std::max(herm, detail::spectral_norm(m - m.adjoint()));
      const CMatrix hpart = 0.5 * (m + m.adjoint());
      Eigen::SelfAdjointEigenSolver<CMatrix> es(hpart);
      std::vector<Eigen::Index> keep;
      for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        if (es.eigenvalues()(i) > 0.5) keep.push_back(i);
      CMatrix range(m.rows(), static_cast<Eigen::Index>(keep.size()));
      for (std::size_t c = 0; c < keep.size(); ++c)
        range.col(static_cast<Eigen::Index>(c)) = es.eigenvectors().col(keep[c]);
      out.push_back({label, std::move(range)});
    }
    MeasurementScheme s(std::move(dims), std::move(out), kind);
    s.input_idempotence_ = idem;
    s.input_hermiticity_ = herm;
    return s;
  }

  const Dims& dims() const { return dims_; }
  const std::vector<Outcome>& outcomes() const { return outcomes_; }
  const Outcome& outcome(std::size_t i) const { return outcomes_.at(i); }
  std::size_t size() const { return outcomes_.size(); }
  SchemeKind kind() const { return kind_; }

  Operator projector(std::size_t i) const {
    const auto& o = outcomes_.at(i);
    CMatrix p = o.range * o.range.adjoint();
    if (o.complement) p = CMatrix::Identity(p.rows(), p.cols()) - p;
    return Operator(dims_, std::move(p), true);
  }

  // P_i |psi>, unnormalized.
  CVector project(std::size_t i, const CVector& psi) const {
    const auto& o = outcomes_.at(i);
    CVector r = o.range * (o.range.adjoint() * psi);
    if (o.complement) return psi - r;
    return r;
  }

  // Orthonormal basis of the range of P_i, materializing complements.
  CMatrix explicit_range(std::size_t i) const {
    const auto& o = outcomes_.at(i);
    if (!o.complement) return o.range;
    const auto n = o.range.rows();
    const auto c = o.range.cols();
    if (c == 0) return CMatrix::Identity(n, n);
    Eigen::HouseholderQR<CMatrix> qr(o.range);
    const CMatrix q = qr.householderQ() * CMatrix::Identity(n, n);
    return q.rightCols(n - c);
  }

  double input_idempotence_deviation() const { return input_idempotence_; }
  double input_hermiticity_deviation() const { return input_hermiticity_; }

 private:
  Dims dims_;
  std::vector<Outcome> outcomes_;
  SchemeKind kind_;
  double input_idempotence_ = 0.0;
  double input_hermiticity_ = 0.0;
};

class EnsembleEntry {
 public:
  EnsembleEntry(std::string label, double probability, std::optional<StateVector> post)
      : label_(std::move(label)), probability_(probability), post_(std::move(post)) {}

  const std::string& label() const { return label_; }
  double probability() const { return probability_; }
  bool zero_branch() const { return !post_.has_value(); }

  const StateVector& post_state() const {
    if (!post_) throw ZeroBranchError("outcome '" + label_ + "' has probability zero");
    return *post_;
  }

 private:
  std::string label_;
  double probability_;
  std::optional<StateVector> post_;
};

struct OutcomeEnsemble {
  std::vector<EnsembleEntry> entries;
  double tail_bound = 0.0;  // norm missing because of a truncated space

  double total_probability() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.probability();
    return s;
  }

  const EnsembleEntry& find(const std::string& label) const {
    for (const auto& e : entries)
      if (e.label() == label) return e;
    throw InvalidArgument("no outcome labelled '" + label + "'");
  }
};

struct SchemeDiagnostics {
  double idempotence = 0.0;    // max_i ||V_i^† V_i - 1||, or dense input ||P^2 - P||
  double hermiticity = 0.0;    // dense input ||P - P^†|| (zero for range-built schemes)
  double orthogonality = 0.0;  // max_{i<j} ||V_i^† V_j||
  double completeness = 0.0;   // ||sum_i P_i - 1||

  double worst() const {
    return std::max({idempotence, hermiticity, orthogonality, completeness});
  }
};

// ---------------------------------------------------------------- operations

inline StateVector tensor_state(std::span<const StateVector> factors) {
  if (factors.empty()) throw InvalidArgument("tensor_state needs at least one factor");
  for (const auto& f : factors)
    if (!f.is_normalized(numeric_policy().structural_tol))
      throw InvalidArgument("tensor_state factors must be normalized");
  Dims dims;
  CVector acc = CVector::Ones(1);
  for (const auto& f : factors) {
    dims.insert(dims.end(), f.dims().begin(), f.dims().end());
    const auto& b = f.amplitudes();
    CVector next(acc.size() * b.size());
    for (Eigen::Index i = 0; i < acc.size(); ++i)
      next.segment(i * b.size(), b.size()) = acc(i) * b;
    acc = std::move(next);
  }
  return StateVector(std::move(dims), std::move(acc));
}

inline StateVector tensor_state(std::initializer_list<StateVector> factors) {
  std::vector<StateVector> v(factors);
  return tensor_state(std::span<const StateVector>(v));
}

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Operator embed_local(const Operator& op, std::size_t slot, const Dims& dims) {
  detail::require_dims(dims);
  if (slot >= dims.size())
    throw InvalidArgument("slot " + std::to_string(slot) + " out of range for dims " +
                          dims_string(dims));
  if (op.dims() != Dims{dims[slot]})
    throw InvalidArgument("operator dims do not match subsystem " + std::to_string(slot));
  Dims before(dims.begin(), dims.begin() + static_cast<std::ptrdiff_t>(slot));
  Dims after(dims.begin() + static_cast<std::ptrdiff_t>(slot) + 1, dims.end());
  const auto nb = static_cast<Eigen::Index>(total_dim(before));
  const auto na = static_cast<Eigen::Index>(total_dim(after));
  CMatrix m = kron(kron(CMatrix::Identity(nb, nb), op.matrix()), CMatrix::Identity(na, na));
  return Operator(dims, std::move(m), op.is_hermitian());
}

// Row-major multi-index helpers.
inline std::vector<std::size_t> unravel(std::size_t index, const Dims& dims) {
  std::vector<std::size_t> idx(dims.size());
  for (std::size_t k = dims.size(); k-- > 0;) {
    idx[k] = index % dims[k];
    index /= dims[k];
  }
  return idx;
}

inline std::size_t ravel(const std::vector<std::size_t>& idx, const Dims& dims) {
  std::size_t r = 0;
  for (std::size_t k = 0; k < dims.size(); ++k) r = r * dims[k] + idx[k];
  return r;
}

// Lifts a scheme acting on the subsystems `slots` (in that order) to the
// full space `dims`: every outcome range V becomes V ⊗ 1_rest. The result
// is a Lüders-type scheme.
inline MeasurementScheme embed_scheme(const MeasurementScheme& scheme,
                                      const std::vector<std::size_t>& slots,
                                      const Dims& dims) {
  detail::require_dims(dims);
  Dims sub;
  std::vector<bool> used(dims.size(), false);
  for (auto s : slots) {
    if (s >= dims.size() || used[s]) throw InvalidArgument("invalid slot list for embed_scheme");
    used[s] = true;
    sub.push_back(dims[s]);
  }
  if (sub != scheme.dims()) throw InvalidArgument("scheme dims do not match the selected slots");
  Dims rest;
  std::vector<std::size_t> rest_slots;
  for (std::size_t k = 0; k < dims.size(); ++k)
    if (!used[k]) {
      rest.push_back(dims[k]);
      rest_slots.push_back(k);
    }
  const std::size_t nrest = rest.empty() ? 1 : total_dim(rest);
  const auto n = static_cast<Eigen::Index>(total_dim(dims));

  std::vector<MeasurementScheme::Outcome> out;
  out.reserve(scheme.size());
  std::vector<std::size_t> full(dims.size());
  for (const auto& o : scheme.outcomes()) {
    const auto cols = static_cast<std::size_t>(o.range.cols());
    CMatrix range = CMatrix::Zero(n, static_cast<Eigen::Index>(cols * nrest));
    for (std::size_t r = 0; r < nrest; ++r) {
      const auto ridx = rest.empty() ? std::vector<std::size_t>{} : unravel(r, rest);
      for (std::size_t k = 0; k < rest_slots.size(); ++k) full[rest_slots[k]] = ridx[k];
      for (std::size_t si = 0; si < total_dim(sub); ++si) {
        const auto sidx = unravel(si, sub);
        for (std::size_t k = 0; k < slots.size(); ++k) full[slots[k]] = sidx[k];
        const auto row = static_cast<Eigen::Index>(ravel(full, dims));
        for (std::size_t c = 0; c < cols; ++c)
          range(row, static_cast<Eigen::Index>(c * nrest + r)) =
              o.range(static_cast<Eigen::Index>(si), static_cast<Eigen::Index>(c));
      }
    }
    out.push_back({o.label, std::move(range), o.complement});
  }
  return MeasurementScheme(dims, std::move(out), SchemeKind::luders);
}

inline OutcomeEnsemble born_ensemble(const MeasurementScheme& scheme, const StateVector& state) {
  if (state.dims() != scheme.dims()) throw InvalidArgument("scheme/state dimension mismatch");
  if (!state.is_normalized(numeric_policy().structural_tol))
    throw InvalidArgument("born_ensemble requires a normalized state");
  OutcomeEnsemble ens;
  ens.entries.reserve(scheme.size());
  for (std::size_t i = 0; i < scheme.size(); ++i) {
    CVector proj = scheme.project(i, state.amplitudes());
    const double p = proj.squaredNorm();
    const auto& label = scheme.outcome(i).label;
    if (p < numeric_policy().zero_probability) {
      ens.entries.emplace_back(label, p, std::nullopt);
    } else {
      proj /= std::sqrt(p);
      ens.entries.emplace_back(label, p, StateVector(state.dims(), std::move(proj)));
    }
  }
  return ens;
}

// Σ_i <ψ|P_i O P_i|ψ>, the average of O over the post-measurement ensemble.
inline double post_measurement_expectation(const StateVector& state,
                                           const MeasurementScheme& scheme,
                                           const Operator& obs) {
  if (state.dims() != scheme.dims() || obs.dims() != state.dims())
    throw InvalidArgument("post_measurement_expectation dimension mismatch");
  if (!obs.is_hermitian()) throw InvalidArgument("observable must be hermitian");
  double total = 0.0;
  for (std::size_t i = 0; i < scheme.size(); ++i) {
    const CVector proj = scheme.project(i, state.amplitudes());
    total += proj.dot(obs.matrix() * proj).real();
  }
  return total;
}

// Σ_i p_i <O>_i over non-zero branches.
inline double ensemble_expectation(const OutcomeEnsemble& ens, const Operator& obs) {
  double total = 0.0;
  for (const auto& e : ens.entries)
    if (!e.zero_branch()) total += e.probability() * obs.expectation(e.post_state());
  return total;
}

inline MeasurementScheme qndsv_scheme(const StateVector& target) {
  if (target.norm() <= 0.0) throw InvalidArgument("qndsv target is the zero vector");
  if (!target.is_normalized(numeric_policy().structural_tol))
    throw InvalidArgument("qndsv target must be normalized");
  const CVector t = target.amplitudes() / target.norm();
  std::vector<MeasurementScheme::Outcome> out;
  out.push_back({"yes", CMatrix(t), false});
  out.push_back({"no", CMatrix(t), true});
  return MeasurementScheme(target.dims(), std::move(out), SchemeKind::qndsv);
}

inline MeasurementScheme identity_scheme(const Dims& dims) {
  const auto n = static_cast<Eigen::Index>(total_dim(dims));
  return MeasurementScheme(dims, {{"identity", CMatrix(n, 0), true}}, SchemeKind::luders);
}

inline SchemeDiagnostics validate_scheme(const MeasurementScheme& scheme) {
  SchemeDiagnostics d;
  d.idempotence = scheme.input_idempotence_deviation();
  d.hermiticity = scheme.input_hermiticity_deviation();
  const auto n = static_cast<Eigen::Index>(total_dim(scheme.dims()));

  std::vector<CMatrix> ranges;
  Eigen::Index r = 0;
  std::vector<Eigen::Index> offsets;
  for (std::size_t i = 0; i < scheme.size(); ++i) {
    ranges.push_back(scheme.explicit_range(i));
    offsets.push_back(r);
    r += ranges.back().cols();
  }
  CMatrix w(n, r);
  for (std::size_t i = 0; i < scheme.size(); ++i) w.middleCols(offsets[i], ranges[i].cols()) = ranges[i];

  if (r == 0) {
    d.completeness = 1.0;
    return d;
  }
  const CMatrix gram = w.adjoint() * w;
  for (std::size_t i = 0; i < scheme.size(); ++i) {
    const auto ri = ranges[i].cols();
    if (ri == 0) continue;
    const CMatrix block = gram.block(offsets[i], offsets[i], ri, ri);
    d.idempotence = std::max(
        d.idempotence, detail::spectral_norm(block - CMatrix::Identity(ri, ri)));
    for (std::size_t j = i + 1; j < scheme.size(); ++j) {
      const auto rj = ranges[j].cols();
      if (rj == 0) continue;
      d.orthogonality = std::max(
          d.orthogonality, detail::spectral_norm(gram.block(offsets[i], offsets[j], ri, rj)));
    }
  }
  // Nonzero spectrum of Σ P_i = W W^† equals the spectrum of W^† W.
  Eigen::VectorXd spec;
  if (r <= n) {
    spec = Eigen::SelfAdjointEigenSolver<CMatrix>(gram, Eigen::EigenvaluesOnly).eigenvalues();
  } else {
    const CMatrix sum = w * w.adjoint();
    spec = Eigen::SelfAdjointEigenSolver<CMatrix>(sum, Eigen::EigenvaluesOnly).eigenvalues();
  }
  for (Eigen::Index i = 0; i < spec.size(); ++i)
    d.completeness = std::max(d.completeness, std::abs(spec(i) - 1.0));
  if (r < n) d.completeness = std::max(d.completeness, 1.0);
  return d;
}

// Partial trace keeping the listed subsystems (in the order given).
inline Operator partial_trace(const Operator& op, const std::vector<std::size_t>& keep) {
  const Dims& dims = op.dims();
  Dims kept;
  std::vector<bool> is_kept(dims.size(), false);
  for (auto k : keep) {
    if (k >= dims.size() || is_kept[k]) throw InvalidArgument("invalid keep list for partial trace");
    is_kept[k] = true;
    kept.push_back(dims[k]);
  }
  Dims traced;
  std::vector<std::size_t> traced_slots;
  for (std::size_t k = 0; k < dims.size(); ++k)
    if (!is_kept[k]) {
      traced.push_back(dims[k]);
      traced_slots.push_back(k);
    }
  const std::size_t nk = total_dim(kept);
  const std::size_t nt = traced.empty() ? 1 : total_dim(traced);
  CMatrix out = CMatrix::Zero(static_cast<Eigen::Index>(nk), static_cast<Eigen::Index>(nk));
  std::vector<std::size_t> fi(dims.size()), fj(dims.size());
  for (std::size_t t = 0; t < nt; ++t) {
    const auto tidx = traced.empty() ? std::vector<std::size_t>{} : unravel(t, traced);
    for (std::size_t k = 0; k < traced_slots.size(); ++k) fi[traced_slots[k]] = fj[traced_slots[k]] = tidx[k];
    for (std::size_t a = 0; a < nk; ++a) {
      const auto aidx = unravel(a, kept);
      for (std::size_t k = 0; k < keep.size(); ++k) fi[keep[k]] = aidx[k];
      const auto row = static_cast<Eigen::Index>(ravel(fi, dims));
      for (std::size_t b = 0; b < nk; ++b) {
        const auto bidx = unravel(b, kept);
        for (std::size_t k = 0; k < keep.size(); ++k) fj[keep[k]] = bidx[k];
        out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) +=
            op.matrix()(row, static_cast<Eigen::Index>(ravel(fj, dims)));
      }
    }
  }
  return Operator(kept, std::move(out), op.is_hermitian());
}

// Tr over the other party of a bipartite projector.
inline Operator reduced_projector(const Operator& proj, std::size_t keep) {
  if (proj.dims().size() != 2)
    throw InvalidArgument("reduced_projector expects a bipartite operator, got dims " +
                          dims_string(proj.dims()));
  if (keep > 1) throw InvalidArgument("keep index must be 0 or 1");
  return partial_trace(proj, {keep});
}

// Applies a unitary on one subsystem of a state.
inline StateVector apply_local(const StateVector& state, const CMatrix& u, std::size_t slot) {
  Dims dims = state.dims();
  if (slot >= dims.size()) throw InvalidArgument("slot out of range");
  if (u.rows() != static_cast<Eigen::Index>(dims[slot]) || u.cols() != u.rows())
    throw InvalidArgument("local unitary has wrong size");
  const Operator op(Dims{dims[slot]}, u);
  return embed_local(op, slot, dims).apply(state);
}

// |<a|b>| = 1 within tol: equality up to a global phase.
inline bool same_ray(const StateVector& a, const StateVector& b,
                     double tol = numeric_policy().structural_tol) {
  if (a.dims() != b.dims()) return false;
  return std::abs(std::abs(a.inner(b)) - a.norm() * b.norm()) <= tol &&
         std::abs(a.norm() - b.norm()) <= tol;
}

}  // namespace causal_probe
