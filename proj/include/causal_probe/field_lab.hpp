#pragma once

// Free real scalar field on a periodic hypercubic lattice of N^d sites,
// spacing a, volume V = (Na)^d. Plane-wave modes carry Kronecker-normalized
// ladder operators b_k and
//
//   φ_z = Σ_k sqrt(ħ/2ω_k V) (b_k e^{ik·z} + h.c.)
//   π_z = Σ_k (-i) sqrt(ħω_k/2V) (b_k e^{ik·z} - h.c.)
//
// so that [φ_z, π_z'] = iħ δ_zz'/a^d. A kick e^{iλφ_x/ħ} turns the vacuum
// into a product of coherent states. The closed forms below are checked
// against a truncated-Fock oracle that builds that product state explicitly.

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "causal_probe/fock.hpp"
#include "causal_probe/quantum_core.hpp"

namespace causal_probe::field {

enum class Dispersion { lattice, continuum };

inline Dispersion parse_dispersion(const std::string& s) {
  if (s == "lattice") return Dispersion::lattice;
  if (s == "continuum") return Dispersion::continuum;
  throw InvalidArgument("unknown dispersion '" + s + "'");
}

inline const char* to_string(Dispersion d) {
  return d == Dispersion::lattice ? "lattice" : "continuum";
}

using Site = std::vector<int>;

struct LatticeSpec {
  int d = 1;
  int N = 4;
  double a = 1.0;
  double mass = 1.0;
  double hbar = 1.0;
  Dispersion dispersion = Dispersion::lattice;
  // Frequency given to the k = 0 mode when mass = 0; default 1e-3/a.
  std::optional<double> zero_mode_regulator;

  void validate() const {
    if (d < 1 || d > 3) throw InvalidArgument("lattice dimension must be 1, 2 or 3");
    if (N < 2 || N % 2 != 0) throw InvalidArgument("sites per axis N must be even and >= 2");
    if (!(a > 0.0)) throw InvalidArgument("lattice spacing must be positive");
    if (!(mass >= 0.0)) throw InvalidArgument("mass must be non-negative");
    if (!(hbar > 0.0)) throw InvalidArgument("hbar must be positive");
    if (zero_mode_regulator && !(*zero_mode_regulator > 0.0))
      throw InvalidArgument("massless zero mode needs a positive regulator");
  }

  double volume() const { return std::pow(N * a, d); }
  double cell_volume() const { return std::pow(a, d); }
  std::size_t num_sites() const {
    std::size_t n = 1;
    for (int i = 0; i < d; ++i) n *= static_cast<std::size_t>(N);
    return n;
  }
};

struct Mode {
  std::vector<int> j;       // integer labels 0..N-1 per axis
  std::vector<double> k;    // wave-vector in (-π/a, π/a]
  double omega = 0.0;
  std::size_t partner = 0;  // index of -k
  bool self_conjugate = false;
};

struct ModeSet {
  LatticeSpec lattice;
  std::vector<Mode> modes;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::size_t> self_conjugate;
  double epsilon = 0.0;  // 1/V

  std::size_t size() const { return modes.size(); }
  const Mode& operator[](std::size_t i) const { return modes.at(i); }
  double volume() const { return lattice.volume(); }

  std::size_t index_of(const std::vector<int>& j) const {
    if (static_cast<int>(j.size()) != lattice.d)
      throw InvalidArgument("mode label needs " + std::to_string(lattice.d) + " components");
    std::size_t idx = 0;
    for (int c : j) {
      const int w = ((c % lattice.N) + lattice.N) % lattice.N;
      idx = idx * static_cast<std::size_t>(lattice.N) + static_cast<std::size_t>(w);
    }
    return idx;
  }

  // k·z for lattice site z (integer coordinates times a).
  double phase(std::size_t mode, const Site& z) const {
    const Mode& m = modes.at(mode);
    if (z.size() != m.k.size()) throw InvalidArgument("site has wrong dimension");
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) s += m.k[i] * lattice.a * z[i];
    return s;
  }

  void require_paired(std::size_t p) const {
    if (p >= modes.size()) throw InvalidArgument("mode index out of range");
    if (modes[p].self_conjugate)
      throw InvalidArgument("mode " + std::to_string(p) +
                            " is self-conjugate; single-mode measurements need a paired mode");
  }
};

inline double lattice_frequency(const LatticeSpec& l, const std::vector<double>& k) {
  double s = l.mass * l.mass;
  for (double ki : k) {
    if (l.dispersion == Dispersion::lattice) {
      const double t = (2.0 / l.a) * std::sin(0.5 * ki * l.a);
      s += t * t;
    } else {
      s += ki * ki;
    }
  }
  return std::sqrt(s);
}

inline ModeSet build_modes(const LatticeSpec& lattice) {
  lattice.validate();
  ModeSet ms;
  ms.lattice = lattice;
  ms.epsilon = 1.0 / lattice.volume();
  const std::size_t n = lattice.num_sites();
  const int N = lattice.N;
  const double dk = 2.0 * std::numbers::pi / (N * lattice.a);
  ms.modes.resize(n);
  for (std::size_t idx = 0; idx < n; ++idx) {
    Mode& m = ms.modes[idx];
    m.j.assign(static_cast<std::size_t>(lattice.d), 0);
    std::size_t rest = idx;
    for (int ax = lattice.d - 1; ax >= 0; --ax) {
      m.j[static_cast<std::size_t>(ax)] = static_cast<int>(rest % static_cast<std::size_t>(N));
      rest /= static_cast<std::size_t>(N);
    }
    m.k.resize(m.j.size());
    bool self = true;
    std::vector<int> neg(m.j.size());
    for (std::size_t ax = 0; ax < m.j.size(); ++ax) {
      const int j = m.j[ax];
      m.k[ax] = (j <= N / 2 ? j : j - N) * dk;
      neg[ax] = (N - j) % N;
      if (neg[ax] != j) self = false;
    }
    m.self_conjugate = self;
    m.partner = ms.index_of(neg);
    m.omega = lattice_frequency(lattice, m.k);
    if (m.omega <= 0.0) {
      if (lattice.zero_mode_regulator) {
        m.omega = *lattice.zero_mode_regulator;
      } else if (lattice.mass == 0.0) {
        m.omega = 1e-3 / lattice.a;
      }
    }
    if (!(m.omega > 0.0)) throw InvalidArgument("mode with non-positive frequency");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (ms.modes[i].self_conjugate)
      ms.self_conjugate.push_back(i);
    else if (i < ms.modes[i].partner)
      ms.pairs.emplace_back(i, ms.modes[i].partner);
  }
  return ms;
}

// ------------------------------------------------------------------ kernels

inline Site site_difference(const Site& x, const Site& y) {
  if (x.size() != y.size()) throw InvalidArgument("sites of different dimension");
  Site r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r[i] = x[i] - y[i];
  return r;
}

// (1/V) Σ_k ω_k^power cos k·(x-y); real because the mode set is closed under k -> -k.
inline double kernel_power(const ModeSet& ms, const Site& x, const Site& y, int power) {
  const Site r = site_difference(x, y);
  double s = 0.0;
  for (std::size_t i = 0; i < ms.size(); ++i)
    s += std::pow(ms[i].omega, power) * std::cos(ms.phase(i, r));
  return s * ms.epsilon;
}

inline double kernel_g(const ModeSet& ms, const Site& x, const Site& y) {
  return kernel_power(ms, x, y, 1);
}
inline double kernel_ginv(const ModeSet& ms, const Site& x, const Site& y) {
  return kernel_power(ms, x, y, -1);
}

inline std::vector<Site> all_sites(const LatticeSpec& l) {
  std::vector<Site> out;
  const std::size_t n = l.num_sites();
  out.reserve(n);
  for (std::size_t idx = 0; idx < n; ++idx) {
    Site z(static_cast<std::size_t>(l.d));
    std::size_t rest = idx;
    for (int ax = l.d - 1; ax >= 0; --ax) {
      z[static_cast<std::size_t>(ax)] = static_cast<int>(rest % static_cast<std::size_t>(l.N));
      rest /= static_cast<std::size_t>(l.N);
    }
    out.push_back(std::move(z));
  }
  return out;
}

inline bool same_site(const LatticeSpec& l, const Site& x, const Site& y) {
  for (std::size_t i = 0; i < x.size(); ++i)
    if ((((x[i] - y[i]) % l.N) + l.N) % l.N != 0) return false;
  return true;
}

// Σ_z a^d g⁻¹(x,z) g(z,y); equals δ_xy / a^d.
inline double kernel_convolution(const ModeSet& ms, const Site& x, const Site& y) {
  double s = 0.0;
  for (const auto& z : all_sites(ms.lattice)) s += kernel_ginv(ms, x, z) * kernel_g(ms, z, y);
  return s * ms.lattice.cell_volume();
}

inline double lattice_delta(const ModeSet& ms, const Site& x, const Site& y) {
  return same_site(ms.lattice, x, y) ? 1.0 / ms.lattice.cell_volume() : 0.0;
}

// ------------------------------------------------------------------ kicks

struct KickSpec {
  Site x;
  double lambda = 0.0;
};

inline void check_site(const ModeSet& ms, const Site& s) {
  if (static_cast<int>(s.size()) != ms.lattice.d)
    throw InvalidArgument("site needs " + std::to_string(ms.lattice.d) + " coordinates");
}

// α_k = iλ e^{-ik·x} / sqrt(2ħω_k V).
inline std::vector<cplx> kick_displacements(const ModeSet& ms, const KickSpec& kick) {
  check_site(ms, kick.x);
  std::vector<cplx> alpha(ms.size());
  const double hbar = ms.lattice.hbar;
  for (std::size_t i = 0; i < ms.size(); ++i)
    alpha[i] = cplx(0.0, kick.lambda) * std::polar(1.0, -ms.phase(i, kick.x)) /
               std::sqrt(2.0 * hbar * ms[i].omega * ms.volume());
  return alpha;
}

// Σ_k ħω_k |α_k|², the energy the kick injects.
inline double kick_energy(const ModeSet& ms, const KickSpec& kick) {
  const auto alpha = kick_displacements(ms, kick);
  double e = 0.0;
  for (std::size_t i = 0; i < ms.size(); ++i) e += ms.lattice.hbar * ms[i].omega * std::norm(alpha[i]);
  return e;
}

// |<0|kicked vacuum>|² = e^{-λ² g⁻¹_xx / 2ħ}.
inline double suppression_factor(const ModeSet& ms, const KickSpec& kick) {
  const double g = kernel_ginv(ms, kick.x, kick.x);
  return std::exp(-kick.lambda * kick.lambda * g / (2.0 * ms.lattice.hbar));
}

// ------------------------------------------------------------------ wave packets

// Spectral amplitudes with (1/V) Σ_k |φ̃_k|² = 1. The one-particle state is
// Σ_k f_k b_k†|0> with f_k = φ̃_k e^{-iω_k t1} / sqrt(V).
struct WavePacket {
  std::vector<cplx> amplitudes;

  static WavePacket make(const ModeSet& ms, std::vector<cplx> amps) {
    if (amps.size() != ms.size()) throw InvalidArgument("packet needs one amplitude per mode");
    double n = 0.0;
    for (const auto& c : amps) n += std::norm(c);
    n *= ms.epsilon;
    if (std::abs(n - 1.0) > numeric_policy().structural_tol)
      throw InvalidArgument("wave packet is not normalized: (1/V) sum |phi(k)|^2 = " + std::to_string(n));
    return {std::move(amps)};
  }

  // Rescales arbitrary amplitudes onto the normalization above.
  static WavePacket normalized(const ModeSet& ms, std::vector<cplx> amps) {
    double n = 0.0;
    for (const auto& c : amps) n += std::norm(c);
    if (n <= 0.0) throw InvalidArgument("wave packet amplitudes are all zero");
    const double s = std::sqrt(ms.volume() / n);
    for (auto& c : amps) c *= s;
    return make(ms, std::move(amps));
  }

  static WavePacket single_mode(const ModeSet& ms, std::size_t p) {
    if (p >= ms.size()) throw InvalidArgument("mode index out of range");
    std::vector<cplx> amps(ms.size(), 0.0);
    amps[p] = std::sqrt(ms.volume());
    return make(ms, std::move(amps));
  }
};

// F(t,z) = (1/V) Σ_k φ̃_k ω_k^{-1/2} e^{-i(ω_k t - k·z)}.
inline cplx packet_kernel(const ModeSet& ms, const WavePacket& packet, double t, const Site& z) {
  cplx s = 0.0;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    if (packet.amplitudes[i] == 0.0) continue;
    s += packet.amplitudes[i] / std::sqrt(ms[i].omega) *
         std::polar(1.0, ms.phase(i, z) - ms[i].omega * t);
  }
  return s * ms.epsilon;
}

// S(x,y) = Im F*(t1,x) F(t1,y); also the slope of <φ_y> at λ = 0.
inline double sorkin_derivative(const ModeSet& ms, const Site& x, const Site& y,
                                const WavePacket& packet, double t1) {
  check_site(ms, x);
  check_site(ms, y);
  return (std::conj(packet_kernel(ms, packet, t1, x)) * packet_kernel(ms, packet, t1, y)).imag();
}

// ------------------------------------------------------------------ QNDSV closed forms

inline double qndsv_phi_y(const ModeSet& ms, const KickSpec& kick, const Site& y, std::size_t p) {
  ms.require_paired(p);
  check_site(ms, y);
  const double s = std::sin(ms.phase(p, site_difference(y, kick.x)));
  return kick.lambda * suppression_factor(ms, kick) * (ms.epsilon / ms[p].omega) * s;
}

inline double qndsv_wavepacket_phi_y(const ModeSet& ms, const KickSpec& kick, const Site& y,
                                     const WavePacket& packet, double t1) {
  return kick.lambda * suppression_factor(ms, kick) * sorkin_derivative(ms, kick.x, y, packet, t1);
}

// <π_y> after the single-mode verification.
inline double qndsv_pi_y(const ModeSet& ms, const KickSpec& kick, const Site& y, std::size_t p) {
  ms.require_paired(p);
  check_site(ms, y);
  const double lam = kick.lambda;
  const double w = ms[p].omega;
  const double delta = lattice_delta(ms, kick.x, y);
  const double c = std::cos(ms.phase(p, site_difference(kick.x, y)));
  return lam * delta -
         suppression_factor(ms, kick) * lam * ms.epsilon *
             (c + lam * lam * delta / (2.0 * ms.lattice.hbar * w));
}

struct Phi2Record {
  double value = 0.0;       // derived expression, oracle-verified
  double quoted_form = 0.0;  // closed form as commonly quoted, kept for comparison
  double difference = 0.0;  // value - quoted_form
};

inline Phi2Record qndsv_phi2_y(const ModeSet& ms, const KickSpec& kick, const Site& y, std::size_t p) {
  ms.require_paired(p);
  check_site(ms, y);
  const double hbar = ms.lattice.hbar;
  const double lam2 = kick.lambda * kick.lambda;
  const double eps = ms.epsilon;
  const double w = ms[p].omega;
  const double gyy = kernel_ginv(ms, y, y);
  const double gxy = kernel_ginv(ms, kick.x, y);
  const double c = std::cos(ms.phase(p, site_difference(kick.x, y)));
  const double G2 = suppression_factor(ms, kick);
  const double pref = lam2 * eps / (hbar * w) * G2;

  Phi2Record r;
  r.value = 0.5 * hbar * gyy + pref * (0.25 * lam2 * gxy * gxy - hbar * gxy * c + hbar * eps / w);
  r.quoted_form = 1.5 * hbar * gyy + 2.0 * hbar * eps / w -
                 pref * (2.0 * hbar * gxy * c + 0.5 * hbar * gyy - 0.25 * lam2 * gxy * gxy);
  r.difference = r.value - r.quoted_form;
  return r;
}

// Probability of the "yes" outcome for |1_p> and for a packet.
inline double qndsv_probability(const ModeSet& ms, const KickSpec& kick, std::size_t p) {
  ms.require_paired(p);
  const auto alpha = kick_displacements(ms, kick);
  return suppression_factor(ms, kick) * std::norm(alpha[p]);
}

inline std::vector<cplx> packet_single_particle(const ModeSet& ms, const WavePacket& packet, double t1) {
  std::vector<cplx> f(ms.size());
  const double s = 1.0 / std::sqrt(ms.volume());
  for (std::size_t i = 0; i < ms.size(); ++i)
    f[i] = packet.amplitudes[i] * std::polar(s, -ms[i].omega * t1);
  return f;
}

inline double qndsv_packet_probability(const ModeSet& ms, const KickSpec& kick,
                                       const WavePacket& packet, double t1) {
  const auto alpha = kick_displacements(ms, kick);
  const auto f = packet_single_particle(ms, packet, t1);
  cplx ov = 0.0;
  for (std::size_t i = 0; i < ms.size(); ++i) ov += std::conj(f[i]) * alpha[i];
  return suppression_factor(ms, kick) * std::norm(ov);
}

// ------------------------------------------------------------------ naive N_p

struct FieldMoments {
  double phi = 0.0;
  double pi = 0.0;
  double phi2 = 0.0;
  double pi2 = 0.0;
};

struct NaiveRecord {
  FieldMoments moments;
  double quoted_phi2 = 0.0;
  double quoted_pi2 = 0.0;
};

// Kicked vacuum without any measurement.
inline FieldMoments prestate_expectations(const ModeSet& ms, const KickSpec& kick, const Site& y) {
  check_site(ms, y);
  const double hbar = ms.lattice.hbar;
  FieldMoments m;
  m.pi = kick.lambda * lattice_delta(ms, kick.x, y);
  m.phi2 = 0.5 * hbar * kernel_ginv(ms, y, y);
  m.pi2 = m.pi * m.pi + 0.5 * hbar * kernel_g(ms, y, y);
  return m;
}

inline NaiveRecord naive_Np_expectations(const ModeSet& ms, const KickSpec& kick, const Site& y,
                                         std::size_t p) {
  ms.require_paired(p);
  check_site(ms, y);
  const double hbar = ms.lattice.hbar;
  const double lam = kick.lambda;
  const double eps = ms.epsilon;
  const double w = ms[p].omega;
  const double c = std::cos(ms.phase(p, site_difference(kick.x, y)));
  NaiveRecord r;
  auto& m = r.moments;
  m.phi = 0.0;
  m.pi = lam * (lattice_delta(ms, kick.x, y) - 2.0 * eps * c);
  m.phi2 = 0.5 * hbar * kernel_ginv(ms, y, y) + lam * lam * eps * eps / (w * w);
  m.pi2 = m.pi * m.pi + 0.5 * hbar * kernel_g(ms, y, y) + lam * lam * eps * eps;
  r.quoted_phi2 = 0.5 * hbar * kernel_ginv(ms, y, y) + lam * lam * eps * eps;
  r.quoted_pi2 = m.pi * m.pi + 0.5 * hbar * kernel_g(ms, y, y) + std::pow(lam * eps * w, 2);
  return r;
}

inline double poisson(double mean, std::size_t n) {
  return std::exp(-mean + n * std::log(mean) - std::lgamma(static_cast<double>(n) + 1.0));
}

// P_mn for n_p = m, n_{-p} = n, indices below `levels`.
inline Eigen::MatrixXd naive_probabilities(const ModeSet& ms, const KickSpec& kick, std::size_t p,
                                           std::size_t levels) {
  ms.require_paired(p);
  const double mean = kick.lambda * kick.lambda * ms.epsilon / (2.0 * ms.lattice.hbar * ms[p].omega);
  Eigen::VectorXd w(static_cast<Eigen::Index>(levels));
  for (std::size_t n = 0; n < levels; ++n)
    w(static_cast<Eigen::Index>(n)) = mean == 0.0 ? (n == 0 ? 1.0 : 0.0) : poisson(mean, n);
  return w * w.transpose();
}

// ------------------------------------------------------------------ maximum signal

struct MaxSignal {
  double lambda_star = 0.0;
  double amplitude = 0.0;
};

// Maximum over λ of λ e^{-λ² g⁻¹_xx / 2ħ}.
inline MaxSignal max_signaling(const ModeSet& ms, const Site& x) {
  check_site(ms, x);
  const double g = kernel_ginv(ms, x, x);
  const double hbar = ms.lattice.hbar;
  return {std::sqrt(hbar / g), std::sqrt(hbar / (std::numbers::e * g))};
}

// ------------------------------------------------------------------ numeric oracle

enum class OracleScheme { none, qndsv_mode, qndsv_packet, naive };

struct OracleRequest {
  OracleScheme scheme = OracleScheme::none;
  std::size_t p = 0;
  std::optional<WavePacket> packet;
  double t1 = 0.0;
  std::size_t trunc = 6;
};

struct OracleResult {
  FieldMoments moments;
  double p_yes = 0.0;            // verification schemes
  Eigen::MatrixXd pmn;           // naive scheme, rows n_p, columns n_{-p}
  double total_probability = 0.0;
  double tail_bound = 0.0;
  std::size_t dimension = 0;
};

inline constexpr std::size_t kOracleMaxDim = 200000;
inline constexpr std::size_t kOracleMaxDimNaive = 4096;

namespace detail {

// Σ ⟨ψ|O|ψ> for O = A + A†, O² with A = Σ_k c_k b_k applied to an
// unnormalized branch ψ; [A, A†] = Σ|c_k|² is used exactly.
struct LinearMoments {
  double first = 0.0;
  double second = 0.0;
};

inline LinearMoments linear_moments(const CVector& psi, const Dims& dims, const std::vector<cplx>& c) {
  CVector u = CVector::Zero(psi.size());
  for (std::size_t k = 0; k < c.size(); ++k) u += c[k] * fock::lower_slot(psi, dims, k);
  CVector uu = CVector::Zero(psi.size());
  for (std::size_t k = 0; k < c.size(); ++k) uu += c[k] * fock::lower_slot(u, dims, k);
  double comm = 0.0;
  for (const auto& ck : c) comm += std::norm(ck);
  const double w = psi.squaredNorm();
  LinearMoments m;
  m.first = 2.0 * psi.dot(u).real();
  m.second = 2.0 * psi.dot(uu).real() + 2.0 * u.squaredNorm() + comm * w;
  return m;
}

}  // namespace detail

inline OracleResult numeric_oracle(const ModeSet& ms, const KickSpec& kick, const Site& y,
                                   const OracleRequest& req) {
  check_site(ms, y);
  if (req.trunc < 2) throw InvalidArgument("oracle truncation must be at least 2");
  const std::size_t M = ms.size();
  const Dims dims(M, req.trunc);
  double dim = 1.0;
  for (std::size_t i = 0; i < M; ++i) dim *= static_cast<double>(req.trunc);
  const std::size_t cap = req.scheme == OracleScheme::naive ? kOracleMaxDimNaive : kOracleMaxDim;
  if (dim > static_cast<double>(cap))
    throw InvalidArgument("oracle dimension " + std::to_string(static_cast<long long>(dim)) +
                          " exceeds limit " + std::to_string(cap));

  // Pre-measurement product state.
  const auto alpha = kick_displacements(ms, kick);
  std::vector<StateVector> factors;
  double kept = 1.0;
  for (std::size_t i = 0; i < M; ++i) {
    CVector v = fock::coherent(alpha[i], req.trunc);
    kept *= v.squaredNorm();
    factors.emplace_back(Dims{req.trunc}, v / v.norm());
  }
  OracleResult res;
  res.tail_bound = std::max(0.0, 1.0 - kept);
  if (res.tail_bound > numeric_policy().tail_tol)
    throw TruncationError("field oracle truncation tail " + short_number(res.tail_bound) +
                          " exceeds " + short_number(numeric_policy().tail_tol));
  const StateVector pre = tensor_state(std::span<const StateVector>(factors));
  res.dimension = pre.size();

  auto one_particle = [&](const std::vector<cplx>& f) {
    CVector t = CVector::Zero(static_cast<Eigen::Index>(pre.size()));
    std::vector<std::size_t> idx(M, 0);
    for (std::size_t k = 0; k < M; ++k) {
      if (f[k] == 0.0) continue;
      idx.assign(M, 0);
      idx[k] = 1;
      t(static_cast<Eigen::Index>(ravel(idx, dims))) = f[k];
    }
    return StateVector(dims, t);
  };

  std::optional<MeasurementScheme> scheme;
  switch (req.scheme) {
    case OracleScheme::none:
      scheme = identity_scheme(dims);
      break;
    case OracleScheme::qndsv_mode: {
      ms.require_paired(req.p);
      std::vector<cplx> f(M, 0.0);
      f[req.p] = 1.0;
      scheme = qndsv_scheme(one_particle(f));
      break;
    }
    case OracleScheme::qndsv_packet: {
      if (!req.packet) throw InvalidArgument("packet oracle needs a wave packet");
      scheme = qndsv_scheme(one_particle(packet_single_particle(ms, *req.packet, req.t1)));
      break;
    }
    case OracleScheme::naive: {
      ms.require_paired(req.p);
      const std::size_t q = ms[req.p].partner;
      std::vector<std::pair<std::string, CVector>> vecs;
      const std::size_t n = req.trunc;
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) {
          CVector v = CVector::Zero(static_cast<Eigen::Index>(n * n));
          v(static_cast<Eigen::Index>(a * n + b)) = 1.0;
          vecs.emplace_back(std::to_string(a) + "," + std::to_string(b), std::move(v));
        }
      const auto local = MeasurementScheme::from_vectors({n, n}, vecs);
      scheme = embed_scheme(local, {req.p, q}, dims);
      break;
    }
  }

  const auto ens = born_ensemble(*scheme, pre);
  res.total_probability = ens.total_probability();
  if (req.scheme == OracleScheme::qndsv_mode || req.scheme == OracleScheme::qndsv_packet)
    res.p_yes = ens.find("yes").probability();
  if (req.scheme == OracleScheme::naive) {
    res.pmn = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(req.trunc), static_cast<Eigen::Index>(req.trunc));
    for (std::size_t i = 0; i < ens.entries.size(); ++i)
      res.pmn(static_cast<Eigen::Index>(i / req.trunc), static_cast<Eigen::Index>(i % req.trunc)) =
          ens.entries[i].probability();
  }

  // Field operators at y split into annihilation parts.
  const double hbar = ms.lattice.hbar;
  std::vector<cplx> cphi(M), cpi(M);
  for (std::size_t k = 0; k < M; ++k) {
    const cplx e = std::polar(1.0, ms.phase(k, y));
    cphi[k] = std::sqrt(hbar / (2.0 * ms[k].omega * ms.volume())) * e;
    cpi[k] = cplx(0.0, -1.0) * std::sqrt(hbar * ms[k].omega / (2.0 * ms.volume())) * e;
  }
  for (const auto& entry : ens.entries) {
    if (entry.zero_branch()) continue;
    const CVector branch = std::sqrt(entry.probability()) * entry.post_state().amplitudes();
    const auto mp = detail::linear_moments(branch, dims, cphi);
    const auto mq = detail::linear_moments(branch, dims, cpi);
    res.moments.phi += mp.first;
    res.moments.phi2 += mp.second;
    res.moments.pi += mq.first;
    res.moments.pi2 += mq.second;
  }
  return res;
}

}  // namespace causal_probe::field
