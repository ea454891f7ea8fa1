#pragma once

// Scenario runner: a physical system, a one-parameter family of local
// operations on A (rotation angle or kick strength), a measurement scheme
// and a list of observables at B. Produces value tables, slopes at zero,
// cutoff sweeps with power-law fits and side-by-side scheme comparisons.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "causal_probe/field_lab.hpp"
#include "causal_probe/oscillator_lab.hpp"
#include "causal_probe/spin_lab.hpp"

namespace causal_probe::harness {

// ------------------------------------------------------------------ threads

inline std::size_t thread_count() {
  if (const char* env = std::getenv("CAUSAL_PROBE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

// Evaluates f(0..n-1) on up to `threads` workers. Results are stored by
// index, and the lowest-index exception is rethrown.
template <class T>
std::vector<T> parallel_map(std::size_t n, const std::function<T(std::size_t)>& f,
                            std::size_t threads = thread_count()) {
  std::vector<std::optional<T>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i].emplace(f(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t w = std::max<std::size_t>(1, std::min(threads, n));
  if (w == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < w; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<T> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// ------------------------------------------------------------------ fits

struct Fit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  bool valid = false;
};

inline Fit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  Fit f;
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) return f;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  f.valid = true;
  return f;
}

// Fit of log|y| against log x; invalid if any point is non-positive.
inline Fit loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(std::abs(y[i]) > 0.0)) return {};
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(std::abs(y[i])));
  }
  return least_squares(lx, ly);
}

// ------------------------------------------------------------------ scenario

enum class System { spin, oscillator, field };

inline const char* to_string(System s) {
  switch (s) {
    case System::spin: return "spin";
    case System::oscillator: return "oscillator";
    case System::field: return "field";
  }
  return "?";
}

inline System parse_system(const std::string& s) {
  if (s == "spin") return System::spin;
  if (s == "oscillator" || s == "ho") return System::oscillator;
  if (s == "field") return System::field;
  throw InvalidArgument("unknown system '" + s + "'");
}

struct SpinSetup {
  std::string state_a = "up";
  std::string state_b = "up";
  std::optional<std::pair<std::string, std::string>> target;  // QNDSV target
  spin::Axis axis{0.0, 1.0, 0.0};                               // Alice's rotation axis
  double hbar = 1.0;
};

struct OscillatorSetup {
  oscillator::OscParams params;
  double p_A = 0.0;
  double p_B = 0.0;
  std::size_t trunc = 40;
  int s_cut = 16;
};

struct PacketTerm {
  std::vector<int> mode;
  cplx amplitude;
};

struct FieldSetup {
  field::LatticeSpec lattice;
  field::Site x{0};
  field::Site y{1};
  std::vector<int> p{1};
  std::vector<PacketTerm> packet;
  double t1 = 0.0;
  std::optional<std::size_t> oracle_trunc;
};

enum class SweepAxis { volume, spacing, s_cut, trunc };

inline const char* to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::volume: return "volume";
    case SweepAxis::spacing: return "spacing";
    case SweepAxis::s_cut: return "S_cut";
    case SweepAxis::trunc: return "trunc";
  }
  return "?";
}

inline SweepAxis parse_axis(const std::string& s) {
  if (s == "volume") return SweepAxis::volume;
  if (s == "spacing") return SweepAxis::spacing;
  if (s == "S_cut" || s == "s_cut") return SweepAxis::s_cut;
  if (s == "trunc") return SweepAxis::trunc;
  throw InvalidArgument("unknown sweep axis '" + s + "'");
}

// derivative:  max |d<O>/dλ| at λ = 0
// deviation:   max over grid of |<O>(λ) - <O>(0)|
// disturbance: |<O> after the scheme - <O> without it| at the last grid point
// value:       |<O>| at the last grid point
// max_signal:  field only, max over λ of λ e^{-λ² g⁻¹_xx/2ħ}
// suppression: field only, e^{-λ² g⁻¹_xx/2ħ} at the last grid point
enum class SweepMeasure { derivative, deviation, disturbance, value, max_signal, suppression };

inline const char* to_string(SweepMeasure m) {
  switch (m) {
    case SweepMeasure::derivative: return "derivative";
    case SweepMeasure::deviation: return "deviation";
    case SweepMeasure::disturbance: return "disturbance";
    case SweepMeasure::value: return "value";
    case SweepMeasure::max_signal: return "max_signal";
    case SweepMeasure::suppression: return "suppression";
  }
  return "?";
}

inline SweepMeasure parse_measure(const std::string& s) {
  if (s == "derivative") return SweepMeasure::derivative;
  if (s == "deviation") return SweepMeasure::deviation;
  if (s == "disturbance") return SweepMeasure::disturbance;
  if (s == "value") return SweepMeasure::value;
  if (s == "max_signal") return SweepMeasure::max_signal;
  if (s == "suppression") return SweepMeasure::suppression;
  throw InvalidArgument("unknown sweep measure '" + s + "'");
}

struct SweepSpec {
  SweepAxis axis = SweepAxis::volume;
  std::vector<double> values;
  SweepMeasure measure = SweepMeasure::derivative;
};

struct Scenario {
  std::string name = "scenario";
  System system = System::spin;
  std::string scheme = "none";
  std::vector<std::string> observables;
  std::vector<double> grid;
  SpinSetup spin;
  OscillatorSetup oscillator;
  FieldSetup field;
  std::optional<SweepSpec> sweep;
  std::vector<std::string> compare;
};

inline const std::vector<std::string>& scheme_ids(System s) {
  static const std::vector<std::string> spin_ids{"none",        "qndsv",     "S2-standard",
                                                 "S2-bell",     "S2-luders", "Sz-standard",
                                                 "Sz-bell",     "Sz-luders"};
  static const std::vector<std::string> osc_ids{"none", "naive", "phase"};
  static const std::vector<std::string> field_ids{"none", "naive", "qndsv", "packet"};
  switch (s) {
    case System::spin: return spin_ids;
    case System::oscillator: return osc_ids;
    case System::field: return field_ids;
  }
  return spin_ids;
}

inline const std::vector<std::string>& observable_names(System s) {
  static const std::vector<std::string> spin_obs{"sAz", "sAx", "sBz", "sBx", "sBy", "Sz", "S2"};
  static const std::vector<std::string> osc_obs{"QB", "PB", "QB2", "PB2", "EB"};
  static const std::vector<std::string> field_obs{"phi", "pi", "phi2", "pi2"};
  switch (s) {
    case System::spin: return spin_obs;
    case System::oscillator: return osc_obs;
    case System::field: return field_obs;
  }
  return spin_obs;
}

// Labels used by the no-signalling checks: schemes whose B-marginals are
// independent of Alice's operation, and schemes known to depend on it.
inline std::string scheme_class(System s, const std::string& id) {
  if (id == "none") return "reference";
  if ((s == System::spin && (id == "S2-bell" || id == "Sz-standard")) ||
      (s == System::oscillator && id == "phase"))
    return "causal";
  if ((s == System::spin && (id == "qndsv" || id == "S2-standard")) ||
      (s == System::oscillator && id == "naive") ||
      (s == System::field && (id == "naive" || id == "qndsv" || id == "packet")))
    return "violating";
  return "unclassified";
}

namespace detail {

inline bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

inline bool field_closed_form_available(const std::string& scheme, const std::string& obs) {
  if (scheme == "qndsv") return obs != "pi2";
  if (scheme == "packet") return obs == "phi";
  return true;
}

}  // namespace detail

inline void validate_scheme_id(const Scenario& s, const std::string& id) {
  if (!detail::contains(scheme_ids(s.system), id))
    throw InvalidArgument("scheme '" + id + "' is not defined for system " + to_string(s.system));
  if (s.system == System::spin && id == "qndsv" && !s.spin.target)
    throw InvalidArgument("spin qndsv scheme needs a target state");
  if (s.system == System::field && id == "packet" && s.field.packet.empty())
    throw InvalidArgument("packet scheme needs packet amplitudes");
  if (s.system == System::field && !s.field.oracle_trunc)
    for (const auto& o : s.observables)
      if (!detail::field_closed_form_available(id, o))
        throw InvalidArgument("observable '" + o + "' has no closed form for field scheme '" + id +
                              "'; set oracle_trunc to use the numeric oracle");
}

inline void validate(const Scenario& s) {
  if (s.name.empty()) throw InvalidArgument("scenario name must not be empty");
  if (s.observables.empty()) throw InvalidArgument("scenario needs at least one observable");
  for (const auto& o : s.observables)
    if (!detail::contains(observable_names(s.system), o))
      throw InvalidArgument("observable '" + o + "' is not defined for system " + to_string(s.system));
  if (s.grid.empty()) throw InvalidArgument("parameter grid must not be empty");
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    if (!std::isfinite(s.grid[i])) throw InvalidArgument("parameter grid has a non-finite entry");
    if (i > 0 && !(s.grid[i] > s.grid[i - 1])) throw InvalidArgument("parameter grid must be strictly increasing");
  }
  validate_scheme_id(s, s.scheme);
  for (const auto& id : s.compare) validate_scheme_id(s, id);
  switch (s.system) {
    case System::spin:
      (void)spin::parse_label(s.spin.state_a);
      (void)spin::parse_label(s.spin.state_b);
      if (s.spin.target) {
        (void)spin::parse_label(s.spin.target->first);
        (void)spin::parse_label(s.spin.target->second);
      }
      spin::require_unit(s.spin.axis);
      if (!(s.spin.hbar > 0.0)) throw InvalidArgument("hbar must be positive");
      break;
    case System::oscillator:
      s.oscillator.params.validate();
      if (s.oscillator.trunc < 2) throw InvalidArgument("oscillator truncation must be at least 2");
      if (s.scheme == "phase" || detail::contains(s.compare, "phase")) oscillator::require_even_cut(s.oscillator.s_cut);
      break;
    case System::field: {
      const auto ms = field::build_modes(s.field.lattice);
      field::check_site(ms, s.field.x);
      field::check_site(ms, s.field.y);
      (void)ms.index_of(s.field.p);
      for (const auto& t : s.field.packet) (void)ms.index_of(t.mode);
      if (s.field.oracle_trunc && *s.field.oracle_trunc < 2)
        throw InvalidArgument("oracle truncation must be at least 2");
      break;
    }
  }
  if (s.sweep) {
    if (s.sweep->values.size() < 3) throw InvalidArgument("a cutoff sweep needs at least 3 values");
    const auto ax = s.sweep->axis;
    const bool ok = (s.system == System::field && ax != SweepAxis::s_cut &&
                     (ax != SweepAxis::trunc || s.field.oracle_trunc)) ||
                    (s.system == System::oscillator && (ax == SweepAxis::s_cut || ax == SweepAxis::trunc));
    if (!ok)
      throw InvalidArgument(std::string("sweep axis ") + to_string(ax) + " is not meaningful for system " +
                            to_string(s.system));
    const auto m = s.sweep->measure;
    if ((m == SweepMeasure::max_signal || m == SweepMeasure::suppression) && s.system != System::field)
      throw InvalidArgument("sweep measure only defined for the field");
  }
}

// ------------------------------------------------------------------ evaluation

namespace detail {

inline MeasurementScheme spin_scheme(const SpinSetup& sp, const std::string& id) {
  using spin::BasisChoice;
  if (id == "qndsv") return spin::qndsv(spin::parse_label(sp.target->first), spin::parse_label(sp.target->second));
  if (id == "S2-standard") return spin::scheme_S2(BasisChoice::standard);
  if (id == "S2-bell") return spin::scheme_S2(BasisChoice::bell);
  if (id == "S2-luders") return spin::scheme_S2(BasisChoice::luders);
  if (id == "Sz-standard") return spin::scheme_Sz(BasisChoice::standard);
  if (id == "Sz-bell") return spin::scheme_Sz(BasisChoice::bell);
  if (id == "Sz-luders") return spin::scheme_Sz(BasisChoice::luders);
  return identity_scheme(spin::kTwoSpins);
}

inline std::vector<double> eval_spin(const Scenario& s, const std::string& id, double angle) {
  const auto& sp = s.spin;
  const StateVector pre = spin::alice_rotate(
      spin::spin_state(spin::parse_label(sp.state_a), spin::parse_label(sp.state_b)), sp.axis, angle);
  const auto scheme = spin_scheme(sp, id);
  std::vector<double> out;
  for (const auto& o : s.observables) {
    const auto op = spin::observable(o, sp.hbar);
    out.push_back(id == "none" ? op.expectation(pre) : post_measurement_expectation(pre, scheme, op));
  }
  return out;
}

inline std::vector<double> eval_oscillator(const Scenario& s, const std::string& id, double lambda) {
  using namespace oscillator;
  const auto& os = s.oscillator;
  const auto pre = coherent_prestate(os.params, {os.p_A, os.p_B, lambda}, os.trunc);
  BMoments m;
  if (id == "naive")
    m = local_moments_B(naive_Nplus_ensemble(pre), os.params);
  else if (id == "phase")
    m = local_moments_B(phase_ensemble(pre, os.s_cut), os.params);
  else
    m = local_moments_B(pre);
  std::vector<double> out;
  for (const auto& o : s.observables) {
    if (o == "QB") out.push_back(m.q);
    else if (o == "PB") out.push_back(m.p);
    else if (o == "QB2") out.push_back(m.q2);
    else if (o == "PB2") out.push_back(m.p2);
    else out.push_back(m.energy);
  }
  return out;
}

inline field::WavePacket make_packet(const field::ModeSet& ms, const FieldSetup& f) {
  std::vector<cplx> amps(ms.size(), 0.0);
  for (const auto& t : f.packet) amps[ms.index_of(t.mode)] += t.amplitude;
  return field::WavePacket::normalized(ms, std::move(amps));
}

inline std::vector<double> eval_field(const Scenario& s, const std::string& id, double lambda) {
  using namespace field;
  const auto& f = s.field;
  const auto ms = build_modes(f.lattice);
  const KickSpec kick{f.x, lambda};
  const std::size_t p = ms.index_of(f.p);
  FieldMoments m;
  if (f.oracle_trunc) {
    OracleRequest req;
    req.trunc = *f.oracle_trunc;
    req.p = p;
    req.t1 = f.t1;
    if (id == "naive") req.scheme = OracleScheme::naive;
    else if (id == "qndsv") req.scheme = OracleScheme::qndsv_mode;
    else if (id == "packet") {
      req.scheme = OracleScheme::qndsv_packet;
      req.packet = make_packet(ms, f);
    }
    m = numeric_oracle(ms, kick, f.y, req).moments;
  } else if (id == "naive") {
    m = naive_Np_expectations(ms, kick, f.y, p).moments;
  } else if (id == "qndsv") {
    m.phi = qndsv_phi_y(ms, kick, f.y, p);
    m.pi = qndsv_pi_y(ms, kick, f.y, p);
    m.phi2 = qndsv_phi2_y(ms, kick, f.y, p).value;
  } else if (id == "packet") {
    m.phi = qndsv_wavepacket_phi_y(ms, kick, f.y, make_packet(ms, f), f.t1);
  } else {
    m = prestate_expectations(ms, kick, f.y);
  }
  std::vector<double> out;
  for (const auto& o : s.observables) {
    if (o == "phi") out.push_back(m.phi);
    else if (o == "pi") out.push_back(m.pi);
    else if (o == "phi2") out.push_back(m.phi2);
    else out.push_back(m.pi2);
  }
  return out;
}

template <class E>
[[noreturn]] void rethrow_with(const Scenario& s, const E& e) {
  throw E("scenario '" + s.name + "': " + e.what());
}

}  // namespace detail

// <O_j> for every declared observable at Alice parameter `param`.
inline std::vector<double> evaluate(const Scenario& s, const std::string& scheme_id, double param) {
  switch (s.system) {
    case System::spin: return detail::eval_spin(s, scheme_id, param);
    case System::oscillator: return detail::eval_oscillator(s, scheme_id, param);
    case System::field: return detail::eval_field(s, scheme_id, param);
  }
  return {};
}

// ------------------------------------------------------------------ reports

struct ObservableSummary {
  std::string name;
  double baseline = 0.0;       // value at parameter 0
  double derivative = 0.0;     // slope at parameter 0
  double max_deviation = 0.0;  // max over grid of |value - baseline|
};

struct SweepPoint {
  double cutoff = 0.0;
  double measure = 0.0;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::volume;
  SweepMeasure measure = SweepMeasure::derivative;
  std::vector<SweepPoint> points;
  Fit loglog;  // slope = exponent
  Fit linear;
  bool monotone_increasing = false;
  bool monotone_decreasing = false;
};

struct SignalingReport {
  std::string scenario;
  System system = System::spin;
  std::string scheme;
  std::string scheme_class;
  std::vector<std::string> observables;
  std::vector<double> grid;
  std::vector<std::vector<double>> table;  // table[i][j] = <O_j>(grid[i])
  std::vector<ObservableSummary> summary;
  double signaling_measure = 0.0;          // max_j |derivative_j|
  double max_deviation = 0.0;              // max_j max_deviation_j
  std::optional<SweepResult> sweep;
};

// Step for the slope at zero: 1e-3 times the largest |grid| entry (or 1).
inline double derivative_step(const std::vector<double>& grid) {
  double scale = 0.0;
  for (double g : grid) scale = std::max(scale, std::abs(g));
  if (scale == 0.0) scale = 1.0;
  return 1e-3 * scale;
}

namespace detail {

inline SignalingReport run_impl(const Scenario& s, std::size_t threads) {
  const double h = derivative_step(s.grid);
  // Parameters: baseline, ±h, ±h/2, then the grid.
  std::vector<double> params{0.0, h, -h, 0.5 * h, -0.5 * h};
  params.insert(params.end(), s.grid.begin(), s.grid.end());
  const auto vals = parallel_map<std::vector<double>>(
      params.size(), [&](std::size_t i) { return evaluate(s, s.scheme, params[i]); }, threads);

  SignalingReport r;
  r.scenario = s.name;
  r.system = s.system;
  r.scheme = s.scheme;
  r.scheme_class = scheme_class(s.system, s.scheme);
  r.observables = s.observables;
  r.grid = s.grid;
  r.table.assign(vals.begin() + 5, vals.end());
  for (std::size_t j = 0; j < s.observables.size(); ++j) {
    ObservableSummary o;
    o.name = s.observables[j];
    o.baseline = vals[0][j];
    const double d1 = (vals[1][j] - vals[2][j]) / (2.0 * h);
    const double d2 = (vals[3][j] - vals[4][j]) / h;
    o.derivative = (4.0 * d2 - d1) / 3.0;
    for (const auto& row : r.table) o.max_deviation = std::max(o.max_deviation, std::abs(row[j] - o.baseline));
    r.signaling_measure = std::max(r.signaling_measure, std::abs(o.derivative));
    r.max_deviation = std::max(r.max_deviation, o.max_deviation);
    r.summary.push_back(o);
  }
  return r;
}

inline bool is_integer(double v) { return std::abs(v - std::round(v)) <= 1e-9 * std::max(1.0, std::abs(v)); }

inline std::vector<int> scale_ints(const std::vector<int>& v, double r, const char* what) {
  std::vector<int> out;
  for (int c : v) {
    const double s = c * r;
    if (!is_integer(s)) throw InvalidArgument(std::string(what) + " does not map onto the rescaled lattice");
    out.push_back(static_cast<int>(std::lround(s)));
  }
  return out;
}

}  // namespace detail

inline SignalingReport run_scenario(const Scenario& s) {
  try {
    validate(s);
    return detail::run_impl(s, thread_count());
  } catch (const TruncationError& e) {
    detail::rethrow_with(s, e);
  } catch (const ZeroBranchError& e) {
    detail::rethrow_with(s, e);
  } catch (const InvalidArgument& e) {
    detail::rethrow_with(s, e);
  }
}

// The scenario moved to a new cutoff value.
//   volume:  N -> value at fixed a; positions kept, mode labels scaled so
//            the physical wave-vector is unchanged.
//   spacing: a -> value at fixed L = N a; lattice coordinates scaled so
//            physical positions are unchanged, mode labels kept.
//   S_cut, trunc: replaced.
inline Scenario rescaled(const Scenario& s, SweepAxis axis, double value) {
  Scenario t = s;
  t.sweep.reset();
  auto& f = t.field;
  switch (axis) {
    case SweepAxis::volume: {
      if (!detail::is_integer(value)) throw InvalidArgument("volume sweep values are sites per axis");
      const int N = static_cast<int>(std::lround(value));
      const double r = static_cast<double>(N) / s.field.lattice.N;
      f.lattice.N = N;
      f.p = detail::scale_ints(s.field.p, r, "mode label");
      for (auto& term : f.packet) term.mode = detail::scale_ints(term.mode, r, "packet mode label");
      break;
    }
    case SweepAxis::spacing: {
      const double L = s.field.lattice.N * s.field.lattice.a;
      const double n = L / value;
      if (!detail::is_integer(n)) throw InvalidArgument("spacing does not divide the box length");
      const int N = static_cast<int>(std::lround(n));
      const double r = static_cast<double>(N) / s.field.lattice.N;
      f.lattice.N = N;
      f.lattice.a = value;
      f.x = detail::scale_ints(s.field.x, r, "kick site");
      f.y = detail::scale_ints(s.field.y, r, "observation site");
      break;
    }
    case SweepAxis::s_cut:
      if (!detail::is_integer(value)) throw InvalidArgument("S_cut values must be integers");
      t.oscillator.s_cut = static_cast<int>(std::lround(value));
      break;
    case SweepAxis::trunc:
      if (!detail::is_integer(value) || value < 2) throw InvalidArgument("trunc values must be integers >= 2");
      if (s.system == System::field)
        f.oracle_trunc = static_cast<std::size_t>(std::lround(value));
      else
        t.oscillator.trunc = static_cast<std::size_t>(std::lround(value));
      break;
  }
  return t;
}

namespace detail {

inline double sweep_measure(const Scenario& s, SweepMeasure m) {
  switch (m) {
    case SweepMeasure::derivative: return run_impl(s, 1).signaling_measure;
    case SweepMeasure::deviation: return run_impl(s, 1).max_deviation;
    case SweepMeasure::value: {
      const auto v = evaluate(s, s.scheme, s.grid.back());
      double out = 0.0;
      for (double x : v) out = std::max(out, std::abs(x));
      return out;
    }
    case SweepMeasure::disturbance: {
      const auto after = evaluate(s, s.scheme, s.grid.back());
      const auto before = evaluate(s, "none", s.grid.back());
      double out = 0.0;
      for (std::size_t j = 0; j < after.size(); ++j) out = std::max(out, std::abs(after[j] - before[j]));
      return out;
    }
    case SweepMeasure::max_signal:
      return field::max_signaling(field::build_modes(s.field.lattice), s.field.x).amplitude;
    case SweepMeasure::suppression: {
      const auto ms = field::build_modes(s.field.lattice);
      return field::suppression_factor(ms, {s.field.x, s.grid.back()});
    }
  }
  return 0.0;
}

}  // namespace detail

inline SweepResult cutoff_sweep(const Scenario& s, SweepAxis axis, const std::vector<double>& values,
                                SweepMeasure measure = SweepMeasure::derivative) {
  Scenario probe = s;
  probe.sweep = SweepSpec{axis, values, measure};
  try {
    validate(probe);
    std::vector<Scenario> points;
    for (double v : values) {
      points.push_back(rescaled(s, axis, v));
      validate(points.back());
    }
    const auto m = parallel_map<double>(
        values.size(), [&](std::size_t i) { return detail::sweep_measure(points[i], measure); });
    SweepResult r;
    r.axis = axis;
    r.measure = measure;
    std::vector<double> x, y;
    for (std::size_t i = 0; i < values.size(); ++i) {
      r.points.push_back({values[i], m[i]});
      x.push_back(values[i]);
      y.push_back(m[i]);
    }
    r.loglog = loglog_fit(x, y);
    r.linear = least_squares(x, y);
    // Strict monotonicity in the order of increasing cutoff value.
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
    r.monotone_increasing = r.monotone_decreasing = true;
    for (std::size_t k = 1; k < order.size(); ++k) {
      const double prev = y[order[k - 1]], cur = y[order[k]];
      if (!(cur > prev)) r.monotone_increasing = false;
      if (!(cur < prev)) r.monotone_decreasing = false;
    }
    return r;
  } catch (const TruncationError& e) {
    detail::rethrow_with(s, e);
  } catch (const ZeroBranchError& e) {
    detail::rethrow_with(s, e);
  } catch (const InvalidArgument& e) {
    detail::rethrow_with(s, e);
  }
}

// Runs the scenario and, when it declares a sweep, attaches the fit.
inline SignalingReport run_with_sweep(const Scenario& s) {
  auto r = run_scenario(s);
  if (s.sweep) r.sweep = cutoff_sweep(s, s.sweep->axis, s.sweep->values, s.sweep->measure);
  return r;
}

struct CompareRow {
  std::string scheme;
  std::string observable;
  double parameter = 0.0;
  double before = 0.0;
  double after = 0.0;
  double derivative = 0.0;
};

inline std::vector<CompareRow> compare_schemes(const Scenario& s, const std::vector<std::string>& ids) {
  if (ids.size() < 2) throw InvalidArgument("compare_schemes needs at least two schemes");
  std::vector<CompareRow> rows;
  for (const auto& id : ids) {
    Scenario t = s;
    t.scheme = id;
    t.sweep.reset();
    t.compare.clear();
    const auto rep = run_scenario(t);
    for (std::size_t i = 0; i < s.grid.size(); ++i) {
      const auto before = evaluate(t, "none", s.grid[i]);
      for (std::size_t j = 0; j < s.observables.size(); ++j)
        rows.push_back({id, s.observables[j], s.grid[i], before[j], rep.table[i][j], rep.summary[j].derivative});
    }
  }
  return rows;
}

}  // namespace causal_probe::harness
