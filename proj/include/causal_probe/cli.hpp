#pragma once

// causal-probe command line: scenario JSON in, CSV tables and a JSON run
// manifest out. Exit codes: 0 success, 2 invalid input, 3 numeric-policy
// violation, 64 usage error.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "causal_probe/harness.hpp"

namespace causal_probe::cli {

using nlohmann::json;
using harness::Scenario;
using harness::System;

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kScenarioVersion = 1;

enum ExitCode : int { kOk = 0, kFailure = 1, kInvalid = 2, kNumeric = 3, kUsage = 64 };

// ------------------------------------------------------------------ formatting

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

struct Table {
  std::string name;  // file suffix, e.g. "table" or "summary"
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += csv_field(cells[i]);
      }
      out += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
  }
};

// FNV-1a, 64 bit, as 16 hex digits.
inline std::string fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ------------------------------------------------------------------ JSON schema

namespace detail {

inline void require_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw InvalidArgument(where + " must be a JSON object");
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k)) throw InvalidArgument("unknown key '" + k + "' in " + where);
}

template <class T>
T get(const json& obj, const std::string& key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidArgument("bad or missing '" + key + "' in " + where + ": " + e.what());
  }
}

template <class T>
void get_opt(const json& obj, const std::string& key, T& out, const std::string& where) {
  if (obj.contains(key)) out = get<T>(obj, key, where);
}

inline std::vector<double> parse_grid(const json& g) {
  if (g.is_array()) {
    try {
      return g.get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw InvalidArgument(std::string("grid must hold numbers: ") + e.what());
    }
  }
  require_keys(g, {"start", "stop", "count"}, "grid");
  const double a = get<double>(g, "start", "grid");
  const double b = get<double>(g, "stop", "grid");
  const int n = get<int>(g, "count", "grid");
  if (n < 1) throw InvalidArgument("grid count must be positive");
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(n == 1 ? a : a + (b - a) * i / (n - 1));
  return out;
}

inline std::pair<std::string, std::string> label_pair(const json& j, const std::string& where) {
  std::vector<std::string> v;
  try {
    v = j.get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw InvalidArgument(where + " must be a list of labels: " + e.what());
  }
  if (v.size() != 2) throw InvalidArgument(where + " needs two labels [A, B]");
  return {v[0], v[1]};
}

}  // namespace detail

inline Scenario scenario_from_json(const json& j) {
  using namespace detail;
  require_keys(j, {"version", "name", "system", "scheme", "observables", "grid", "spin", "oscillator", "field",
                   "sweep", "compare"},
               "scenario");
  if (!j.contains("version")) throw InvalidArgument("scenario lacks a 'version' field");
  const int version = get<int>(j, "version", "scenario");
  if (version != kScenarioVersion)
    throw InvalidArgument("unsupported scenario version " + std::to_string(version));
  Scenario s;
  get_opt(j, "name", s.name, "scenario");
  s.system = harness::parse_system(get<std::string>(j, "system", "scenario"));
  s.scheme = get<std::string>(j, "scheme", "scenario");
  s.observables = get<std::vector<std::string>>(j, "observables", "scenario");
  if (!j.contains("grid")) throw InvalidArgument("scenario lacks a 'grid'");
  s.grid = parse_grid(j.at("grid"));
  get_opt(j, "compare", s.compare, "scenario");

  const char* section = harness::to_string(s.system);
  for (const char* other : {"spin", "oscillator", "field"})
    if (std::string(other) != section && j.contains(other))
      throw InvalidArgument(std::string("section '") + other + "' does not belong to a " + section + " scenario");

  if (s.system == System::spin && j.contains("spin")) {
    const auto& o = j.at("spin");
    require_keys(o, {"state", "target", "axis", "hbar"}, "spin");
    if (o.contains("state")) std::tie(s.spin.state_a, s.spin.state_b) = label_pair(o.at("state"), "spin.state");
    if (o.contains("target")) s.spin.target = label_pair(o.at("target"), "spin.target");
    if (o.contains("axis")) {
      const auto ax = get<std::vector<double>>(o, "axis", "spin");
      if (ax.size() != 3) throw InvalidArgument("spin.axis needs three components");
      s.spin.axis = {ax[0], ax[1], ax[2]};
    }
    get_opt(o, "hbar", s.spin.hbar, "spin");
  }
  if (s.system == System::oscillator && j.contains("oscillator")) {
    const auto& o = j.at("oscillator");
    require_keys(o, {"mass", "omega", "hbar", "p_A", "p_B", "trunc", "s_cut"}, "oscillator");
    auto& os = s.oscillator;
    get_opt(o, "mass", os.params.mass, "oscillator");
    get_opt(o, "omega", os.params.omega, "oscillator");
    get_opt(o, "hbar", os.params.hbar, "oscillator");
    get_opt(o, "p_A", os.p_A, "oscillator");
    get_opt(o, "p_B", os.p_B, "oscillator");
    get_opt(o, "trunc", os.trunc, "oscillator");
    get_opt(o, "s_cut", os.s_cut, "oscillator");
  }
  if (s.system == System::field && j.contains("field")) {
    const auto& o = j.at("field");
    require_keys(o, {"d", "N", "a", "mass", "hbar", "dispersion", "regulator", "x", "y", "p", "packet", "t1",
                     "oracle_trunc"},
                 "field");
    auto& f = s.field;
    get_opt(o, "d", f.lattice.d, "field");
    get_opt(o, "N", f.lattice.N, "field");
    get_opt(o, "a", f.lattice.a, "field");
    get_opt(o, "mass", f.lattice.mass, "field");
    get_opt(o, "hbar", f.lattice.hbar, "field");
    if (o.contains("dispersion")) f.lattice.dispersion = field::parse_dispersion(get<std::string>(o, "dispersion", "field"));
    if (o.contains("regulator")) f.lattice.zero_mode_regulator = get<double>(o, "regulator", "field");
    get_opt(o, "x", f.x, "field");
    get_opt(o, "y", f.y, "field");
    get_opt(o, "p", f.p, "field");
    get_opt(o, "t1", f.t1, "field");
    if (o.contains("oracle_trunc")) f.oracle_trunc = get<std::size_t>(o, "oracle_trunc", "field");
    if (o.contains("packet")) {
      const auto& arr = o.at("packet");
      if (!arr.is_array()) throw InvalidArgument("field.packet must be an array");
      for (const auto& t : arr) {
        require_keys(t, {"mode", "re", "im"}, "field.packet entry");
        harness::PacketTerm term;
        term.mode = get<std::vector<int>>(t, "mode", "field.packet entry");
        double re = 0.0, im = 0.0;
        get_opt(t, "re", re, "field.packet entry");
        get_opt(t, "im", im, "field.packet entry");
        term.amplitude = cplx(re, im);
        f.packet.push_back(term);
      }
    }
  }
  if (j.contains("sweep")) {
    const auto& o = j.at("sweep");
    require_keys(o, {"axis", "values", "measure"}, "sweep");
    harness::SweepSpec sw;
    sw.axis = harness::parse_axis(get<std::string>(o, "axis", "sweep"));
    sw.values = get<std::vector<double>>(o, "values", "sweep");
    if (o.contains("measure")) sw.measure = harness::parse_measure(get<std::string>(o, "measure", "sweep"));
    s.sweep = sw;
  }
  return s;
}

// Canonical form: every field explicit, grid expanded. Object keys are
// sorted on dump, so the digest ignores key order in the source file.
inline json scenario_to_json(const Scenario& s) {
  json j;
  j["version"] = kScenarioVersion;
  j["name"] = s.name;
  j["system"] = harness::to_string(s.system);
  j["scheme"] = s.scheme;
  j["observables"] = s.observables;
  j["grid"] = s.grid;
  if (!s.compare.empty()) j["compare"] = s.compare;
  switch (s.system) {
    case System::spin: {
      json o;
      o["state"] = {s.spin.state_a, s.spin.state_b};
      if (s.spin.target) o["target"] = {s.spin.target->first, s.spin.target->second};
      o["axis"] = {s.spin.axis[0], s.spin.axis[1], s.spin.axis[2]};
      o["hbar"] = s.spin.hbar;
      j["spin"] = o;
      break;
    }
    case System::oscillator: {
      const auto& os = s.oscillator;
      j["oscillator"] = {{"mass", os.params.mass}, {"omega", os.params.omega}, {"hbar", os.params.hbar},
                         {"p_A", os.p_A},          {"p_B", os.p_B},           {"trunc", os.trunc},
                         {"s_cut", os.s_cut}};
      break;
    }
    case System::field: {
      const auto& f = s.field;
      json o = {{"d", f.lattice.d},       {"N", f.lattice.N}, {"a", f.lattice.a},
                {"mass", f.lattice.mass}, {"hbar", f.lattice.hbar},
                {"dispersion", field::to_string(f.lattice.dispersion)},
                {"x", f.x},               {"y", f.y},         {"p", f.p}, {"t1", f.t1}};
      if (f.lattice.zero_mode_regulator) o["regulator"] = *f.lattice.zero_mode_regulator;
      if (f.oracle_trunc) o["oracle_trunc"] = *f.oracle_trunc;
      if (!f.packet.empty()) {
        json arr = json::array();
        for (const auto& t : f.packet) arr.push_back({{"mode", t.mode}, {"re", t.amplitude.real()}, {"im", t.amplitude.imag()}});
        o["packet"] = arr;
      }
      j["field"] = o;
      break;
    }
  }
  if (s.sweep)
    j["sweep"] = {{"axis", harness::to_string(s.sweep->axis)},
                  {"values", s.sweep->values},
                  {"measure", harness::to_string(s.sweep->measure)}};
  return j;
}

inline std::string scenario_digest(const Scenario& s) { return fnv1a64(scenario_to_json(s).dump()); }

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open scenario file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidArgument("scenario '" + path + "' is not valid JSON: " + e.what());
  }
  return scenario_from_json(j);
}

// ------------------------------------------------------------------ tables

inline Table value_table(const harness::SignalingReport& r) {
  Table t{"table", {"parameter"}, {}};
  for (const auto& o : r.observables) t.header.push_back(o);
  for (std::size_t i = 0; i < r.grid.size(); ++i) {
    std::vector<std::string> row{format_double(r.grid[i])};
    for (double v : r.table[i]) row.push_back(format_double(v));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline Table summary_table(const harness::SignalingReport& r) {
  Table t{"summary", {"scheme", "class", "observable", "baseline", "derivative", "max_deviation"}, {}};
  for (const auto& o : r.summary)
    t.rows.push_back({r.scheme, r.scheme_class, o.name, format_double(o.baseline), format_double(o.derivative),
                      format_double(o.max_deviation)});
  return t;
}

inline Table sweep_table(const harness::SweepResult& s) {
  Table t{"sweep", {"axis", "cutoff", "measure_kind", "measure"}, {}};
  for (const auto& p : s.points)
    t.rows.push_back({harness::to_string(s.axis), format_double(p.cutoff), harness::to_string(s.measure),
                      format_double(p.measure)});
  return t;
}

inline Table fit_table(const harness::SweepResult& s) {
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  return {"fit",
          {"axis", "measure_kind", "loglog_exponent", "loglog_intercept", "loglog_r2", "linear_slope",
           "linear_intercept", "linear_r2", "monotone_increasing", "monotone_decreasing"},
          {{harness::to_string(s.axis), harness::to_string(s.measure),
            s.loglog.valid ? format_double(s.loglog.slope) : "nan",
            s.loglog.valid ? format_double(s.loglog.intercept) : "nan",
            s.loglog.valid ? format_double(s.loglog.r2) : "nan", format_double(s.linear.slope),
            format_double(s.linear.intercept), format_double(s.linear.r2), b(s.monotone_increasing),
            b(s.monotone_decreasing)}}};
}

inline Table compare_table(const std::vector<harness::CompareRow>& rows) {
  Table t{"compare", {"scheme", "observable", "parameter", "before", "after", "derivative"}, {}};
  for (const auto& r : rows)
    t.rows.push_back({r.scheme, r.observable, format_double(r.parameter), format_double(r.before),
                      format_double(r.after), format_double(r.derivative)});
  return t;
}

enum class Mode { run, sweep, compare };

// Tables produced for a scenario. run: values and summary, plus sweep and
// comparison tables when the scenario declares them.
inline std::vector<Table> execute(const Scenario& s, Mode mode) {
  std::vector<Table> out;
  if (mode == Mode::compare) {
    if (s.compare.size() < 2) throw InvalidArgument("compare needs at least two schemes");
    harness::validate(s);
    out.push_back(compare_table(harness::compare_schemes(s, s.compare)));
    return out;
  }
  if (mode == Mode::sweep && !s.sweep) throw InvalidArgument("scenario declares no sweep; pass --axis and --values");
  const auto r = harness::run_with_sweep(s);
  out.push_back(value_table(r));
  out.push_back(summary_table(r));
  if (r.sweep) {
    out.push_back(sweep_table(*r.sweep));
    out.push_back(fit_table(*r.sweep));
  }
  if (mode == Mode::run && s.compare.size() >= 2) out.push_back(compare_table(harness::compare_schemes(s, s.compare)));
  return out;
}

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline json policy_json() {
  const auto& p = numeric_policy();
  return {{"structural_tol", p.structural_tol},
          {"exact_tol", p.exact_tol},
          {"tail_tol", p.tail_tol},
          {"zero_probability", p.zero_probability},
          {"schmidt_tol", p.schmidt_tol}};
}

inline void write_file(const std::filesystem::path& p, const std::string& data) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write '" + p.string() + "'");
  f << data;
}

// Writes tables and manifest under `dir`, or prints the tables to `out`
// separated by blank lines when `dir` is empty.
inline void emit(const Scenario& s, const std::string& command, const std::vector<Table>& tables,
                 const std::string& dir, double elapsed, std::ostream& out) {
  if (dir.empty()) {
    for (std::size_t i = 0; i < tables.size(); ++i) {
      if (i) out << '\n';
      out << tables[i].to_csv();
    }
    return;
  }
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  json outputs = json::object();
  for (const auto& t : tables) {
    const fs::path p = fs::path(dir) / (s.name + "_" + t.name + ".csv");
    write_file(p, t.to_csv());
    outputs[t.name] = p.string();
    out << "wrote " << p.string() << " (" << t.rows.size() << " rows)\n";
  }
  json m = {{"tool", "causal-probe"},
            {"tool_version", kToolVersion},
            {"command", command},
            {"scenario", s.name},
            {"scenario_digest", scenario_digest(s)},
            {"scenario_canonical", scenario_to_json(s)},
            {"numeric_policy", policy_json()},
            {"threads", harness::thread_count()},
            {"wall_clock", {{"finished_utc", utc_now()}, {"elapsed_seconds", elapsed}}},
            {"outputs", outputs}};
  const fs::path mp = fs::path(dir) / (s.name + "_manifest.json");
  write_file(mp, m.dump(2) + "\n");
  out << "wrote " << mp.string() << "\n";
  out << "scenario " << s.name << " digest " << scenario_digest(s) << "\n";
}

// ------------------------------------------------------------------ argv

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

inline double to_number(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument("bad number '" + s + "' for " + what);
  }
}

inline std::vector<int> int_list(const std::string& s, const std::string& what) {
  std::vector<int> out;
  for (const auto& t : split(s, ',')) {
    const double v = to_number(t, what);
    if (v != std::floor(v)) throw InvalidArgument(what + " entries must be integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

inline std::vector<double> number_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& t : split(s, ',')) out.push_back(to_number(t, what));
  return out;
}

inline std::pair<std::string, std::string> pair_arg(const std::string& s, const std::string& what) {
  const auto v = split(s, ',');
  if (v.size() != 2) throw InvalidArgument(what + " expects two labels A,B");
  return {v[0], v[1]};
}

// rotate-x:ANGLE, rotate-y:ANGLE, rotate-z:ANGLE
inline void parse_alice(const std::string& s, Scenario& sc) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw InvalidArgument("--alice expects rotate-<axis>:<angle>");
  const std::string kind = s.substr(0, colon);
  if (kind == "rotate-x") sc.spin.axis = {1, 0, 0};
  else if (kind == "rotate-y") sc.spin.axis = {0, 1, 0};
  else if (kind == "rotate-z") sc.spin.axis = {0, 0, 1};
  else throw InvalidArgument("unknown Alice operation '" + kind + "'");
  sc.grid = {to_number(s.substr(colon + 1), "--alice angle")};
}

// "j:re[:im];j:re[:im]" with multi-axis labels written j1/j2/j3.
inline std::vector<harness::PacketTerm> parse_packet(const std::string& s) {
  std::vector<harness::PacketTerm> out;
  for (const auto& term : split(s, ';')) {
    const auto f = split(term, ':');
    if (f.size() < 2 || f.size() > 3) throw InvalidArgument("packet terms look like mode:re[:im]");
    harness::PacketTerm t;
    for (const auto& c : split(f[0], '/')) t.mode.push_back(static_cast<int>(to_number(c, "packet mode")));
    t.amplitude = cplx(to_number(f[1], "packet re"), f.size() == 3 ? to_number(f[2], "packet im") : 0.0);
    out.push_back(t);
  }
  return out;
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"causal-probe: no-signalling diagnostics for nonlocal measurement schemes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("causal-probe ") + kToolVersion);

  std::string out_dir;
  bool natural = false;
  auto add_common = [&](CLI::App* c) {
    c->add_option("--out", out_dir, "Directory for CSV tables and the run manifest");
    c->add_flag("--natural-units", natural, "Set hbar = 1");
  };

  // Raw string flags; applied on top of a scenario file when both are given.
  std::string scenario_file, scheme, obs, grid, name;
  // spin
  std::string state, target, alice, hbar;
  auto* spin_cmd = app.add_subcommand("spin", "Two spin-1/2 particles");
  add_common(spin_cmd);
  spin_cmd->add_option("scheme", scheme, "none | qndsv | S2-standard | S2-bell | S2-luders | Sz-standard | Sz-bell | Sz-luders");
  spin_cmd->add_option("--scenario", scenario_file, "Scenario JSON file");
  spin_cmd->add_option("--name", name, "Scenario name");
  spin_cmd->add_option("--state", state, "Pre-state labels A,B (up/down/right/left)");
  spin_cmd->add_option("--target", target, "QNDSV target labels A,B");
  spin_cmd->add_option("--alice", alice, "Alice rotation rotate-{x,y,z}:ANGLE");
  spin_cmd->add_option("--grid", grid, "Comma-separated parameter grid");
  spin_cmd->add_option("--obs", obs, "Comma-separated observables");
  spin_cmd->add_option("--hbar", hbar, "Reduced Planck constant");

  // oscillator
  std::string pA, pB, lambda, trunc, s_cut, mass, omega;
  auto* ho_cmd = app.add_subcommand("ho", "Two harmonic oscillators");
  add_common(ho_cmd);
  ho_cmd->add_option("scheme", scheme, "none | naive | phase");
  ho_cmd->add_option("--scenario", scenario_file, "Scenario JSON file");
  ho_cmd->add_option("--name", name, "Scenario name");
  ho_cmd->add_option("--pA", pA, "Initial momentum kick of A");
  ho_cmd->add_option("--pB", pB, "Initial momentum kick of B");
  ho_cmd->add_option("--lambda", lambda, "Alice kick strength");
  ho_cmd->add_option("--grid", grid, "Comma-separated kick grid");
  ho_cmd->add_option("--trunc", trunc, "Fock truncation per mode");
  ho_cmd->add_option("--s-cut", s_cut, "Phase-state cutoff S (even)");
  ho_cmd->add_option("--mass", mass, "Oscillator mass");
  ho_cmd->add_option("--omega", omega, "Oscillator frequency");
  ho_cmd->add_option("--hbar", hbar, "Reduced Planck constant");
  ho_cmd->add_option("--obs", obs, "Comma-separated observables (QB,PB,QB2,PB2,EB)");

  // field
  std::string d, N, a, dispersion, regulator, x, y, p_index, t1, packet, oracle_trunc;
  auto* field_cmd = app.add_subcommand("field", "Lattice scalar field");
  add_common(field_cmd);
  field_cmd->add_option("scheme", scheme, "none | naive | qndsv | packet");
  field_cmd->add_option("--scenario", scenario_file, "Scenario JSON file");
  field_cmd->add_option("--name", name, "Scenario name");
  field_cmd->add_option("--d", d, "Spatial dimension");
  field_cmd->add_option("--N", N, "Sites per axis (even)");
  field_cmd->add_option("--a", a, "Lattice spacing");
  field_cmd->add_option("--mass", mass, "Field mass");
  field_cmd->add_option("--hbar", hbar, "Reduced Planck constant");
  field_cmd->add_option("--dispersion", dispersion, "lattice | continuum");
  field_cmd->add_option("--regulator", regulator, "Zero-mode frequency for a massless field");
  field_cmd->add_option("--x", x, "Kick site, comma-separated coordinates");
  field_cmd->add_option("--y", y, "Observation site, comma-separated coordinates");
  field_cmd->add_option("--p-index", p_index, "Measured mode label, comma-separated");
  field_cmd->add_option("--lambda", lambda, "Kick strength");
  field_cmd->add_option("--grid", grid, "Comma-separated kick grid");
  field_cmd->add_option("--t1", t1, "Measurement time for packets");
  field_cmd->add_option("--packet", packet, "Packet terms mode:re[:im];...");
  field_cmd->add_option("--oracle-trunc", oracle_trunc, "Use the truncated-Fock oracle with this truncation");
  field_cmd->add_option("--obs", obs, "Comma-separated observables (phi,pi,phi2,pi2)");

  std::string axis, values, measure;
  auto* sweep_cmd = app.add_subcommand("sweep", "Cutoff sweep of a scenario");
  add_common(sweep_cmd);
  sweep_cmd->add_option("scenario", scenario_file, "Scenario JSON file")->required();
  sweep_cmd->add_option("--axis", axis, "volume | spacing | S_cut | trunc");
  sweep_cmd->add_option("--values", values, "Comma-separated cutoff values");
  sweep_cmd->add_option("--measure", measure, "derivative | deviation | disturbance | value | max_signal | suppression");

  std::string schemes;
  auto* compare_cmd = app.add_subcommand("compare", "Side-by-side schemes for one scenario");
  add_common(compare_cmd);
  compare_cmd->add_option("scenario", scenario_file, "Scenario JSON file")->required();
  compare_cmd->add_option("--schemes", schemes, "Comma-separated scheme ids");

  std::vector<std::string> validate_files;
  auto* validate_cmd = app.add_subcommand("validate", "Parse and validate scenario files");
  validate_cmd->add_option("files", validate_files, "Scenario JSON files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << "causal-probe " << kToolVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  const auto started = std::chrono::steady_clock::now();
  try {
    if (validate_cmd->parsed()) {
      for (const auto& f : validate_files) {
        const auto s = load_scenario(f);
        harness::validate(s);
        out << "ok " << f << " (" << s.name << ", digest " << scenario_digest(s) << ")\n";
      }
      return kOk;
    }

    Scenario s;
    System sys = System::spin;
    CLI::App* cmd = nullptr;
    Mode mode = Mode::run;
    if (spin_cmd->parsed()) {
      cmd = spin_cmd;
      sys = System::spin;
    } else if (ho_cmd->parsed()) {
      cmd = ho_cmd;
      sys = System::oscillator;
    } else if (field_cmd->parsed()) {
      cmd = field_cmd;
      sys = System::field;
    } else if (sweep_cmd->parsed()) {
      cmd = sweep_cmd;
      mode = Mode::sweep;
    } else {
      cmd = compare_cmd;
      mode = Mode::compare;
    }

    if (!scenario_file.empty()) {
      s = load_scenario(scenario_file);
      if (mode == Mode::run && s.system != sys)
        throw InvalidArgument(std::string("scenario is a ") + harness::to_string(s.system) + " scenario, not " +
                              harness::to_string(sys));
    } else {
      s.system = sys;
      s.name = cmd->get_name();
      s.observables = harness::observable_names(sys);
      if (sys == System::spin) s.observables = {"sBz"};
      s.grid = {sys == System::spin ? 0.0 : 0.3};
    }
    auto given = [&](const char* opt) {
      const auto* o = cmd->get_option_no_throw(opt);
      return o != nullptr && o->count() > 0;
    };
    using namespace detail;
    if (mode == Mode::run) {
      if (given("scheme")) s.scheme = scheme;
      if (given("--name")) s.name = name;
      if (given("--obs")) s.observables = split(obs, ',');
      if (given("--grid")) s.grid = number_list(grid, "--grid");
      if (given("--lambda")) s.grid = {to_number(lambda, "--lambda")};
      const double hb = given("--hbar") ? to_number(hbar, "--hbar") : 0.0;
      if (sys == System::spin) {
        if (given("--state")) std::tie(s.spin.state_a, s.spin.state_b) = pair_arg(state, "--state");
        if (given("--target")) s.spin.target = pair_arg(target, "--target");
        if (given("--alice")) parse_alice(alice, s);
        if (given("--hbar")) s.spin.hbar = hb;
      } else if (sys == System::oscillator) {
        auto& os = s.oscillator;
        if (given("--pA")) os.p_A = to_number(pA, "--pA");
        if (given("--pB")) os.p_B = to_number(pB, "--pB");
        if (given("--trunc")) os.trunc = static_cast<std::size_t>(to_number(trunc, "--trunc"));
        if (given("--s-cut")) os.s_cut = static_cast<int>(to_number(s_cut, "--s-cut"));
        if (given("--mass")) os.params.mass = to_number(mass, "--mass");
        if (given("--omega")) os.params.omega = to_number(omega, "--omega");
        if (given("--hbar")) os.params.hbar = hb;
      } else {
        auto& f = s.field;
        if (given("--d")) f.lattice.d = static_cast<int>(to_number(d, "--d"));
        if (given("--N")) f.lattice.N = static_cast<int>(to_number(N, "--N"));
        if (given("--a")) f.lattice.a = to_number(a, "--a");
        if (given("--mass")) f.lattice.mass = to_number(mass, "--mass");
        if (given("--hbar")) f.lattice.hbar = hb;
        if (given("--dispersion")) f.lattice.dispersion = field::parse_dispersion(dispersion);
        if (given("--regulator")) f.lattice.zero_mode_regulator = to_number(regulator, "--regulator");
        if (given("--x")) f.x = int_list(x, "--x");
        if (given("--y")) f.y = int_list(y, "--y");
        if (given("--p-index")) f.p = int_list(p_index, "--p-index");
        if (given("--t1")) f.t1 = to_number(t1, "--t1");
        if (given("--packet")) f.packet = parse_packet(packet);
        if (given("--oracle-trunc")) f.oracle_trunc = static_cast<std::size_t>(to_number(oracle_trunc, "--oracle-trunc"));
      }
      if (scenario_file.empty() && !given("scheme")) throw InvalidArgument("a scheme id or --scenario is required");
    } else if (mode == Mode::sweep) {
      if (given("--axis") || given("--values") || given("--measure")) {
        harness::SweepSpec sw = s.sweep.value_or(harness::SweepSpec{});
        if (given("--axis")) sw.axis = harness::parse_axis(axis);
        if (given("--values")) sw.values = number_list(values, "--values");
        if (given("--measure")) sw.measure = harness::parse_measure(measure);
        s.sweep = sw;
      }
    } else if (given("--schemes")) {
      s.compare = split(schemes, ',');
    }
    if (natural) {
      s.spin.hbar = 1.0;
      s.oscillator.params.hbar = 1.0;
      s.field.lattice.hbar = 1.0;
    }
    harness::validate(s);
    const auto tables = execute(s, mode);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    emit(s, cmd->get_name(), tables, out_dir, elapsed, out);
    return kOk;
  } catch (const TruncationError& e) {
    err << "numeric policy violation: " << e.what() << "\n";
    return kNumeric;
  } catch (const ZeroBranchError& e) {
    err << "numeric policy violation: " << e.what() << "\n";
    return kNumeric;
  } catch (const InvalidArgument& e) {
    err << "invalid input: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace causal_probe::cli
