#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>

#include "causal_probe/cli.hpp"
#include "cli_runner.hpp"

using namespace causal_probe;
using namespace causal_probe::cli;
using test_support::read_file;
using test_support::run;
namespace fs = std::filesystem;

namespace {

const std::string kDir = CAUSAL_PROBE_SCENARIO_DIR;

std::string scenario(const std::string& name) { return kDir + "/" + name + ".json"; }

fs::path fresh_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("causal_probe_test_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

json minimal_spin() {
  return json::parse(R"({"version": 1, "name": "t", "system": "spin", "scheme": "none",
                         "observables": ["sBz"], "grid": [0.0]})");
}

// Second line of a CSV block, split on commas.
std::vector<std::string> first_row(const std::string& csv) {
  const auto a = csv.find('\n');
  const auto b = csv.find('\n', a + 1);
  return cli::detail::split(csv.substr(a + 1, b - a - 1), ',');
}

}  // namespace

TEST(Format, SeventeenSignificantDigits) {
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(format_double(1.0), "1");
  EXPECT_EQ(format_double(-0.25), "-0.25");
  EXPECT_EQ(std::stod(format_double(M_PI)), M_PI);
}

TEST(Format, CsvUsesLineFeedsAndQuotes) {
  Table t{"x", {"a", "b"}, {{"1", "has,comma"}, {"2", "q\"uote"}}};
  EXPECT_EQ(t.to_csv(), "a,b\n1,\"has,comma\"\n2,\"q\"\"uote\"\n");
}

TEST(Digest, KnownFnvValues) {
  EXPECT_EQ(fnv1a64(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a64("a"), "af63dc4c8601ec8c");
}

TEST(Digest, IndependentOfKeyOrderAndDefaults) {
  const auto a = scenario_from_json(json::parse(
      R"({"version":1,"name":"k","system":"spin","scheme":"none","observables":["sBz"],"grid":[0]})"));
  const auto b = scenario_from_json(json::parse(
      R"({"grid":[0],"observables":["sBz"],"scheme":"none","system":"spin","name":"k","version":1,
          "spin":{"hbar":1.0,"state":["up","up"]}})"));
  EXPECT_EQ(scenario_digest(a), scenario_digest(b));
  auto c = a;
  c.grid = {0.5};
  EXPECT_NE(scenario_digest(a), scenario_digest(c));
}

TEST(Json, RangeGridExpands) {
  auto j = minimal_spin();
  j["grid"] = {{"start", 0.0}, {"stop", 1.0}, {"count", 5}};
  const auto s = scenario_from_json(j);
  ASSERT_EQ(s.grid.size(), 5u);
  EXPECT_DOUBLE_EQ(s.grid[2], 0.5);
}

TEST(Json, StrictParsingRejectsMalformedScenarios) {
  EXPECT_NO_THROW(scenario_from_json(minimal_spin()));
  auto j = minimal_spin();
  j.erase("version");
  EXPECT_THROW(scenario_from_json(j), InvalidArgument);
  j = minimal_spin();
  j["version"] = 2;
  EXPECT_THROW(scenario_from_json(j), InvalidArgument);
  j = minimal_spin();
  j["colour"] = "blue";
  EXPECT_THROW(scenario_from_json(j), InvalidArgument);
  j = minimal_spin();
  j["field"] = json::object();
  EXPECT_THROW(scenario_from_json(j), InvalidArgument);
  j = minimal_spin();
  j["grid"] = "zero";
  EXPECT_THROW(scenario_from_json(j), InvalidArgument);
  j = minimal_spin();
  j["spin"] = {{"axis", {0, 1}}};
  EXPECT_THROW(scenario_from_json(j), InvalidArgument);
  j = minimal_spin();
  j["spin"] = {{"spin_up", true}};
  EXPECT_THROW(scenario_from_json(j), InvalidArgument);
}

TEST(Json, CorpusRoundTrips) {
  for (const auto& e : fs::directory_iterator(kDir)) {
    const auto s = load_scenario(e.path().string());
    const auto back = scenario_from_json(scenario_to_json(s));
    EXPECT_EQ(scenario_to_json(back), scenario_to_json(s)) << e.path();
    EXPECT_EQ(scenario_digest(back), scenario_digest(s)) << e.path();
  }
}

TEST(Cli, SpinQndsvFromFlags) {
  const auto r = run({"spin", "qndsv", "--state", "right,up", "--target", "up,right", "--grid", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "parameter,sBz");
  const auto row = first_row(r.out);
  EXPECT_EQ(row[0], "0");
  EXPECT_NEAR(std::stod(row[1]), 0.25, 1e-12);
  EXPECT_EQ(r.out.find('\r'), std::string::npos);
}

TEST(Cli, AliceRotationFlag) {
  const auto r = run({"spin", "qndsv", "--target", "up,right", "--alice", "rotate-y:1.5707963267948966"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(std::stod(first_row(r.out)[1]), 0.25, 1e-12);
}

TEST(Cli, NaturalUnitsOverridesHbar) {
  const auto scaled = run({"spin", "Sz-standard", "--hbar", "2"});
  const auto natural = run({"spin", "Sz-standard", "--hbar", "2", "--natural-units"});
  ASSERT_EQ(scaled.code, 0);
  ASSERT_EQ(natural.code, 0);
  EXPECT_EQ(first_row(scaled.out)[1], "1");
  EXPECT_EQ(first_row(natural.out)[1], "0.5");
}

TEST(Cli, OscillatorAndFieldFromFlags) {
  const auto ho = run({"ho", "naive", "--lambda", "0.4", "--obs", "PB"});
  ASSERT_EQ(ho.code, 0) << ho.err;
  EXPECT_NEAR(std::stod(first_row(ho.out)[1]), -0.2, 1e-8);
  const auto fld = run({"field", "packet", "--N", "4", "--packet", "1:1;3:0.5:0.5", "--obs", "phi"});
  ASSERT_EQ(fld.code, 0) << fld.err;
  EXPECT_EQ(first_row(fld.out).size(), 2u);
}

TEST(Cli, ScenarioFileWithOverride) {
  const auto r = run({"spin", "--scenario", scenario("spin_s2_standard"), "--grid", "0,3.141592653589793"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("scheme,class,observable"), std::string::npos);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run({"spin", "S2-bell", "--bogus"}).code, ExitCode::kUsage);
  EXPECT_EQ(run({"teleport"}).code, ExitCode::kUsage);
  EXPECT_EQ(run({}).code, ExitCode::kUsage);
  EXPECT_EQ(run({"spin", "phase"}).code, ExitCode::kInvalid);
  EXPECT_EQ(run({"spin"}).code, ExitCode::kInvalid);
  EXPECT_EQ(run({"ho", "--scenario", scenario("spin_s2_bell")}).code, ExitCode::kInvalid);
  EXPECT_EQ(run({"field", "qndsv", "--N", "5"}).code, ExitCode::kInvalid);
  EXPECT_EQ(run({"validate", kDir + "/missing.json"}).code, ExitCode::kInvalid);
  const auto trunc = run({"ho", "naive", "--lambda", "20", "--trunc", "10"});
  EXPECT_EQ(trunc.code, ExitCode::kNumeric);
  EXPECT_NE(trunc.err.find("numeric policy"), std::string::npos);
}

TEST(Cli, RealBinaryExitCodes) {
  const std::string bin = CAUSAL_PROBE_BINARY;
  auto status = [&](const std::string& args) {
    const int raw = std::system((bin + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  EXPECT_EQ(status("spin S2-bell --no-such-flag"), 64);
  EXPECT_EQ(status("spin S2-bell"), 0);
  EXPECT_EQ(status("validate " + scenario("field_naive")), 0);
  EXPECT_EQ(status("ho naive --lambda 20 --trunc 10"), 3);
}

TEST(Cli, ValidateCorpus) {
  std::vector<std::string> args{"validate"};
  for (const auto& e : fs::directory_iterator(kDir)) args.push_back(e.path().string());
  const auto r = run(args);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(static_cast<std::size_t>(std::count(r.out.begin(), r.out.end(), '\n')), args.size() - 1);
}

TEST(Cli, OutputDirectoryAndManifest) {
  const auto dir = fresh_dir("out");
  ::setenv("CAUSAL_PROBE_THREADS", "2", 1);
  const auto r = run({"sweep", scenario("field_naive_volume_sweep"), "--out", dir.string()});
  ::unsetenv("CAUSAL_PROBE_THREADS");
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* t : {"table", "summary", "sweep", "fit"})
    EXPECT_TRUE(fs::exists(dir / (std::string("field_naive_volume_sweep_") + t + ".csv"))) << t;
  const auto m = json::parse(read_file((dir / "field_naive_volume_sweep_manifest.json").string()));
  const auto s = load_scenario(scenario("field_naive_volume_sweep"));
  EXPECT_EQ(m.at("scenario_digest"), scenario_digest(s));
  EXPECT_EQ(m.at("scenario_canonical"), scenario_to_json(s));
  EXPECT_EQ(m.at("threads"), 2);
  EXPECT_EQ(m.at("command"), "sweep");
  EXPECT_EQ(m.at("tool_version"), kToolVersion);
  EXPECT_NE(r.out.find(scenario_digest(s)), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, SweepOverridesFromFlags) {
  const auto r = run({"sweep", scenario("field_qndsv"), "--axis", "volume", "--values", "8,16,32"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("loglog_exponent"), std::string::npos);
  EXPECT_EQ(run({"sweep", scenario("field_qndsv")}).code, ExitCode::kInvalid);
}

TEST(Cli, CompareSubcommand) {
  const auto r = run({"compare", scenario("spin_s2_bell"), "--schemes", "S2-bell,S2-standard"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "scheme,observable,parameter,before,after,derivative");
  EXPECT_EQ(run({"compare", scenario("spin_s2_bell")}).code, ExitCode::kInvalid);
}

TEST(Cli, RerunsAreByteIdentical) {
  const auto a = fresh_dir("a"), b = fresh_dir("b");
  for (const auto& d : {a, b}) ASSERT_EQ(run({"ho", "--scenario", scenario("ho_phase_compare"), "--out", d.string()}).code, 0);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    if (e.path().extension() != ".csv") continue;
    ++files;
    EXPECT_EQ(read_file(e.path().string()), read_file((b / e.path().filename()).string())) << e.path();
  }
  EXPECT_EQ(files, 3u);
  fs::remove_all(a);
  fs::remove_all(b);
}
