#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>

#include "pwlab/scenario.hpp"
#include "support.hpp"

using namespace pwlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("pwlab_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ConfigError);
    return e.what();
  }
  ADD_FAILURE() << "config accepted: " << text;
  return {};
}

ScenarioConfig small_config() {
  ScenarioConfig c;
  c.domain.n_modes = 32;
  c.t_end = 5.0;
  c.ground_state.certify_trials = 50;
  return c;
}

}  // namespace

TEST(Config, DefaultsFromEmptyObject) {
  const auto c = parse_config("{}");
  EXPECT_EQ(c, ScenarioConfig{});
  EXPECT_EQ(c.domain.n_modes, 128);
  EXPECT_EQ(c.dt, 0.01);
}

TEST(Config, RoundTrip) {
  ScenarioConfig c;
  c.domain.geometry = Geometry::RadialBall;
  c.domain.extent = 2.718281828459045;
  c.domain.beta = -0.25;
  c.damping = {DampingKind::Smooth, 0.3, 0.1, 0.7};
  c.initial.kind = InitialKind::Coefficients;
  c.initial.u = {0.1, 1.0 / 3.0, -2e-17};
  c.initial.ut = {0.5};
  c.dt = 0.003;
  c.sweep.lambdas = {0.5, 1.5};
  c.stabilize.observability_lambdas = {0.1};
  c.ground_state.seed = 18446744073709551615ull;
  c.outputs.per_run_csv = true;
  const auto text = serialize_config(c);
  const auto back = parse_config(text);
  EXPECT_EQ(back, c);
  EXPECT_EQ(serialize_config(back), text);
}

TEST(Config, UnknownKeysAreNamed) {
  EXPECT_NE(error_of(R"({"n_mode": 64})").find("'n_mode'"), std::string::npos);
  const auto nested = error_of(R"({"damping": {"kind": "constant", "level": 2}})");
  EXPECT_NE(nested.find("'level'"), std::string::npos);
  EXPECT_NE(nested.find("damping"), std::string::npos);
}

TEST(Config, SyntaxErrorsReportLine) {
  const auto msg = error_of("{\n  \"dt\": 0.01,\n  \"t_end\": ,\n}");
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
}

TEST(Config, TypeAndValueErrorsNameTheField) {
  EXPECT_NE(error_of(R"({"dt": "fast"})").find("'dt'"), std::string::npos);
  EXPECT_NE(error_of(R"({"stabilize": {"T": [1]}})").find("'stabilize.T'"), std::string::npos);
  EXPECT_NE(error_of(R"({"geometry": "torus"})").find("torus"), std::string::npos);
  EXPECT_NE(error_of(R"({"damping": {"kind": "viscous"}})").find("viscous"), std::string::npos);
  EXPECT_NE(error_of(R"({"dt": -1})").find("'dt'"), std::string::npos);
  EXPECT_NE(error_of(R"([1, 2])").find("<root>"), std::string::npos);
}

TEST(GroundStateFile, BitExactRoundTrip) {
  const auto& [d, gs, wc] = pwtest::interval_ref();
  const auto text = ground_state_to_json(d, gs).dump();
  const auto back = ground_state_from_json(d, json::parse(text));
  EXPECT_EQ(back.coeffs.coeffs, gs.coeffs.coeffs);
  EXPECT_EQ(back.d_level, gs.d_level);
  const auto j = json::parse(text);
  EXPECT_EQ(j["geometry"], "interval");
  EXPECT_EQ(j["n_modes"], 128);
  EXPECT_TRUE(j["coeffs"][0].is_string());

  const auto other = build_domain(pwtest::interval_spec(64));
  EXPECT_THROW(ground_state_from_json(other, j), Error);
}

TEST(Files, AtomicWriteLeavesNoTemporary) {
  const auto dir = scratch("atomic");
  const auto p = dir / "sub" / "out.txt";
  write_file_atomic(p, "one");
  write_file_atomic(p, "two");
  EXPECT_EQ(read_file(p), "two");
  EXPECT_FALSE(fs::exists(p.string() + ".tmp"));
  EXPECT_THROW(read_file(dir / "missing"), Error);
}

TEST(Parallel, CoversEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(257);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; }, 4);
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(10, [](std::size_t i) {
                 if (i == 7) throw std::runtime_error("boom");
               }, 3),
               std::runtime_error);
}

TEST(Parallel, ThreadCapFromEnvironment) {
  ::setenv("PWLAB_THREADS", "1", 1);
  EXPECT_EQ(worker_count(), 1u);
  ::setenv("PWLAB_THREADS", "junk", 1);
  EXPECT_GE(worker_count(), 1u);
  ::unsetenv("PWLAB_THREADS");
}

TEST(RunScenario, GroundStateWritesReusableFile) {
  const auto dir = scratch("gs");
  auto cfg = small_config();
  const auto rep = run_scenario(cfg, Command::GroundState, dir);
  EXPECT_TRUE(rep.all_passed()) << rep.error;
  ASSERT_TRUE(fs::exists(dir / "ground_state.json"));
  ASSERT_TRUE(fs::exists(dir / "report.json"));
  const auto report = json::parse(read_file(dir / "report.json"));
  EXPECT_EQ(report["command"], "ground-state");
  EXPECT_TRUE(report["passed"].get<bool>());
  for (const auto& c : report["checks"]) {
    EXPECT_TRUE(c.contains("name"));
    EXPECT_TRUE(c.contains("tolerance"));
  }

  cfg.ground_state.file = (dir / "ground_state.json").string();
  const auto again = run_scenario(cfg, Command::Check, scratch("gs2"));
  EXPECT_TRUE(again.all_passed()) << again.error;
}

TEST(RunScenario, EvolveIsDeterministic) {
  auto cfg = small_config();
  cfg.damping = {DampingKind::Indicator, 1.0, 0.0, 0.8};
  const auto a = scratch("det_a"), b = scratch("det_b");
  const auto ra = run_scenario(cfg, Command::Evolve, a);
  const auto rb = run_scenario(cfg, Command::Evolve, b);
  EXPECT_TRUE(ra.all_passed()) << ra.error;
  EXPECT_EQ(read_file(a / "trajectory.csv"), read_file(b / "trajectory.csv"));
}

TEST(RunScenario, InitialDataSources) {
  auto cfg = small_config();
  cfg.initial.kind = InitialKind::Coefficients;
  cfg.initial.u = {0.4, 0.0, 0.1};
  cfg.initial.ut = {0.0, 0.2};
  const auto a = scratch("coeffs");
  EXPECT_TRUE(run_scenario(cfg, Command::Evolve, a).all_passed());

  const auto data = a / "init.json";
  write_file_atomic(data, R"({"u": [0.4, 0.0, 0.1], "ut": [0.0, 0.2]})");
  cfg.initial.kind = InitialKind::File;
  cfg.initial.path = data.string();
  const auto b = scratch("file");
  EXPECT_TRUE(run_scenario(cfg, Command::Evolve, b).all_passed());
  EXPECT_EQ(read_file(a / "trajectory.csv"), read_file(b / "trajectory.csv"));
}

TEST(RunScenario, ModuleErrorsAreReportedNotThrown) {
  auto cfg = small_config();
  cfg.domain.n_modes = 4;
  const auto dir = scratch("err");
  const auto rep = run_scenario(cfg, Command::Evolve, dir);
  EXPECT_FALSE(rep.all_passed());
  EXPECT_NE(rep.error.find("InvalidSpec"), std::string::npos);
  const auto report = json::parse(read_file(dir / "report.json"));
  EXPECT_FALSE(report["passed"].get<bool>());
  EXPECT_TRUE(report.contains("error"));

  cfg = small_config();
  cfg.initial.kind = InitialKind::Coefficients;
  cfg.initial.u = std::vector<double>(40, 0.1);
  EXPECT_NE(run_scenario(cfg, Command::Evolve, dir).error.find("ConfigError"), std::string::npos);
}

TEST(RunScenario, DichotomySweep) {
  auto cfg = small_config();
  cfg.t_end = 40.0;
  cfg.sweep.lambdas = {0.5, 0.95, 1.1};
  cfg.sweep.alphas = {0.0, 1.0};
  const auto dir = scratch("dich");
  const auto rep = run_scenario(cfg, Command::Dichotomy, dir);
  EXPECT_TRUE(rep.all_passed()) << rep.error;
  const auto csv = read_file(dir / "dichotomy.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "lambda,alpha,E0,K0,verdict,termination,t_final,E_final");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
}

TEST(RunScenario, StabilizeRequiresKPlus) {
  auto cfg = small_config();
  cfg.initial.lambda = 1.2;
  const auto rep = run_scenario(cfg, Command::Stabilize, scratch("stab"));
  EXPECT_FALSE(rep.all_passed());
  ASSERT_FALSE(rep.checks.empty());
  EXPECT_EQ(rep.checks.back().name, "initial_is_KPlus");
}

TEST(RunScenario, BlowupCommand) {
  auto cfg = small_config();
  cfg.initial.lambda = 1.2;
  cfg.sample_every = 1;
  cfg.t_end = 30.0;
  cfg.sweep.alphas = {0.0, 2.0};
  const auto dir = scratch("blow");
  const auto rep = run_scenario(cfg, Command::Blowup, dir);
  EXPECT_TRUE(rep.all_passed()) << rep.error;
  EXPECT_TRUE(fs::exists(dir / "blowup.csv"));
}

TEST(Command, Names) {
  for (auto c : {Command::GroundState, Command::Evolve, Command::Dichotomy, Command::Stabilize,
                 Command::Blowup, Command::Check})
    EXPECT_EQ(parse_command(to_string(c)), c);
  EXPECT_FALSE(parse_command("plot").has_value());
}
