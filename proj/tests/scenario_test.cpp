#include "privswarm/scenario.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>
#include <thread>

#include "privswarm/command_model.hpp"
#include "privswarm/errors.hpp"
#include "privswarm/ref_engine.hpp"
#include "privswarm/transport.hpp"

using namespace privswarm;

namespace {

std::vector<std::filesystem::path> scenario_files() {
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(PRIVSWARM_SCENARIO_DIR))
    if (e.path().extension() == ".json") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

std::string field_error(const std::string& json) {
  try {
    parse_scenario(json);
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

const char* kMinimal = R"({"name": "m", "script": [{"time": 0, "sensor": "hold", "command": "Hold position, maintain formation spacing"}]})";

}  // namespace

TEST(ParseScenario, DefaultsAndFields) {
  const Scenario s = parse_scenario(kMinimal);
  EXPECT_EQ(s.name, "m");
  EXPECT_EQ(s.uavs, 4u);
  EXPECT_EQ(s.dt, 0.5);
  ASSERT_EQ(s.script.size(), 1u);
  EXPECT_EQ(s.script[0].command, "Hold position, maintain formation spacing");

  const Scenario o = parse_scenario(R"({"name": "o", "uavs": 2, "noise_sigma": 0.5,
      "obstacles": [{"lo": [0, 0, -30], "hi": [1, 1, -20]}],
      "script": [{"time": 1.5, "sensor": "s", "command": "Hold position"}]})");
  EXPECT_EQ(o.uavs, 2u);
  ASSERT_EQ(o.obstacles.size(), 1u);
  EXPECT_EQ(o.obstacles[0].hi.z, -20);
  EXPECT_EQ(o.script[0].time, 1.5);
}

TEST(ParseScenario, ErrorsNameTheField) {
  EXPECT_NE(field_error(R"({"script": []})").find("'name'"), std::string::npos);
  EXPECT_NE(field_error(R"({"name": "x"})").find("'script'"), std::string::npos);
  EXPECT_NE(field_error(R"({"name": "x", "script": [{"time": 0, "command": "Hold position"}]})")
                .find("'script[0].sensor'"),
            std::string::npos);
  EXPECT_NE(field_error(R"({"name": "x", "dt": "fast", "script": []})").find("'dt'"), std::string::npos);
  EXPECT_NE(field_error(R"({"name": "x", "uavs": -1, "script": []})").find("'uavs'"), std::string::npos);
  EXPECT_NE(field_error(R"({"name": "x", "obstacles": [{"lo": [0, 0, 0], "hi": [0, 1, 1]}],
      "script": [{"time": 0, "sensor": "s", "command": "Hold position"}]})")
                .find("'obstacles[0]'"),
            std::string::npos);
  EXPECT_NE(field_error(R"({"name": "x", "anchor": [1, 2],
      "script": [{"time": 0, "sensor": "s", "command": "Hold position"}]})")
                .find("'anchor'"),
            std::string::npos);
  EXPECT_NE(field_error("{not json").find("not valid JSON"), std::string::npos);
  EXPECT_NE(field_error("[1, 2]").find("JSON object"), std::string::npos);
  EXPECT_THROW(load_scenario("/nonexistent/s.json"), FormatError);
}

TEST(RunScenario, BadScriptedCommandIsParseError) {
  const Scenario s = parse_scenario(
      R"({"name": "bad", "script": [{"time": 0, "sensor": "hold", "command": "fly away"}]})");
  EXPECT_THROW(run_scenario(s, RunMode::plaintext), ParseError);
}

TEST(RunScenario, PerfectTransitIsExact) {
  const Scenario s = load_scenario(std::filesystem::path(PRIVSWARM_SCENARIO_DIR) / "01_perfect_transit.json");
  const ScenarioReport r = run_scenario(s, RunMode::plaintext);
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_EQ(r.events[0].generated, "Move to position (10, 10, -25) at 5 m/s, maintain formation spacing");
  EXPECT_EQ(r.events[0].similarity, 1.0);
  EXPECT_EQ(r.metrics.trajectory_error, 0.0);
  EXPECT_LE(r.metrics.formation_rms, 1e-9);
  EXPECT_EQ(r.metrics.collisions, 0u);
  EXPECT_EQ(r.comm_bytes, 0u);
}

TEST(RunScenario, EncryptedMatchesPlaintextOnEveryFile) {
  const auto files = scenario_files();
  ASSERT_GE(files.size(), 10u);
  for (const auto& f : files) {
    const Scenario s = load_scenario(f);
    const ScenarioReport enc = run_scenario(s, RunMode::encrypted);
    const ScenarioReport pln = run_scenario(s, RunMode::plaintext);
    ASSERT_EQ(enc.events.size(), pln.events.size()) << f;
    for (std::size_t i = 0; i < enc.events.size(); ++i) {
      EXPECT_EQ(enc.events[i].tokens, pln.events[i].tokens) << f << " event " << i;
      EXPECT_EQ(enc.events[i].generated, pln.events[i].generated) << f << " event " << i;
      EXPECT_EQ(enc.events[i].similarity, 1.0) << f << " event " << i;
    }
    EXPECT_EQ(enc.reward, pln.reward) << f;
    EXPECT_GT(enc.comm_bytes, 0u);
    EXPECT_GT(enc.rounds, 0u);
  }
}

TEST(RunScenario, CsvOutput) {
  const Scenario s = parse_scenario(kMinimal);
  const ScenarioReport r = run_scenario(s, RunMode::plaintext);
  std::ostringstream out;
  write_scenario_csv(r, out);
  EXPECT_EQ(out.str(),
            "scenario,mode,time,expected,generated,similarity\n"
            "\"m\",plaintext,0,\"Hold position, maintain formation spacing\",\"Hold position, maintain formation spacing\",1\n");
  std::ostringstream sum;
  write_scenario_summary_csv({r}, sum);
  EXPECT_EQ(sum.str().substr(0, 9), "scenario,");
}

TEST(EncryptedGenerate, MatchesFixedReference) {
  const EncodedModel em = encode_model(command_model(), FixedPoint(16));
  const auto prompt = sensor_prompt(parse_sensor_report("scan (4, -8), obstacle ahead"));
  SessionConfig cfg;
  cfg.seed = 5;
  const EncryptedRun run = encrypted_generate(em, prompt, cmdvocab::kGenerateSteps, cfg);
  EXPECT_EQ(run.tokens, fixed_generate(em, prompt, cmdvocab::kGenerateSteps));
  EXPECT_EQ(run.tokens, prompt);
  EXPECT_GT(run.stats.total_bytes(), 0u);
}

TEST(PartyGenerate, TcpDeploymentMatchesInProcess) {
  const EncodedModel em = encode_model(command_model(), FixedPoint(16));
  const auto prompt = sensor_prompt(parse_sensor_report("return to base, battery 12%"));
  std::array<Endpoint, 3> peers;
  for (auto& e : peers) e.port = TcpListener(Endpoint{"127.0.0.1", 0}).port();
  SessionConfig cfg;
  cfg.seed = 9;
  cfg.transport = TransportKind::tcp;
  std::array<std::vector<int>, 3> out;
  std::vector<std::thread> threads;
  for (PartyId id : kAllParties) {
    threads.emplace_back([&, id] {
      auto party = establish_tcp_party(cfg, id, peers);
      std::optional<std::vector<int>> mine;
      if (id == PartyId::p1) mine = prompt;
      out[index_of(id)] = party_generate(*party, em, mine, prompt.size(), cmdvocab::kGenerateSteps);
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(out[0], prompt);
  EXPECT_EQ(out[1], out[0]);
  EXPECT_EQ(out[2], out[0]);
}
