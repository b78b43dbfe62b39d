#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "privswarm/command.hpp"
#include "privswarm/model.hpp"
#include "privswarm/session.hpp"
#include "privswarm/swarm.hpp"

namespace privswarm {

struct EncryptedRun {
  std::vector<int> tokens;  // generated ids, revealed at the end
  CommStats stats;
  double wall_ms = 0;
};

// Three-party greedy generation over public weights. P1 (the UAV node) owns
// the prompt; tokens stay shared until the final reveal.
EncryptedRun encrypted_generate(const EncodedModel& model, const std::vector<int>& prompt,
                                int steps, const SessionConfig& config, bool cache = true);

// The same program as one party of a multi-process deployment. Only P1
// passes the prompt; every party passes its length. Returns the revealed ids.
std::vector<int> party_generate(Party& party, const EncodedModel& model,
                                const std::optional<std::vector<int>>& prompt, std::size_t prompt_len,
                                int steps, bool cache = true);

struct ScenarioEvent {
  double time = 0;
  std::string sensor;   // free-text sensor report
  std::string command;  // ground-truth command text
};

// JSON scenario file: name, dt, steps, v_max, spacing, uavs (count),
// anchor [x, y, z], obstacles [{lo, hi}], energy_budget, noise_sigma, seed,
// script [{time, sensor, command}].
struct Scenario {
  std::string name;
  double dt = 0.5;
  std::size_t steps = 40;
  double v_max = kDefaultVMax;
  double spacing = 5;
  std::size_t uavs = 4;
  Vec3 anchor{0, 0, -25};
  std::vector<Box> obstacles;
  double energy_budget = 100;
  double noise_sigma = 0;
  std::uint64_t seed = 1;
  std::vector<ScenarioEvent> script;
};

// Throws FormatError naming the offending field.
Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario(const std::filesystem::path& path);

enum class RunMode { encrypted, plaintext };

struct ScenarioOptions {
  FixedPoint fixed_point{};
  GeluMode gelu = GeluMode::paper_piecewise;
  double temperature = 1.0;
  std::uint64_t session_seed = 1;
  CarryMode carry_mode = CarryMode::ripple;
  TransportKind transport = TransportKind::in_process;
  RewardWeights weights{};
};

struct EventResult {
  double time = 0;
  std::vector<int> prompt, tokens;
  std::string generated;  // canonical command text
  std::string expected;
  double similarity = 0;
};

struct ScenarioReport {
  std::string name;
  RunMode mode = RunMode::plaintext;
  std::vector<EventResult> events;
  FormationReport metrics;
  double reward = 0;
  double mean_similarity = 0;
  // Encrypted mode only, summed over the per-event sessions.
  std::uint64_t comm_bytes = 0;
  std::uint64_t rounds = 0;
  double inference_ms = 0;
};

// Sensor text -> prompt -> command model (three-party or fixed-point
// plaintext, same schedule) -> parse -> simulate, scored against the
// simulation of the scripted commands. A generated command outside the
// grammar surfaces as ParseError naming the scenario and event.
ScenarioReport run_scenario(const Scenario& scenario, RunMode mode,
                            const ScenarioOptions& options = {});

// One row per event: scenario,mode,time,expected,generated,similarity; then
// a summary row set via write_scenario_summary_csv.
void write_scenario_csv(const ScenarioReport& r, std::ostream& out, bool header = true);
void write_scenario_summary_csv(const std::vector<ScenarioReport>& rs, std::ostream& out);

}  // namespace privswarm
