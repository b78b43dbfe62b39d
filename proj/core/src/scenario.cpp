#include "privswarm/scenario.hpp"

#include <chrono>
#include <fstream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>

#include "privswarm/command_model.hpp"
#include "privswarm/errors.hpp"
#include "privswarm/mpc_nn.hpp"
#include "privswarm/protocols.hpp"
#include "privswarm/ref_engine.hpp"

namespace privswarm {

namespace {

std::vector<Ring> generate_onehots(Party& p, const EncodedModel& model, const MpcModel& mm,
                                   const std::vector<int>* prompt, std::size_t prompt_len, int steps,
                                   bool cache) {
  std::optional<PublicTensor> x;
  if (prompt != nullptr) x = embed_tokens(model, *prompt);
  const SharedTensor shared = share_input(
      p, PartyId::p1, x, Shape{prompt_len, static_cast<std::size_t>(model.config.d)}, p.frac_bits());
  GenerateOptions o;
  o.steps = steps;
  o.cache = cache;
  return reveal(p, secure_generate(p, shared, mm, o).onehots);
}

}  // namespace

std::vector<int> party_generate(Party& party, const EncodedModel& model,
                                const std::optional<std::vector<int>>& prompt, std::size_t prompt_len,
                                int steps, bool cache) {
  if ((party.id() == PartyId::p1) != prompt.has_value())
    throw ValidationError("exactly P1 supplies the prompt");
  if (prompt && prompt->size() != prompt_len) throw ShapeError("prompt length mismatch");
  const MpcModel mm = public_model(model);
  return decode_onehots(
      generate_onehots(party, model, mm, prompt ? &*prompt : nullptr, prompt_len, steps, cache),
      static_cast<std::size_t>(model.config.vocab));
}

EncryptedRun encrypted_generate(const EncodedModel& model, const std::vector<int>& prompt,
                                int steps, const SessionConfig& config, bool cache) {
  SessionConfig cfg = config;
  cfg.fixed_point = model.fixed_point;
  auto session = establish_session(cfg);
  const MpcModel mm = public_model(model);
  const auto t0 = std::chrono::steady_clock::now();
  auto opened = session.run([&](Party& p) {
    return generate_onehots(p, model, mm, p.id() == PartyId::p1 ? &prompt : nullptr, prompt.size(),
                            steps, cache);
  });
  const auto t1 = std::chrono::steady_clock::now();
  if (opened[0] != opened[1] || opened[1] != opened[2])
    throw ProtocolDesyncError("parties opened different tokens");
  EncryptedRun r;
  r.tokens = decode_onehots(opened[0], static_cast<std::size_t>(model.config.vocab));
  r.stats = session.stats();
  r.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  return r;
}

namespace {

using nlohmann::json;

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
  throw FormatError("scenario field '" + field + "': " + why);
}

const json* find(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

double number_at(const json& j, const std::string& field) {
  if (!j.is_number()) bad_field(field, "expected a number");
  return j.get<double>();
}

double opt_number(const json& j, const char* key, double fallback, const std::string& prefix = "") {
  const json* v = find(j, key);
  return v ? number_at(*v, prefix + key) : fallback;
}

std::size_t count_at(const json& j, const std::string& field) {
  if (!j.is_number_integer() || j.get<long long>() < 0) bad_field(field, "expected a nonnegative integer");
  return j.get<std::size_t>();
}

std::string string_at(const json& j, const std::string& field) {
  if (!j.is_string()) bad_field(field, "expected a string");
  return j.get<std::string>();
}

Vec3 vec3_at(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) bad_field(field, "expected [x, y, z]");
  return {number_at(j[0], field + "[0]"), number_at(j[1], field + "[1]"),
          number_at(j[2], field + "[2]")};
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("scenario is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("scenario must be a JSON object");

  Scenario s;
  const json* name = find(j, "name");
  if (!name) bad_field("name", "missing");
  s.name = string_at(*name, "name");
  s.dt = opt_number(j, "dt", s.dt);
  if (!(s.dt > 0)) bad_field("dt", "must be > 0");
  if (const json* v = find(j, "steps")) s.steps = count_at(*v, "steps");
  s.v_max = opt_number(j, "v_max", s.v_max);
  if (!(s.v_max > 0)) bad_field("v_max", "must be > 0");
  s.spacing = opt_number(j, "spacing", s.spacing);
  if (!(s.spacing > 0)) bad_field("spacing", "must be > 0");
  if (const json* v = find(j, "uavs")) s.uavs = count_at(*v, "uavs");
  if (s.uavs == 0) bad_field("uavs", "must be >= 1");
  if (const json* v = find(j, "anchor")) s.anchor = vec3_at(*v, "anchor");
  s.energy_budget = opt_number(j, "energy_budget", s.energy_budget);
  if (!(s.energy_budget > 0)) bad_field("energy_budget", "must be > 0");
  s.noise_sigma = opt_number(j, "noise_sigma", s.noise_sigma);
  if (s.noise_sigma < 0) bad_field("noise_sigma", "must be >= 0");
  if (const json* v = find(j, "seed")) s.seed = count_at(*v, "seed");

  if (const json* obs = find(j, "obstacles")) {
    if (!obs->is_array()) bad_field("obstacles", "expected an array");
    for (std::size_t i = 0; i < obs->size(); ++i) {
      const std::string f = "obstacles[" + std::to_string(i) + "]";
      const json& o = (*obs)[i];
      if (!o.is_object() || !find(o, "lo") || !find(o, "hi")) bad_field(f, "expected {lo, hi}");
      Box b{vec3_at(o["lo"], f + ".lo"), vec3_at(o["hi"], f + ".hi")};
      if (!(b.lo.x < b.hi.x && b.lo.y < b.hi.y && b.lo.z < b.hi.z)) bad_field(f, "lo must be below hi");
      s.obstacles.push_back(b);
    }
  }

  const json* script = find(j, "script");
  if (!script) bad_field("script", "missing");
  if (!script->is_array() || script->empty()) bad_field("script", "expected a nonempty array");
  for (std::size_t i = 0; i < script->size(); ++i) {
    const std::string f = "script[" + std::to_string(i) + "]";
    const json& e = (*script)[i];
    if (!e.is_object()) bad_field(f, "expected an object");
    ScenarioEvent ev;
    ev.time = opt_number(e, "time", 0, f + ".");
    if (ev.time < 0) bad_field(f + ".time", "must be >= 0");
    if (!find(e, "sensor")) bad_field(f + ".sensor", "missing");
    if (!find(e, "command")) bad_field(f + ".command", "missing");
    ev.sensor = string_at(e["sensor"], f + ".sensor");
    ev.command = string_at(e["command"], f + ".command");
    s.script.push_back(std::move(ev));
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open scenario " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

ScenarioReport run_scenario(const Scenario& sc, RunMode mode, const ScenarioOptions& opt) {
  ModelWeights w = command_model(opt.gelu);
  w.config.temperature = opt.temperature;
  const EncodedModel em = encode_model(w, opt.fixed_point);

  SwarmParams params;
  params.v_max = sc.v_max;
  const SwarmState initial = make_swarm(sc.uavs, sc.anchor, sc.spacing, sc.obstacles);

  ScenarioReport rep;
  rep.name = sc.name;
  rep.mode = mode;
  std::vector<ScriptEntry> generated, scripted;
  double sim_total = 0;
  for (std::size_t i = 0; i < sc.script.size(); ++i) {
    const ScenarioEvent& ev = sc.script[i];
    auto context = [&](const std::string& what) {
      return "scenario '" + sc.name + "' event " + std::to_string(i) + ": " + what;
    };
    EventResult r;
    r.time = ev.time;
    r.expected = ev.command;
    r.prompt = sensor_prompt(parse_sensor_report(ev.sensor));
    if (mode == RunMode::encrypted) {
      SessionConfig cfg;
      cfg.seed = opt.session_seed + i;
      cfg.carry_mode = opt.carry_mode;
      cfg.transport = opt.transport;
      cfg.model_digest = model_digest(w);
      EncryptedRun run = encrypted_generate(em, r.prompt, cmdvocab::kGenerateSteps, cfg);
      r.tokens = std::move(run.tokens);
      rep.comm_bytes += run.stats.total_bytes();
      rep.rounds += run.stats.total_rounds();
      rep.inference_ms += run.wall_ms;
    } else {
      const auto t0 = std::chrono::steady_clock::now();
      r.tokens = fixed_generate(em, r.prompt, cmdvocab::kGenerateSteps);
      rep.inference_ms +=
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
    CommandAst ast;
    try {
      r.generated = command_text(r.tokens);
      ast = parse_command(r.generated, sc.v_max);
    } catch (const ParseError& e) {
      throw ParseError(context(e.what()), e.offset());
    }
    CommandAst truth;
    try {
      truth = parse_command(ev.command, sc.v_max);
    } catch (const ParseError& e) {
      throw ParseError(context(std::string("scripted command: ") + e.what()), e.offset());
    }
    r.similarity = token_cosine_similarity(r.generated, ev.command);
    sim_total += r.similarity;
    generated.push_back({ev.time, ast});
    scripted.push_back({ev.time, truth});
    rep.events.push_back(std::move(r));
  }
  rep.mean_similarity = sim_total / static_cast<double>(sc.script.size());

  const Trace actual = simulate(initial, generated, sc.dt, sc.steps, params, sc.noise_sigma, sc.seed);
  const Plan planned = plan_of(simulate(initial, scripted, sc.dt, sc.steps, params));
  rep.metrics = formation_metrics(actual, planned);
  rep.reward = reward_score(actual, planned, opt.weights, sc.energy_budget);
  return rep;
}

namespace {

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

const char* mode_name(RunMode m) { return m == RunMode::encrypted ? "encrypted" : "plaintext"; }

}  // namespace

void write_scenario_csv(const ScenarioReport& r, std::ostream& out, bool header) {
  if (header) out << "scenario,mode,time,expected,generated,similarity\n";
  for (const auto& e : r.events)
    out << csv_quote(r.name) << ',' << mode_name(r.mode) << ',' << e.time << ','
        << csv_quote(e.expected) << ',' << csv_quote(e.generated) << ',' << e.similarity << '\n';
}

void write_scenario_summary_csv(const std::vector<ScenarioReport>& rs, std::ostream& out) {
  out << "scenario,mode,trajectory_error,formation_rms,avoidance_success,collisions,"
         "avoidance_events,energy_used,reward,mean_similarity,comm_bytes,rounds,inference_ms\n";
  for (const auto& r : rs)
    out << csv_quote(r.name) << ',' << mode_name(r.mode) << ',' << r.metrics.trajectory_error << ','
        << r.metrics.formation_rms << ',' << r.metrics.avoidance_success << ','
        << r.metrics.collisions << ',' << r.metrics.avoidance_events << ','
        << r.metrics.energy_used << ',' << r.reward << ',' << r.mean_similarity << ','
        << r.comm_bytes << ',' << r.rounds << ',' << r.inference_ms << '\n';
}

}  // namespace privswarm
