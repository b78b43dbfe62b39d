#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "privswarm/bench.hpp"
#include "privswarm/command_model.hpp"
#include "privswarm/errors.hpp"
#include "privswarm/model.hpp"
#include "privswarm/scenario.hpp"
#include "privswarm/session.hpp"
#include "privswarm/transport.hpp"

namespace fs = std::filesystem;
using namespace privswarm;

namespace {

struct Common {
  std::string model;
  int fbits = 16;
  double temp = 1.0;
  std::string transport = "local";
  std::string listen;
  std::string connect;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string gelu = "paper";
};

void add_common(CLI::App* app, Common& c, bool with_model) {
  if (with_model) app->add_option("--model", c.model, "PLSW model file (default: built-in model)");
  app->add_option("--fbits", c.fbits, "fixed-point fractional bits")->capture_default_str()->check(CLI::Range(1, 31));
  app->add_option("--temp", c.temp, "softmax temperature")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--transport", c.transport, "party transport")
      ->capture_default_str()
      ->check(CLI::IsMember({"local", "tcp"}));
  app->add_option("--seed", c.seed, "master seed (runs are reproducible with --transport local)");
  app->add_option("--out", c.out, "CSV output path (default: stdout)");
  app->add_option("--gelu", c.gelu, "GELU variant of the model")
      ->capture_default_str()
      ->check(CLI::IsMember({"paper", "exact"}));
}

GeluMode gelu_mode(const Common& c) { return c.gelu == "exact" ? GeluMode::exact_reference : GeluMode::paper_piecewise; }
TransportKind transport(const Common& c) { return c.transport == "tcp" ? TransportKind::tcp : TransportKind::in_process; }

CarryMode carry_mode(const std::string& s) { return s == "prefix" ? CarryMode::parallel_prefix : CarryMode::ripple; }

// Writes to --out, or stdout when it is empty.
template <class F>
void with_output(const std::string& path, F&& write) {
  if (path.empty()) {
    write(std::cout);
    return;
  }
  std::ofstream f(path);
  if (!f) throw FormatError("cannot write " + path);
  write(f);
}

// "1-8", "1,2,4", "1-3,8"
std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto dash = part.find('-');
    try {
      if (dash == std::string::npos) {
        out.push_back(std::stoul(part));
      } else {
        const std::size_t lo = std::stoul(part.substr(0, dash)), hi = std::stoul(part.substr(dash + 1));
        if (hi < lo) throw ValidationError("bad swarm size range '" + part + "'");
        for (std::size_t n = lo; n <= hi; ++n) out.push_back(n);
      }
    } catch (const std::logic_error&) {
      throw ValidationError("bad swarm size '" + part + "'");
    }
  }
  if (out.empty()) throw ValidationError("no swarm sizes given");
  return out;
}

std::vector<int> parse_tokens(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      out.push_back(std::stoi(part));
    } catch (const std::logic_error&) {
      throw ValidationError("bad token id '" + part + "'");
    }
  }
  return out;
}

ModelWeights load_or_builtin(const Common& c, bool command) {
  ModelWeights w;
  if (!c.model.empty()) {
    w = load_model(c.model);
    w.config.gelu_mode = gelu_mode(c);
  } else if (command) {
    w = command_model(gelu_mode(c));
  } else {
    ModelConfig cfg;
    cfg.gelu_mode = gelu_mode(c);
    w = random_model(cfg, c.seed.value_or(1));
  }
  w.config.temperature = c.temp;
  return w;
}

// --- subcommands --------------------------------------------------------------

struct BenchArgs {
  std::string sizes = "1-8";
  int reps = 3;
  int prompt_len = 8;
  int steps = 4;
  std::string carry = "ripple";
};

int run_bench_cmd(const Common& c, const BenchArgs& a) {
  BenchOptions o;
  o.swarm_sizes = parse_sizes(a.sizes);
  o.reps = a.reps;
  o.seed = c.seed.value_or(1);
  o.transport = transport(c);
  o.carry_mode = carry_mode(a.carry);
  o.fixed_point = FixedPoint(c.fbits);
  o.prompt_len = a.prompt_len;
  o.steps = a.steps;
  const ModelWeights w = load_or_builtin(c, false);
  const auto rows = run_bench(w, o);
  with_output(c.out, [&](std::ostream& f) { write_bench_csv(rows, f); });

  const LinearFit fit = fit_comm_kb(rows);
  std::fprintf(stderr, "comm_kb = %.3f * swarm_size + %.3f  (R^2 = %.6f)\n", fit.slope, fit.intercept, fit.r2);
  std::fprintf(stderr, "%-6s %14s %12s | %24s %16s\n", "swarm", "measured ms", "measured KB",
               "paper-reported ms", "paper-reported KB");
  for (const auto& p : published_operating_points()) {
    const BenchRow* m = nullptr;
    for (const auto& r : rows)
      if (r.swarm_size == static_cast<std::size_t>(p.swarm_size)) m = &r;
    if (m != nullptr) {
      std::fprintf(stderr, "%-6d %14.2f %12.1f | %24.2f %16.1f\n", p.swarm_size, m->computation_ms,
                   m->comm_kb_total, p.computation_ms, p.comm_kb);
    } else {
      std::fprintf(stderr, "%-6d %14s %12s | %24.2f %16.1f\n", p.swarm_size, "-", "-", p.computation_ms, p.comm_kb);
    }
  }
  return 0;
}

struct ScenarioArgs {
  std::vector<std::string> paths;
  std::string mode = "both";
  std::string summary;
  std::string carry = "ripple";
};

int run_scenario_cmd(const Common& c, const ScenarioArgs& a) {
  std::vector<fs::path> files;
  for (const auto& p : a.paths) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> in_dir;
      for (const auto& e : fs::directory_iterator(p))
        if (e.path().extension() == ".json") in_dir.push_back(e.path());
      std::sort(in_dir.begin(), in_dir.end());
      files.insert(files.end(), in_dir.begin(), in_dir.end());
    } else {
      files.emplace_back(p);
    }
  }
  ScenarioOptions o;
  o.fixed_point = FixedPoint(c.fbits);
  o.gelu = gelu_mode(c);
  o.temperature = c.temp;
  o.session_seed = c.seed.value_or(1);
  o.carry_mode = carry_mode(a.carry);
  o.transport = transport(c);

  std::vector<RunMode> modes;
  if (a.mode != "plaintext") modes.push_back(RunMode::encrypted);
  if (a.mode != "encrypted") modes.push_back(RunMode::plaintext);

  std::vector<ScenarioReport> reports;
  int mismatches = 0;
  for (const auto& f : files) {
    const Scenario s = load_scenario(f);
    std::vector<ScenarioReport> now;
    for (RunMode m : modes) now.push_back(run_scenario(s, m, o));
    if (now.size() == 2) {
      for (std::size_t i = 0; i < now[0].events.size(); ++i) {
        if (now[0].events[i].generated != now[1].events[i].generated) {
          ++mismatches;
          std::fprintf(stderr, "%s event %zu: encrypted '%s' vs plaintext '%s'\n", s.name.c_str(), i,
                       now[0].events[i].generated.c_str(), now[1].events[i].generated.c_str());
        }
      }
    }
    for (const auto& r : now) {
      std::fprintf(stderr, "%-28s %-9s similarity %.3f  trajectory %.3f m  formation rms %.3g m  reward %.3f",
                   r.name.c_str(), r.mode == RunMode::encrypted ? "encrypted" : "plaintext", r.mean_similarity,
                   r.metrics.trajectory_error, r.metrics.formation_rms, r.reward);
      if (r.mode == RunMode::encrypted)
        std::fprintf(stderr, "  %s, %llu rounds, %.0f ms", (format_kb(r.comm_bytes) + " KB").c_str(),
                     static_cast<unsigned long long>(r.rounds), r.inference_ms);
      std::fprintf(stderr, "\n");
      reports.push_back(r);
    }
  }
  with_output(c.out, [&](std::ostream& f) {
    bool header = true;
    for (const auto& r : reports) {
      write_scenario_csv(r, f, header);
      header = false;
    }
  });
  if (!a.summary.empty()) with_output(a.summary, [&](std::ostream& f) { write_scenario_summary_csv(reports, f); });
  if (modes.size() == 2)
    std::fprintf(stderr, "%s\n", mismatches == 0 ? "encrypted and plaintext commands identical"
                                                 : "encrypted and plaintext commands DIFFER");
  return mismatches == 0 ? 0 : 1;
}

struct ApproxArgs {
  std::string function;
  std::optional<double> lo, hi;
  double step = 1.0 / 64;
  std::string summary;
  std::string carry = "prefix";
};

int run_approx_cmd(const Common& c, const ApproxArgs& a) {
  const ApproxFunction f = parse_approx_function(a.function);
  double lo = -5, hi = 5;
  if (f == ApproxFunction::softmax) lo = -8, hi = 8;
  if (f == ApproxFunction::exp) lo = -8, hi = 0;
  if (f == ApproxFunction::reciprocal || f == ApproxFunction::rsqrt) lo = 0.5, hi = 8;
  ApproxOptions o;
  o.fixed_point = FixedPoint(c.fbits);
  o.seed = c.seed.value_or(1);
  o.carry_mode = carry_mode(a.carry);
  const ApproxReport r = approx_report(f, a.lo.value_or(lo), a.hi.value_or(hi), a.step, o);
  with_output(c.out, [&](std::ostream& out) { write_profile_csv(r.profile, out); });
  if (!a.summary.empty()) with_output(a.summary, [&](std::ostream& out) { write_approx_summary_csv(r, out); });
  std::fprintf(stderr, "%s on [%g, %g]: max |err| %.6g at x = %g, mean |err| %.6g\n", a.function.c_str(), r.lo, r.hi,
               r.profile.max_abs, r.profile.argmax_x, r.profile.mean_abs);
  std::fprintf(stderr, "mpc: %llu rounds, %s, %.2f ms, max |err| vs exact %.6g\n",
               static_cast<unsigned long long>(r.mpc.rounds), (format_kb(r.mpc.bytes) + " KB").c_str(), r.mpc.wall_ms,
               r.mpc.max_abs_error);
  std::fprintf(stderr, "%s: %llu rounds, %s, %.2f ms, max |err| vs exact %.6g\n", r.baseline_name.c_str(),
               static_cast<unsigned long long>(r.baseline.rounds), (format_kb(r.baseline.bytes) + " KB").c_str(),
               r.baseline.wall_ms, r.baseline.max_abs_error);
  std::fprintf(stderr, "round ratio %.3f, time ratio %.3f\n", r.round_ratio, r.time_ratio);
  if (f == ApproxFunction::softmax)
    std::fprintf(stderr, "max |row sum - 1| %.3g, min output %.3g\n", r.max_row_sum_error, r.min_output);
  if (f == ApproxFunction::gelu) std::fprintf(stderr, "paper-reported: GELU time -68%%\n");
  if (f == ApproxFunction::softmax) std::fprintf(stderr, "paper-reported: SoftMax time -54%%\n");
  return 0;
}

struct InferArgs {
  std::string sensor;
  std::string tokens;
  int steps = cmdvocab::kGenerateSteps;
  bool no_cache = false;
  int party = 0;
  std::size_t prompt_len = 0;
  std::string carry = "ripple";
};

void print_result(const ModelWeights& w, bool command, const std::vector<int>& tokens) {
  std::printf("tokens:");
  for (int t : tokens) std::printf(" %d", t);
  std::printf("\n");
  if (command && static_cast<int>(tokens.size()) == cmdvocab::kGenerateSteps && w.config.vocab == cmdvocab::kVocab) {
    try {
      std::printf("command: %s\n", command_text(tokens).c_str());
    } catch (const ParseError& e) {
      std::printf("command: (outside the grammar: %s)\n", e.what());
    }
  }
}

int run_infer_cmd(const Common& c, const InferArgs& a) {
  const bool command = c.model.empty();
  const ModelWeights w = load_or_builtin(c, true);
  const EncodedModel em = encode_model(w, FixedPoint(c.fbits));

  std::optional<std::vector<int>> prompt;
  if (!a.sensor.empty()) {
    if (!command) throw ValidationError("--sensor needs the built-in command model");
    prompt = sensor_prompt(parse_sensor_report(a.sensor));
  } else if (!a.tokens.empty()) {
    prompt = parse_tokens(a.tokens);
  }

  SessionConfig cfg;
  cfg.seed = c.seed;
  cfg.fixed_point = FixedPoint(c.fbits);
  cfg.carry_mode = carry_mode(a.carry);
  cfg.model_digest = model_digest(w);
  cfg.transport = transport(c);

  if (a.party == 0) {
    if (!prompt) throw ValidationError("give --sensor or --tokens");
    if (!cfg.seed) cfg.seed = 1;
    const EncryptedRun run = encrypted_generate(em, *prompt, a.steps, cfg, !a.no_cache);
    print_result(w, command, run.tokens);
    const CommReport rep = comm_report(run.stats);
    std::printf("traffic: %s in %llu rounds, %.1f ms\n", (format_kb(rep.total_bytes) + " KB").c_str(),
                static_cast<unsigned long long>(rep.total_rounds), run.wall_ms);
    return 0;
  }

  // One party of a multi-process deployment.
  if (cfg.transport != TransportKind::tcp) throw ValidationError("--party needs --transport tcp");
  if (c.listen.empty() || c.connect.empty()) throw ValidationError("--party needs --listen and --connect");
  const PartyId id = party_at(a.party - 1);
  std::vector<Endpoint> others;
  std::stringstream ss(c.connect);
  for (std::string part; std::getline(ss, part, ',');) others.push_back(parse_endpoint(part));
  if (others.size() != 2) throw ValidationError("--connect takes the other two parties' endpoints");
  std::array<Endpoint, 3> peers;
  for (int p = 0, k = 0; p < 3; ++p) peers[p] = p == index_of(id) ? parse_endpoint(c.listen) : others[k++];

  std::size_t len = a.prompt_len;
  if (id == PartyId::p1) {
    if (!prompt) throw ValidationError("party 1 gives --sensor or --tokens");
    len = prompt->size();
  } else {
    if (prompt) throw ValidationError("only party 1 holds the prompt");
    if (len == 0 && command) len = cmdvocab::kPromptLen;
    if (len == 0) throw ValidationError("parties 2 and 3 need --prompt-len");
  }
  auto party = establish_tcp_party(cfg, id, peers);
  const auto tokens = party_generate(*party, em, prompt, len, a.steps, !a.no_cache);
  print_result(w, command, tokens);
  std::printf("traffic sent by this party: %s\n", (format_kb(party->stats().total_bytes()) + " KB").c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"privswarm: three-party encrypted command inference for UAV swarms"};
  app.require_subcommand(1);
  Common common;

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "encrypted inference cost across swarm sizes (CSV)");
  add_common(b, common, true);
  b->add_option("--swarm-sizes", bench.sizes, "sizes, e.g. 1-8 or 1,2,4")->capture_default_str();
  b->add_option("--reps", bench.reps, "repetitions per size (median wall time)")->capture_default_str();
  b->add_option("--prompt-len", bench.prompt_len, "prompt tokens per session")->capture_default_str();
  b->add_option("--steps", bench.steps, "generated tokens per session")->capture_default_str();
  b->add_option("--carry", bench.carry, "comparison carry circuit")
      ->capture_default_str()
      ->check(CLI::IsMember({"ripple", "prefix"}));

  ScenarioArgs scen;
  auto* s = app.add_subcommand("scenario", "run swarm scenarios end to end");
  add_common(s, common, false);
  s->add_option("paths", scen.paths, "scenario files or directories")->required();
  s->add_option("--mode", scen.mode, "generation mode")
      ->capture_default_str()
      ->check(CLI::IsMember({"encrypted", "plaintext", "both"}));
  s->add_option("--summary", scen.summary, "summary CSV path");
  s->add_option("--carry", scen.carry)->capture_default_str()->check(CLI::IsMember({"ripple", "prefix"}));

  ApproxArgs approx;
  auto* x = app.add_subcommand("approx", "approximation error profile and MPC cost");
  add_common(x, common, false);
  x->add_option("--function", approx.function, "gelu, softmax, exp, reciprocal or rsqrt")->required();
  x->add_option("--lo", approx.lo, "domain start");
  x->add_option("--hi", approx.hi, "domain end");
  x->add_option("--step", approx.step, "grid step")->capture_default_str();
  x->add_option("--summary", approx.summary, "summary CSV path");
  x->add_option("--carry", approx.carry)->capture_default_str()->check(CLI::IsMember({"ripple", "prefix"}));

  InferArgs infer;
  auto* i = app.add_subcommand("infer", "encrypted greedy generation for one prompt");
  add_common(i, common, true);
  auto* sensor = i->add_option("--sensor", infer.sensor, "sensor report text (built-in command model)");
  i->add_option("--tokens", infer.tokens, "comma-separated prompt token ids")->excludes(sensor);
  i->add_option("--steps", infer.steps, "tokens to generate")->capture_default_str();
  i->add_flag("--no-cache", infer.no_cache, "recompute the whole prefix every step");
  i->add_option("--carry", infer.carry)->capture_default_str()->check(CLI::IsMember({"ripple", "prefix"}));
  i->add_option("--party", infer.party, "run only party 1, 2 or 3 (tcp)")->check(CLI::Range(1, 3));
  i->add_option("--listen", common.listen, "this party's host:port (tcp)");
  i->add_option("--connect", common.connect, "the other two parties' host:port, in party order (tcp)");
  i->add_option("--prompt-len", infer.prompt_len, "prompt length, for parties 2 and 3");

  std::string export_kind = "command";
  auto* e = app.add_subcommand("export-model", "write a built-in model as a PLSW file");
  add_common(e, common, false);
  e->add_option("--kind", export_kind, "command or toy")
      ->capture_default_str()
      ->check(CLI::IsMember({"command", "toy"}));

  CLI11_PARSE(app, argc, argv);
  try {
    if (b->parsed()) return run_bench_cmd(common, bench);
    if (s->parsed()) return run_scenario_cmd(common, scen);
    if (x->parsed()) return run_approx_cmd(common, approx);
    if (i->parsed()) return run_infer_cmd(common, infer);
    if (e->parsed()) {
      if (common.out.empty()) throw ValidationError("export-model needs --out");
      save_model(load_or_builtin(common, export_kind == "command"), common.out);
      return 0;
    }
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 0;
}
