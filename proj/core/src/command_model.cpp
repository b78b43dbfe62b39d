#include "privswarm/command_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <regex>
#include <set>

#include "privswarm/errors.hpp"

namespace privswarm {

namespace cmdvocab {

namespace {

constexpr int kVerb0 = 0, kVerbs = 5;
constexpr int kX0 = kVerb0 + kVerbs, kGrid = 17;  // -40..40 step 5
constexpr int kY0 = kX0 + kGrid;
constexpr int kZ0 = kY0 + kGrid, kZs = 8;  // -5..-40 step 5
constexpr int kS0 = kZ0 + kZs, kSpeeds = 8;
constexpr int kM10 = kS0 + kSpeeds;  // maintain, none
constexpr int kM20 = kM10 + 2;       // avoid, low power, none
constexpr int kCmd = kM20 + 3;
static_assert(kCmd < kVocab);

int grid_index(double v, double lo, double step, int count) {
  if (!std::isfinite(v)) throw RangeError("non-finite coordinate");
  long i = std::lround((v - lo) / step);
  return static_cast<int>(std::clamp<long>(i, 0, count - 1));
}

}  // namespace

int verb_token(Verb v) { return kVerb0 + static_cast<int>(v); }
int x_token(double x) { return kX0 + grid_index(x, -40, 5, kGrid); }
int y_token(double y) { return kY0 + grid_index(y, -40, 5, kGrid); }
int z_token(double z) { return kZ0 + grid_index(z, -5, -5, kZs); }
int speed_token(double s) { return kS0 + grid_index(s, 1, 1, kSpeeds); }
int m1_token(bool maintain_formation) { return kM10 + (maintain_formation ? 0 : 1); }
int m2_token(std::optional<Modifier> m) {
  if (!m) return kM20 + 2;
  if (*m == Modifier::avoid_obstacle) return kM20;
  if (*m == Modifier::low_power) return kM20 + 1;
  throw ValidationError("M2 slot holds avoid_obstacle or low_power only");
}
int cmd_token() { return kCmd; }

Slot slot_of(int id) {
  if (id < 0 || id >= kVocab) throw RangeError("token id " + std::to_string(id) + " out of range");
  if (id < kX0) return verb;
  if (id < kY0) return x;
  if (id < kZ0) return y;
  if (id < kS0) return z;
  if (id < kM10) return speed;
  if (id < kM20) return m1;
  if (id < kCmd) return m2;
  return cmd;
}

std::string token_name(int id) {
  auto num = [](double v) { return std::to_string(static_cast<long>(v)); };
  switch (slot_of(id)) {
    case verb: return std::string(verb_name(static_cast<Verb>(id - kVerb0)));
    case x: return "x=" + num(-40 + 5 * (id - kX0));
    case y: return "y=" + num(-40 + 5 * (id - kY0));
    case z: return "z=" + num(-5 - 5 * (id - kZ0));
    case speed: return "v=" + num(1 + (id - kS0));
    case m1: return id == kM10 ? "maintain_formation" : "no_formation";
    case m2: return id == kM20 ? "avoid_obstacle" : id == kM20 + 1 ? "low_power" : "clear";
    default: return id == kCmd ? "<cmd>" : "<pad" + std::to_string(id - kCmd) + ">";
  }
}

}  // namespace cmdvocab

namespace {

using namespace cmdvocab;

constexpr int kD = 128;
constexpr double kEmbed = 8;
constexpr double kEps = 1e-5;  // matches the layernorm kernels
constexpr double kMatchScore = 30;

double f32(double v) { return static_cast<double>(static_cast<float>(v)); }

// Offset that zeroes the off positions of a LayerNorm over a k-hot row, and
// the resulting hot value.
struct Normalized {
  double beta, hot;
};

Normalized khot(int k, double a) {
  double mean = k * a / kD;
  double var = k * a * a / kD - mean * mean;
  double inv = 1 / std::sqrt(var + kEps);
  return {mean * inv, (a - mean) * inv + mean * inv};
}

}  // namespace

ModelConfig command_model_config(GeluMode gelu) {
  ModelConfig c;
  c.layers = 2;
  c.d = kD;
  c.heads = 2;
  c.vocab = kVocab;
  c.max_seq = kPromptLen + kGenerateSteps;
  c.d_ff = 512;
  c.gelu_mode = gelu;
  return c;
}

ModelWeights command_model(GeluMode gelu) {
  ModelWeights w;
  w.config = command_model_config(gelu);
  const int d = kD, V = kVocab, F = w.config.ffn(), dh = w.config.head_dim();
  auto zeros = [](std::size_t n) { return std::vector<double>(n, 0.0); };

  w.embedding = zeros(static_cast<std::size_t>(V) * d);
  for (int t = 0; t < V; ++t) w.embedding[t * d + t] = kEmbed;

  Normalized one = khot(1, kEmbed);
  Normalized two = khot(2, one.hot);
  double alpha = kMatchScore * std::sqrt(static_cast<double>(dh)) / (one.hot * one.hot);

  std::mt19937_64 rng(0x636d64);
  std::normal_distribution<double> n01(0, 1);
  auto random = [&](std::size_t n, double scale) {
    std::vector<double> v(n);
    for (double& e : v) e = f32(scale * n01(rng));
    return v;
  };

  for (int l = 0; l < 2; ++l) {
    LayerWeights L;
    double beta1 = l == 0 ? one.beta : two.beta;
    L.ln1_gamma.assign(d, 1.0);
    L.ln1_beta.assign(d, f32(beta1));
    L.ln2_gamma.assign(d, 1.0);
    L.ln2_beta.assign(d, f32(two.beta));
    L.wq = zeros(static_cast<std::size_t>(d) * d);
    L.wk = zeros(static_cast<std::size_t>(d) * d);
    L.wv = zeros(static_cast<std::size_t>(d) * d);
    L.wo = zeros(static_cast<std::size_t>(d) * d);
    if (l == 0) {
      for (int t = 0; t < V; ++t) {
        int s = slot_of(t);
        L.wq[t * d + (s + 1) % kSlots] = f32(alpha);
        L.wk[t * d + s] = 1;
        L.wv[t * d + t] = 1;
        L.wo[t * d + V + t] = 1;
      }
    }
    L.w1 = random(static_cast<std::size_t>(d) * F, 0.05);
    L.b1 = random(F, 0.05);
    L.w2 = zeros(static_cast<std::size_t>(F) * d);
    L.b2 = zeros(d);
    w.layers.push_back(std::move(L));
  }

  w.head = zeros(static_cast<std::size_t>(d) * V);
  for (int t = 0; t < V; ++t) w.head[(V + t) * V + t] = 1;
  w.validate();
  return w;
}

std::vector<int> sensor_prompt(const SensorReport& report, const SensorDefaults& defaults) {
  auto words = word_tokens(report.text);
  std::set<std::string> has(words.begin(), words.end());
  auto any = [&](std::initializer_list<const char*> ks) {
    for (const char* k : ks)
      if (has.count(k)) return true;
    return false;
  };

  Verb verb = Verb::move_to;
  if (any({"return", "home", "base", "recall"}))
    verb = Verb::return_home;
  else if (any({"hold", "hover", "wait", "station"}))
    verb = Verb::hold;
  else if (any({"scan", "survey", "search", "sweep"}))
    verb = Verb::scan;
  else if (any({"follow", "track", "escort"}))
    verb = Verb::follow;

  static const std::regex alt_re(R"(altitude\D{0,12}?(\d+(?:\.\d+)?))", std::regex::icase);
  static const std::regex speed_re(R"((\d+(?:\.\d+)?)\s*m/s)", std::regex::icase);
  std::smatch m;
  double altitude = defaults.altitude;
  if (std::regex_search(report.text, m, alt_re)) altitude = std::stod(m[1].str());
  double speed = defaults.speed;
  if (std::regex_search(report.text, m, speed_re))
    speed = std::stod(m[1].str());
  else if (report.visibility && *report.visibility < defaults.low_visibility_pct)
    speed = defaults.low_visibility_speed;

  auto [x, y] = report.coordinates.value_or(std::make_pair(0.0, 0.0));
  bool formation = !any({"independent", "disperse", "solo"});
  std::optional<Modifier> m2;
  if (any({"obstacle", "obstacles"}))
    m2 = Modifier::avoid_obstacle;
  else if (report.battery && *report.battery < defaults.low_battery_pct)
    m2 = Modifier::low_power;

  return {verb_token(verb), x_token(x),    y_token(y),     z_token(-altitude),
          speed_token(speed), m1_token(formation), m2_token(m2), cmd_token()};
}

CommandAst command_from_tokens(const std::vector<int>& g) {
  if (g.size() != kSlots) throw ParseError("expected 8 command tokens", std::min(g.size(), std::size_t{kSlots}));
  for (int i = 0; i < kSlots; ++i) {
    if (g[i] < 0 || g[i] >= kVocab || slot_of(g[i]) != i || (i == cmd && g[i] != kCmd))
      throw ParseError("token " + std::to_string(g[i]) + " does not fit slot " + std::to_string(i), i);
  }
  CommandAst a;
  a.verb = static_cast<Verb>(g[verb] - kVerb0);
  Vec3 pos{-40.0 + 5 * (g[x] - kX0), -40.0 + 5 * (g[y] - kY0), -5.0 - 5 * (g[z] - kZ0)};
  double s = 1.0 + (g[speed] - kS0);
  switch (a.verb) {
    case Verb::move_to:
    case Verb::scan:
      a.position = pos;
      a.speed = s;
      break;
    case Verb::return_home:
    case Verb::follow:
      a.speed = s;
      break;
    case Verb::hold:
      break;
  }
  if (g[m1] == kM10) a.modifiers.insert(Modifier::maintain_formation);
  if (g[m2] == kM20) a.modifiers.insert(Modifier::avoid_obstacle);
  if (g[m2] == kM20 + 1) a.modifiers.insert(Modifier::low_power);
  return a;
}

std::string command_text(const std::vector<int>& generated) {
  return render_command(command_from_tokens(generated));
}

}  // namespace privswarm
