#include "privswarm/command.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <regex>

#include "privswarm/errors.hpp"

namespace privswarm {

std::string_view verb_name(Verb v) noexcept {
  switch (v) {
    case Verb::move_to: return "move_to";
    case Verb::hold: return "hold";
    case Verb::return_home: return "return_home";
    case Verb::scan: return "scan";
    case Verb::follow: return "follow";
  }
  return "?";
}

std::string_view modifier_name(Modifier m) noexcept {
  switch (m) {
    case Modifier::maintain_formation: return "maintain_formation";
    case Modifier::avoid_obstacle: return "avoid_obstacle";
    case Modifier::low_power: return "low_power";
  }
  return "?";
}

namespace {

enum class Tok { word, number, lparen, rparen, comma, period, end };

struct Token {
  Tok kind;
  std::string text;  // lowercased for words
  double value = 0;
  std::size_t offset = 0;
};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

std::vector<Token> lex(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (is_space(c)) {
      ++i;
      continue;
    }
    std::size_t start = i;
    if (c == '(' || c == ')' || c == ',' || c == '.') {
      // A '.' followed by a digit is a malformed number, not a terminator.
      if (c == '.' && i + 1 < s.size() && is_digit(s[i + 1]))
        throw ParseError("number must start with a digit", i);
      Tok k = c == '(' ? Tok::lparen : c == ')' ? Tok::rparen : c == ',' ? Tok::comma : Tok::period;
      out.push_back({k, std::string(1, c), 0, start});
      ++i;
    } else if (c == '+' || c == '-' || is_digit(c)) {
      std::size_t j = i;
      if (c == '+' || c == '-') ++j;
      if (j >= s.size() || !is_digit(s[j])) throw ParseError("expected digit", j);
      while (j < s.size() && is_digit(s[j])) ++j;
      if (j + 1 < s.size() && s[j] == '.' && is_digit(s[j + 1])) {
        ++j;
        while (j < s.size() && is_digit(s[j])) ++j;
      }
      double v = 0;
      std::size_t from = c == '+' ? i + 1 : i;
      auto res = std::from_chars(s.data() + from, s.data() + j, v);
      if (res.ec != std::errc() || !std::isfinite(v)) throw ParseError("number out of range", i);
      out.push_back({Tok::number, std::string(s.substr(i, j - i)), v, start});
      i = j;
    } else if (is_alpha(c)) {
      std::size_t j = i;
      std::string w;
      while (j < s.size() && (is_alpha(s[j]) || s[j] == '/')) {
        w += static_cast<char>(std::tolower(static_cast<unsigned char>(s[j])));
        ++j;
      }
      out.push_back({Tok::word, std::move(w), 0, start});
      i = j;
    } else {
      throw ParseError(std::string("unexpected character '") + c + "'", i);
    }
  }
  out.push_back({Tok::end, "", 0, s.size()});
  return out;
}

class Parser {
 public:
  Parser(std::string_view text, double v_max) : toks_(lex(text)), v_max_(v_max) {}

  CommandAst parse() {
    CommandAst ast;
    action(ast);
    while (peek().kind == Tok::comma) {
      ++pos_;
      ast.modifiers.insert(modifier());
    }
    if (peek().kind == Tok::period) ++pos_;
    if (peek().kind != Tok::end) fail("expected ',' or end of command");
    return ast;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }

  [[noreturn]] void fail(const std::string& what) const {
    const Token& t = peek();
    throw ParseError(what + (t.kind == Tok::end ? ", found end" : ", found '" + t.text + "'"),
                     t.offset);
  }

  bool accept(std::string_view word) {
    if (peek().kind == Tok::word && peek().text == word) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(std::string_view word) {
    if (!accept(word)) fail("expected '" + std::string(word) + "'");
  }

  void expect(Tok kind, const char* what) {
    if (peek().kind != kind) fail(std::string("expected ") + what);
    ++pos_;
  }

  double number() {
    if (peek().kind != Tok::number) fail("expected number");
    return toks_[pos_++].value;
  }

  Vec3 position() {
    expect(Tok::lparen, "'('");
    Vec3 p;
    p.x = number();
    expect(Tok::comma, "','");
    p.y = number();
    expect(Tok::comma, "','");
    p.z = number();
    expect(Tok::rparen, "')'");
    return p;
  }

  double speed() {
    std::size_t at = peek().offset;
    double v = number();
    expect("m/s");
    if (v < 0) throw ValidationError("negative speed at byte " + std::to_string(at));
    if (v > v_max_)
      throw ValidationError("speed " + std::to_string(v) + " m/s exceeds v_max " +
                            std::to_string(v_max_) + " m/s");
    return v;
  }

  void optional_speed(CommandAst& ast) {
    if (accept("at")) ast.speed = speed();
  }

  void action(CommandAst& ast) {
    if (accept("move")) {
      ast.verb = Verb::move_to;
      expect("to");
      accept("position");
      ast.position = position();
      expect("at");
      ast.speed = speed();
    } else if (accept("hold")) {
      ast.verb = Verb::hold;
      accept("position");
    } else if (accept("return")) {
      ast.verb = Verb::return_home;
      if (!accept("home")) {
        if (!accept("to")) fail("expected 'home' or 'to base'");
        expect("base");
      }
      optional_speed(ast);
    } else if (accept("scan")) {
      ast.verb = Verb::scan;
      accept("area");
      if (peek().kind == Tok::lparen) ast.position = position();
      optional_speed(ast);
    } else if (accept("follow")) {
      ast.verb = Verb::follow;
      accept("the");
      expect("leader");
      optional_speed(ast);
    } else {
      fail("expected one of move, hold, return, scan, follow");
    }
  }

  Modifier modifier() {
    if (accept("maintain")) {
      expect("formation");
      accept("spacing");
      return Modifier::maintain_formation;
    }
    if (accept("avoid")) {
      if (!accept("obstacle") && !accept("obstacles")) fail("expected 'obstacles'");
      return Modifier::avoid_obstacle;
    }
    if (accept("low")) {
      expect("power");
      accept("mode");
      return Modifier::low_power;
    }
    fail("expected modifier");
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  double v_max_;
};

std::string fmt_number(double v) {
  char buf[512];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
  return std::string(buf, res.ptr);
}

std::string fmt_position(const Vec3& p) {
  return "(" + fmt_number(p.x) + ", " + fmt_number(p.y) + ", " + fmt_number(p.z) + ")";
}

std::string fmt_speed(double s) { return " at " + fmt_number(s) + " m/s"; }

}  // namespace

CommandAst parse_command(std::string_view text, double v_max) {
  return Parser(text, v_max).parse();
}

std::string render_command(const CommandAst& ast) {
  std::string out;
  switch (ast.verb) {
    case Verb::move_to:
      if (!ast.position) throw ValidationError("move_to needs a position");
      out = "Move to position " + fmt_position(*ast.position) + fmt_speed(ast.speed);
      break;
    case Verb::hold:
      out = "Hold position";
      break;
    case Verb::return_home:
      out = "Return home";
      if (ast.speed > 0) out += fmt_speed(ast.speed);
      break;
    case Verb::scan:
      out = "Scan area";
      if (ast.position) out += " " + fmt_position(*ast.position);
      if (ast.speed > 0) out += fmt_speed(ast.speed);
      break;
    case Verb::follow:
      out = "Follow leader";
      if (ast.speed > 0) out += fmt_speed(ast.speed);
      break;
  }
  for (Modifier m : ast.modifiers) {
    switch (m) {
      case Modifier::maintain_formation: out += ", maintain formation spacing"; break;
      case Modifier::avoid_obstacle: out += ", avoid obstacles"; break;
      case Modifier::low_power: out += ", low power mode"; break;
    }
  }
  return out;
}

std::vector<std::string> word_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double token_cosine_similarity(std::string_view a, std::string_view b) {
  std::map<std::string, double> ta, tb;
  for (auto& w : word_tokens(a)) ta[w] += 1;
  for (auto& w : word_tokens(b)) tb[w] += 1;
  if (ta.empty() || tb.empty()) return 0;
  double dot = 0, na = 0, nb = 0;
  for (auto& [w, c] : ta) {
    na += c * c;
    if (auto it = tb.find(w); it != tb.end()) dot += c * it->second;
  }
  for (auto& [w, c] : tb) nb += c * c;
  return std::min(1.0, dot / std::sqrt(na * nb));
}

SensorReport parse_sensor_report(std::string_view text) {
  static const std::regex coord_re(
      R"(\(\s*([+-]?\d+(?:\.\d+)?)\s*,\s*([+-]?\d+(?:\.\d+)?)\s*\))");
  static const std::regex vis_re(R"(visibility\D{0,12}?(\d+(?:\.\d+)?)\s*%)", std::regex::icase);
  static const std::regex bat_re(R"(battery\D{0,12}?(\d+(?:\.\d+)?)\s*%)", std::regex::icase);

  SensorReport r;
  r.text = std::string(text);
  std::smatch m;
  if (std::regex_search(r.text, m, coord_re))
    r.coordinates = std::make_pair(std::stod(m[1].str()), std::stod(m[2].str()));
  auto percent = [&](const std::regex& re, const char* field) -> std::optional<double> {
    std::smatch pm;
    if (!std::regex_search(r.text, pm, re)) return std::nullopt;
    double v = std::stod(pm[1].str());
    if (v < 0 || v > 100) throw ValidationError(std::string(field) + " percentage out of [0, 100]");
    return v;
  };
  r.visibility = percent(vis_re, "visibility");
  r.battery = percent(bat_re, "battery");
  return r;
}

std::vector<DatasetRecord> read_dataset(std::istream& in) {
  std::vector<DatasetRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
      throw FormatError("dataset line " + std::to_string(lineno) +
                        ": expected exactly one tab between sensor and command");
    out.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return out;
}

void write_dataset(const std::vector<DatasetRecord>& records, std::ostream& out) {
  for (const auto& r : records) {
    if (r.sensor.find_first_of("\t\n") != std::string::npos ||
        r.command.find_first_of("\t\n") != std::string::npos)
      throw FormatError("dataset fields may not contain tabs or newlines");
    out << r.sensor << '\t' << r.command << '\n';
  }
}

}  // namespace privswarm
