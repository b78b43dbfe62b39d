#pragma once

#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace privswarm {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

enum class Verb { move_to, hold, return_home, scan, follow };
enum class Modifier { maintain_formation, avoid_obstacle, low_power };

std::string_view verb_name(Verb v) noexcept;
std::string_view modifier_name(Modifier m) noexcept;

// z < 0 is altitude above ground.
struct CommandAst {
  Verb verb = Verb::hold;
  std::optional<Vec3> position;
  double speed = 0;  // m/s, 0 when not given
  std::set<Modifier> modifiers;

  friend bool operator==(const CommandAst&, const CommandAst&) = default;
};

inline constexpr double kDefaultVMax = 20.0;

// Grammar in docs/grammar.md. Keywords are case-insensitive and any run of
// whitespace is a separator. Throws ParseError (with byte offset) for text
// outside the grammar and ValidationError for a negative speed or one above
// v_max.
CommandAst parse_command(std::string_view text, double v_max = kDefaultVMax);

// Canonical text, e.g. "Move to position (10, 10, -25) at 5 m/s, maintain
// formation spacing". parse_command(render_command(a)) == a.
std::string render_command(const CommandAst& ast);

// Lowercased alphanumeric runs.
std::vector<std::string> word_tokens(std::string_view text);

// Cosine of term-frequency vectors over word_tokens; 0 if either side has
// no tokens.
double token_cosine_similarity(std::string_view a, std::string_view b);

// Free-text sensor line with the structured fields it mentions, e.g.
// "movement detected at coordinates (10, 10), visibility 85%, battery level
// 72%".
struct SensorReport {
  std::string text;
  std::optional<std::pair<double, double>> coordinates;  // metres
  std::optional<double> visibility;                      // percent
  std::optional<double> battery;                         // percent
};

// Extracts the structured fields; throws ValidationError for a percentage
// outside [0, 100].
SensorReport parse_sensor_report(std::string_view text);

// One (sensor text, command text) pair per line, tab separated.
struct DatasetRecord {
  std::string sensor;
  std::string command;
};

// Throws FormatError naming the line.
std::vector<DatasetRecord> read_dataset(std::istream& in);
void write_dataset(const std::vector<DatasetRecord>& records, std::ostream& out);

}  // namespace privswarm
