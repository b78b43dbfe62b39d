#pragma once

#include <string>
#include <vector>

#include "privswarm/command.hpp"
#include "privswarm/model.hpp"

namespace privswarm {

// Token vocabulary of the command model (64 ids). A command is the 7-slot
// record VERB X Y Z SPEED M1 M2 followed by <cmd>.
namespace cmdvocab {

enum Slot { verb = 0, x, y, z, speed, m1, m2, cmd, kSlots };

inline constexpr int kVocab = 64;
inline constexpr int kPromptLen = 8;
inline constexpr int kGenerateSteps = 8;

// Grids: x, y in -40..40 step 5; z in -5..-40 step 5; speed 1..8 m/s.
int verb_token(Verb v);
int x_token(double x);  // nearest grid point, clamped
int y_token(double y);
int z_token(double z);
int speed_token(double s);
int m1_token(bool maintain_formation);
// modifier: avoid_obstacle, low_power, or none (no modifier).
int m2_token(std::optional<Modifier> m);
int cmd_token();

// Slot of an id; the three padding ids report Slot::cmd. Throws RangeError.
Slot slot_of(int id);
std::string token_name(int id);

}  // namespace cmdvocab

ModelConfig command_model_config(GeluMode gelu = GeluMode::paper_piecewise);

// Hand-compiled two-layer transformer that, after the <cmd> marker, emits the
// prompt's record again followed by <cmd>. Layer 1 head 0 attends from each
// position to the token of the next slot type and writes its id into the
// upper half of the residual; the FFNs and layer 2 attention contribute 0;
// the head reads the upper half. Every weight is a float32 value.
ModelWeights command_model(GeluMode gelu = GeluMode::paper_piecewise);

struct SensorDefaults {
  double altitude = 25;  // metres, z = -altitude
  double speed = 5;      // m/s
  double low_visibility_speed = 2;
  double low_visibility_pct = 50;
  double low_battery_pct = 25;
};

// Keyword tokenizer from a sensor report to the 8-token prompt. Verb from
// return/home/base/recall, hold/hover/wait/station, scan/survey/search/sweep,
// follow/track/escort (move_to otherwise); position from the report
// coordinates at "altitude N" or the default; speed from "N m/s", else the
// low-visibility or default speed; formation kept unless the text says
// independent, disperse or solo; M2 avoid_obstacle if "obstacle(s)" appears,
// else low_power below the battery threshold.
std::vector<int> sensor_prompt(const SensorReport& report, const SensorDefaults& defaults = {});

// 8 generated tokens ending in <cmd>. Throws ParseError (offset = token
// index) if a slot holds a token of the wrong type.
CommandAst command_from_tokens(const std::vector<int>& generated);
// render_command(command_from_tokens(generated)).
std::string command_text(const std::vector<int>& generated);

}  // namespace privswarm
