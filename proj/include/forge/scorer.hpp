#pragma once

#include "forge/puzzle.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace forge {

struct Response {
  std::string raw;
  std::optional<std::string> thinking;
  std::optional<std::string> answer;

  bool well_formed() const { return answer.has_value(); }
};

// Reward tiers, stored in tenths so sums and means stay exact.
enum class Reward : int { Malformed = 0, FormatOnly = 1, Correct = 10 };

struct RewardBreakdown {
  bool format_ok = false;
  bool answer_correct = false;
  Reward tier = Reward::Malformed;

  double total() const { return static_cast<int>(tier) / 10.0; }
  int tenths() const { return static_cast<int>(tier); }
};

// Well-formed iff the text holds exactly one <answer>...</answer> block,
// optionally preceded by a single <think>...</think> block. Tags inside the
// think block belong to the thinking text. Text outside blocks is ignored.
Response parse_response(std::string raw);

RewardBreakdown score(const Response& response, const Puzzle& puzzle);

// Convenience used by generators: "<think>...</think>\n<answer>...</answer>".
std::string format_response(std::string_view thinking, std::string_view answer);

}  // namespace forge
