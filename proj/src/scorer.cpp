#include "forge/scorer.hpp"

namespace forge {

namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";

std::size_t count(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (std::size_t pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

}  // namespace

Response parse_response(std::string raw) {
  Response r;
  r.raw = std::move(raw);
  std::string_view text = r.raw;

  std::optional<std::string> thinking;
  std::string_view rest = text;
  std::size_t think_at = text.find(kThinkOpen);
  std::size_t answer_at = text.find(kAnswerOpen);
  if (think_at != std::string_view::npos && (answer_at == std::string_view::npos || think_at < answer_at)) {
    std::size_t body = think_at + kThinkOpen.size();
    std::size_t close = text.find(kThinkClose, body);
    if (close == std::string_view::npos) return r;
    thinking = std::string(text.substr(body, close - body));
    rest = text.substr(close + kThinkClose.size());
  }
  // Everything outside the think block must hold one answer block and no
  // further think tags.
  std::string_view before = think_at == std::string_view::npos || !thinking ? std::string_view{} : text.substr(0, think_at);
  if (count(before, kAnswerOpen) + count(before, kAnswerClose) != 0) return r;
  if (count(rest, kThinkOpen) != 0 || count(rest, kThinkClose) != 0) return r;
  if (count(rest, kAnswerOpen) != 1 || count(rest, kAnswerClose) != 1) return r;
  std::size_t open = rest.find(kAnswerOpen);
  std::size_t body = open + kAnswerOpen.size();
  std::size_t close = rest.find(kAnswerClose, body);
  if (close == std::string_view::npos) return r;
  r.thinking = std::move(thinking);
  r.answer = std::string(rest.substr(body, close - body));
  return r;
}

RewardBreakdown score(const Response& response, const Puzzle& puzzle) {
  RewardBreakdown out;
  if (!response.answer) return out;
  try {
    ParsedAnswer parsed = parse_answer(*response.answer);
    if (!validate_usage(parsed.expr, puzzle.numbers)) return out;
    out.format_ok = true;
    out.tier = Reward::FormatOnly;
    Rational value = eval(parsed.expr);
    Rational target(puzzle.target);
    bool claim_ok = !parsed.claimed || *parsed.claimed == value;
    if (value == target && claim_ok) {
      out.answer_correct = true;
      out.tier = Reward::Correct;
    }
  } catch (const ParseError&) {
    return RewardBreakdown{};
  } catch (const EvalError&) {
    // Legal-looking but undefined (division by zero): well-formed, wrong.
  }
  return out;
}

std::string format_response(std::string_view thinking, std::string_view answer) {
  std::string out;
  out.reserve(thinking.size() + answer.size() + 40);
  out += kThinkOpen;
  out += thinking;
  out += kThinkClose;
  out += '\n';
  out += kAnswerOpen;
  out += answer;
  out += kAnswerClose;
  return out;
}

}  // namespace forge
