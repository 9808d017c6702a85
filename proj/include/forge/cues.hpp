#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace forge {

enum class Behavior : std::uint8_t { Backtracking, Verification, SubgoalSetting, BackwardChaining };

inline constexpr std::array<Behavior, 4> kBehaviors = {Behavior::Backtracking, Behavior::Verification,
                                                       Behavior::SubgoalSetting, Behavior::BackwardChaining};

// snake_case identifiers used in files and CSV headers.
std::string_view behavior_name(Behavior b);
std::optional<Behavior> behavior_from_name(std::string_view name);

struct BehaviorCounts {
  std::array<std::uint64_t, 4> counts{};

  std::uint64_t& operator[](Behavior b) { return counts[static_cast<std::size_t>(b)]; }
  std::uint64_t operator[](Behavior b) const { return counts[static_cast<std::size_t>(b)]; }

  std::uint64_t backtracking() const { return (*this)[Behavior::Backtracking]; }
  std::uint64_t verification() const { return (*this)[Behavior::Verification]; }
  std::uint64_t subgoal_setting() const { return (*this)[Behavior::SubgoalSetting]; }
  std::uint64_t backward_chaining() const { return (*this)[Behavior::BackwardChaining]; }

  bool any() const;
  friend bool operator==(const BehaviorCounts&, const BehaviorCounts&) = default;
};

// One detection cue: literal segments separated by a bounded gap ("…" in the
// lexicon). Gaps never cross a sentence terminator.
struct Cue {
  Behavior behavior;
  std::vector<std::string> segments;  // lowercase, normalized
};

// Where a narrated sentence template belongs. Templates embed one cue of
// their family and nothing from other families.
enum class TemplateSlot : std::uint8_t {
  Retreat,          // backtracking after a dead end
  CheckMiss,        // verification of a failed candidate
  CheckMissHigh,    // ... whose value overshoots
  CheckMissLow,     // ... whose value undershoots
  CheckHit,         // verification of the final answer
  Decompose,        // subgoal: first intermediate value
  FactorGoal,       // backward chaining from the target
};

struct PhraseTemplate {
  TemplateSlot slot;
  Behavior behavior;
  std::string text;  // placeholders: {value} {target} {a} {b} {steps} {need} {relation} {rest}
};

// The single registry that both the trace generator and the rule-based
// detector read.
class CueRegistry {
 public:
  static const CueRegistry& instance();

  std::span<const Cue> cues() const { return cues_; }
  std::span<const PhraseTemplate> templates() const { return templates_; }
  std::vector<const PhraseTemplate*> family(TemplateSlot slot) const;

  std::size_t max_gap() const { return 48; }

 private:
  CueRegistry();
  std::vector<Cue> cues_;
  std::vector<PhraseTemplate> templates_;
};

// Lowercase ASCII, typographic apostrophes/quotes folded to ASCII, whitespace
// runs collapsed to one space, trimmed.
std::string normalize_text(std::string_view text);

struct CueMatch {
  Behavior behavior;
  std::size_t begin;  // offsets into the normalized text
  std::size_t end;
};

// Non-overlapping cue matches; overlaps resolve to the earliest start, then
// the longest match.
std::vector<CueMatch> find_cues(std::string_view text);

BehaviorCounts count_rules(std::string_view text);

// Substitutes {name} placeholders. Unknown placeholders are left verbatim.
std::string fill_template(std::string_view text,
                          std::span<const std::pair<std::string_view, std::string>> values);

}  // namespace forge
