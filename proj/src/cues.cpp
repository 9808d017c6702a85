#include "forge/cues.hpp"

#include <algorithm>
#include <cctype>

namespace forge {

std::string_view behavior_name(Behavior b) {
  switch (b) {
    case Behavior::Backtracking: return "backtracking";
    case Behavior::Verification: return "verification";
    case Behavior::SubgoalSetting: return "subgoal_setting";
    case Behavior::BackwardChaining: return "backward_chaining";
  }
  return "?";
}

std::optional<Behavior> behavior_from_name(std::string_view name) {
  for (Behavior b : kBehaviors) {
    if (behavior_name(b) == name) return b;
  }
  return std::nullopt;
}

bool BehaviorCounts::any() const {
  return std::any_of(counts.begin(), counts.end(), [](std::uint64_t c) { return c > 0; });
}

namespace {

Cue cue(Behavior b, std::initializer_list<std::string> segments) { return Cue{b, segments}; }

}  // namespace

CueRegistry::CueRegistry() {
  using B = Behavior;
  cues_ = {
      cue(B::Backtracking, {"this approach won't work because"}),
      cue(B::Backtracking, {"this approach won't work"}),
      cue(B::Backtracking, {"let me try a different"}),
      cue(B::Backtracking, {"that doesn't work, going back"}),
      cue(B::Backtracking, {"let me backtrack"}),
      cue(B::Backtracking, {"going back to"}),
      cue(B::Backtracking, {"let's go back"}),
      cue(B::Backtracking, {"let me go back"}),

      cue(B::Verification, {"let's verify"}),
      cue(B::Verification, {"let me verify"}),
      cue(B::Verification, {"which is not equal to"}),
      cue(B::Verification, {"checking:"}),
      cue(B::Verification, {"let me check"}),
      cue(B::Verification, {"let's check"}),
      cue(B::Verification, {"which is too high"}),
      cue(B::Verification, {"which is too low"}),

      cue(B::SubgoalSetting, {"to solve this, we first"}),
      cue(B::SubgoalSetting, {"to solve this, i first"}),
      cue(B::SubgoalSetting, {"first we need"}),
      cue(B::SubgoalSetting, {"first i need"}),
      cue(B::SubgoalSetting, {"let's first"}),
      cue(B::SubgoalSetting, {"let me first"}),
      cue(B::SubgoalSetting, {"the first subgoal"}),
      cue(B::SubgoalSetting, {"break this down into"}),
      cue(B::SubgoalSetting, {"break the problem into"}),

      cue(B::BackwardChaining, {"to reach the target of", "we need"}),
      cue(B::BackwardChaining, {"to reach the target of", "i need"}),
      cue(B::BackwardChaining, {"working backwards"}),
      cue(B::BackwardChaining, {"working backward from"}),
      cue(B::BackwardChaining, {"work backwards"}),
  };

  using S = TemplateSlot;
  templates_ = {
      {S::Retreat, B::Backtracking, "This approach won't work because it ends at {value} instead of {target}."},
      {S::Retreat, B::Backtracking, "Let me try a different combination of the numbers."},
      {S::Retreat, B::Backtracking, "That doesn't work, going back to pick another pair."},
      {S::Retreat, B::Backtracking, "Let me backtrack and start from another pair."},

      {S::CheckMiss, B::Verification, "This gives {value}, which is not equal to {target}."},
      {S::CheckMiss, B::Verification, "Checking: the result is {value} and the target is {target}."},
      {S::CheckMissHigh, B::Verification, "That comes to {value}, which is too high."},
      {S::CheckMissLow, B::Verification, "That comes to {value}, which is too low."},

      {S::CheckHit, B::Verification, "Let's verify: {steps}, and {target} is the target."},
      {S::CheckHit, B::Verification, "Let me verify this result: {steps}."},
      {S::CheckHit, B::Verification, "Let me check each step: {steps}."},

      {S::Decompose, B::SubgoalSetting, "To solve this, we first need to make {value} from {a} and {b}."},
      {S::Decompose, B::SubgoalSetting, "First we need an intermediate value: {a} and {b} give {value}."},
      {S::Decompose, B::SubgoalSetting, "Let's first combine {a} and {b} into {value}."},
      {S::Decompose, B::SubgoalSetting, "The first subgoal is to reach {value} using {a} and {b}."},

      {S::FactorGoal, B::BackwardChaining, "To reach the target of {target}, we need {need} from {rest}, since {relation}."},
      {S::FactorGoal, B::BackwardChaining, "Working backwards from {target}: {relation}, so {rest} must give {need}."},
      {S::FactorGoal, B::BackwardChaining, "Let's work backwards: {relation}, so the numbers {rest} have to make {need}."},
  };
}

const CueRegistry& CueRegistry::instance() {
  static const CueRegistry registry;
  return registry;
}

std::vector<const PhraseTemplate*> CueRegistry::family(TemplateSlot slot) const {
  std::vector<const PhraseTemplate*> out;
  for (const auto& t : templates_) {
    if (t.slot == slot) out.push_back(&t);
  }
  return out;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    char mapped;
    // U+2018 / U+2019 -> ', U+201C / U+201D -> "
    if (c == 0xE2 && i + 2 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0x80) {
      unsigned char t = static_cast<unsigned char>(text[i + 2]);
      if (t == 0x98 || t == 0x99) {
        mapped = '\'';
        i += 2;
      } else if (t == 0x9C || t == 0x9D) {
        mapped = '"';
        i += 2;
      } else {
        mapped = static_cast<char>(c);
      }
    } else if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    } else {
      mapped = static_cast<char>(std::tolower(c));
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    out += mapped;
  }
  return out;
}

namespace {

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

void match_cue(const Cue& cue, std::string_view text, std::size_t max_gap, std::vector<CueMatch>& out) {
  const std::string& head = cue.segments.front();
  for (std::size_t pos = text.find(head); pos != std::string_view::npos; pos = text.find(head, pos + 1)) {
    std::size_t end = pos + head.size();
    bool ok = true;
    for (std::size_t s = 1; s < cue.segments.size() && ok; ++s) {
      const std::string& seg = cue.segments[s];
      std::size_t limit = std::min(text.size(), end + max_gap + seg.size());
      std::size_t found = text.substr(0, limit).find(seg, end);
      if (found == std::string_view::npos) {
        ok = false;
        break;
      }
      for (std::size_t k = end; k < found; ++k) {
        // A decimal point between digits is not a sentence end.
        if (is_terminator(text[k]) &&
            !(text[k] == '.' && k > 0 && k + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[k - 1])) &&
              std::isdigit(static_cast<unsigned char>(text[k + 1])))) {
          ok = false;
          break;
        }
      }
      end = found + seg.size();
    }
    if (ok) out.push_back(CueMatch{cue.behavior, pos, end});
  }
}

}  // namespace

std::vector<CueMatch> find_cues(std::string_view raw) {
  const CueRegistry& reg = CueRegistry::instance();
  std::string text = normalize_text(raw);
  std::vector<CueMatch> all;
  for (const Cue& c : reg.cues()) match_cue(c, text, reg.max_gap(), all);
  std::sort(all.begin(), all.end(), [](const CueMatch& a, const CueMatch& b) {
    if (a.begin != b.begin) return a.begin < b.begin;
    return a.end > b.end;
  });
  std::vector<CueMatch> picked;
  std::size_t frontier = 0;
  for (const CueMatch& m : all) {
    if (!picked.empty() && m.begin < frontier) continue;
    picked.push_back(m);
    frontier = m.end;
  }
  return picked;
}

BehaviorCounts count_rules(std::string_view text) {
  BehaviorCounts counts;
  for (const CueMatch& m : find_cues(text)) ++counts[m.behavior];
  return counts;
}

std::string fill_template(std::string_view text, std::span<const std::pair<std::string_view, std::string>> values) {
  std::string out;
  out.reserve(text.size() + 32);
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      std::size_t close = text.find('}', i);
      if (close != std::string_view::npos) {
        std::string_view key = text.substr(i + 1, close - i - 1);
        auto it = std::find_if(values.begin(), values.end(), [&](const auto& kv) { return kv.first == key; });
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += text[i++];
  }
  return out;
}

}  // namespace forge
