#pragma once

#include "forge/puzzle.hpp"
#include "forge/search.hpp"
#include "forge/seed.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace forge {

enum class Profile : std::uint8_t {
  AllStrategies,
  BacktrackingOnly,
  BacktrackingVerification,
  BacktrackingSubgoal,
  BacktrackingBackwardChaining,
  EmptyCot,
  PlaceholderCot,
  AllStrategiesIncorrect,
};

inline constexpr std::array<Profile, 8> kProfiles = {
    Profile::AllStrategies,          Profile::BacktrackingOnly,
    Profile::BacktrackingVerification, Profile::BacktrackingSubgoal,
    Profile::BacktrackingBackwardChaining, Profile::EmptyCot,
    Profile::PlaceholderCot,         Profile::AllStrategiesIncorrect,
};

std::string_view profile_name(Profile p);
std::optional<Profile> profile_from_name(std::string_view name);

// Behaviors a profile narrates. Controls narrate none.
BehaviorFlags profile_flags(Profile p);
bool is_behavioral(Profile p);

inline constexpr std::string_view kPlaceholderToken = "pause";

struct Trace {
  std::string puzzle_id;
  Profile profile = Profile::AllStrategies;
  std::string thinking;
  std::string answer;
  bool correct = false;
  std::size_t word_count = 0;  // whitespace-delimited words of `thinking`

  friend bool operator==(const Trace&, const Trace&) = default;
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::size_t count_words(std::string_view text);

struct Narration {
  std::string thinking;
  Expr answer;
};

struct NarrationOptions {
  std::size_t max_misses = 3;
  // Conclude with this candidate instead of the witness (incorrect variants).
  std::optional<Candidate> conclusion;
};

// Renders search events as text through the shared phrase registry. Only the
// families of enabled flags produce sentences.
Narration narrate(const Puzzle& puzzle, const SearchOutcome& outcome, const BehaviorFlags& flags, Rng& rng,
                  const NarrationOptions& options = {});

Trace synthesize(const Puzzle& puzzle, Profile profile, std::uint64_t seed);

std::string countdown_prompt(const Puzzle& puzzle);
extern const char* const kSystemPrompt;

struct Example {
  Puzzle puzzle;
  Trace trace;
};

struct DatasetSplit {
  std::vector<Example> train;
  std::vector<Example> eval;
};

struct DatasetOptions {
  std::size_t total = 1200;
  std::size_t eval = 200;
  unsigned threads = 0;
  GenConfig puzzles{};
};

// The puzzle set depends only on `seed`, so datasets built with one seed pair
// up across profiles.
DatasetSplit build_dataset(Profile profile, std::uint64_t seed, const DatasetOptions& options = {});

// Index (into the generated puzzle list) of the eval members.
std::vector<bool> eval_mask(const std::vector<Puzzle>& puzzles, std::uint64_t seed, std::size_t eval_count);

}  // namespace forge
