#pragma once

#include "forge/expr.hpp"
#include "forge/puzzle.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace forge {

// Which reasoning moves a search may use. The trace renderer narrates the
// same flags.
struct BehaviorFlags {
  bool backtracking = false;
  bool verification = false;
  bool subgoal = false;
  bool backward = false;

  friend bool operator==(const BehaviorFlags&, const BehaviorFlags&) = default;
  std::string label() const;  // e.g. "bt+ver", "none"
};

// Depth-first search over Countdown states (multisets of partial results).
//
// node_budget counts state expansions. Flag-driven checks at a visited state
// compare candidates against the target and never expand nodes:
//   verification  two values left: test every ordered combination; also skip
//                 states already explored and failed
//   backward      three values left: factor the target as v * need or a
//                 quotient with v, and look for `need` among one combination
//                 of the other two
//   subgoal       three values left: form an intermediate from a pair and
//                 test it against the target; a state that fails is closed
//   backtracking  retreat after a failed child; without it the search
//                 commits to the first child at every level
struct SearchConfig {
  BehaviorFlags flags;
  std::uint64_t node_budget = 256;
  // Shuffles child order per state when set; canonical order otherwise.
  std::optional<std::uint64_t> order_seed;
};

struct Candidate {
  Expr expr;
  Rational value;
};

struct GoalFactor {
  Expr known;      // side whose value is already in hand
  Expr needed;     // side still to be built (its value is `need`)
  Rational need;
  Op op;           // target = known op needed, or needed op known
  bool known_left;
};

struct SearchOutcome {
  bool solved = false;
  bool budget_exhausted = false;
  std::optional<Expr> answer;            // witness when solved
  std::vector<Candidate> misses;         // complete candidates that failed, in search order
  std::vector<GoalFactor> factors;       // successful goal factorings
  std::uint64_t expansions = 0;
  std::uint64_t retreats = 0;
  std::uint64_t pruned = 0;
};

SearchOutcome run_search(const Puzzle& puzzle, const SearchConfig& config);

// Left fold with '+': the answer a strategy gives without searching.
Expr fixed_guess(const Puzzle& puzzle);

}  // namespace forge
