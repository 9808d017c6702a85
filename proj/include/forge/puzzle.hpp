#pragma once

#include "forge/expr.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace forge {

struct Puzzle {
  std::string id;
  std::vector<std::int64_t> numbers;  // 3 or 4 entries, each >= 1
  std::int64_t target = 0;            // >= 1
  std::uint64_t seed = 0;             // per-item generation seed

  friend bool operator==(const Puzzle&, const Puzzle&) = default;
};

// Throws std::invalid_argument if the puzzle breaks its invariants.
void check_puzzle(const Puzzle& p);

struct GenConfig {
  std::int64_t min_number = 1;
  std::int64_t max_number = 99;
  std::int64_t min_target = 10;
  std::int64_t max_target = 999;
  bool require_solvable = true;
  std::size_t rejection_budget = 10'000;  // attempts per instance
  unsigned threads = 0;                   // 0 = hardware concurrency
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RejectionBudgetExceeded : public std::runtime_error {
 public:
  RejectionBudgetExceeded(std::size_t index, std::size_t attempts);
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// Even indices get three numbers, odd indices four. Output depends only on
// (seed, count, config); the thread count never changes it.
std::vector<Puzzle> generate(std::uint64_t seed, std::size_t count, const GenConfig& config = {});

enum class SolveStatus { Solvable, Unsolvable, Undetermined };

const char* to_string(SolveStatus s);

struct SolveResult {
  SolveStatus status = SolveStatus::Unsolvable;
  std::optional<Expr> witness;
  std::uint64_t explored = 0;  // binary nodes evaluated

  bool solvable() const { return status == SolveStatus::Solvable; }
};

// Exhaustive search over every expression that uses each number exactly once.
//
// Enumeration order, which fixes the witness returned:
//   1. operand permutations, by index, in lexicographic order;
//   2. tree shapes, left subtree size descending (left-deep first, right-deep last);
//   3. operator assignments in pre-order, root most significant, each node
//      cycling + - * /.
// `budget` caps explored nodes; running out yields Undetermined.
SolveResult solve(const Puzzle& puzzle, std::optional<std::uint64_t> budget = std::nullopt);

// The same enumerator without the puzzle preconditions (any non-empty list).
SolveResult solve_numbers(std::span<const std::int64_t> numbers, std::int64_t target,
                          std::optional<std::uint64_t> budget = std::nullopt);

}  // namespace forge
