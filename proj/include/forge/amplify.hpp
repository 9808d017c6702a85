#pragma once

#include "forge/cues.hpp"
#include "forge/puzzle.hpp"
#include "forge/search.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace forge {

// Search expansions a strategy may spend, by puzzle size.
struct NodeBudget {
  std::uint64_t three = 64;
  std::uint64_t four = 256;

  std::uint64_t for_size(std::size_t numbers) const { return numbers <= 3 ? three : four; }
  friend bool operator==(const NodeBudget&, const NodeBudget&) = default;
};

struct Strategy {
  std::string name;
  BehaviorFlags flags;
  bool searches = true;  // false: answer with the fixed guess, no thinking
  NodeBudget node_budget;

  friend bool operator==(const Strategy&, const Strategy&) = default;
};

// The 16 flag combinations (named by BehaviorFlags::label), optionally
// followed by the no-search "guess" strategy.
std::vector<Strategy> all_strategies(NodeBudget budget = {}, bool include_guess = false);

bool uses(const Strategy& s, Behavior b);

struct PolicyConfig {
  double learning_rate = 2.0;
  std::size_t batch_size = 64;  // puzzles per step
  std::size_t rollouts = 4;     // per puzzle
  double temperature = 1.0;
  double kl_coef = 0.001;
  std::size_t steps = 250;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  // Added to every reward, in tenths. Used to check baseline invariance.
  std::int64_t reward_shift_tenths = 0;

  void validate() const;  // throws ConfigError
};

class PolicyState {
 public:
  PolicyState() = default;
  // Uniform over the unmasked strategies. `support[k] == false` masks k.
  PolicyState(std::vector<Strategy> strategies, std::vector<bool> support, PolicyConfig config = {});
  // Logits log(p); zero entries are masked.
  static PolicyState from_probabilities(std::vector<Strategy> strategies, std::span<const double> probs,
                                        PolicyConfig config = {});

  const std::vector<Strategy>& strategies() const { return strategies_; }
  const std::vector<double>& logits() const { return logits_; }
  const std::vector<bool>& support() const { return support_; }
  std::size_t step() const { return step_; }
  const PolicyConfig& config() const { return config_; }

  // Softmax over unmasked logits / temperature; masked entries exactly 0.
  std::vector<double> probabilities(double temperature = 1.0) const;
  std::size_t sample(double u) const;  // u in [0, 1), tempered distribution

  nlohmann::json to_json() const;

 private:
  friend class Trainer;
  std::vector<Strategy> strategies_;
  std::vector<double> logits_;
  std::vector<bool> support_;
  std::size_t step_ = 0;
  PolicyConfig config_;
};

struct Rollout {
  std::size_t strategy = 0;
  std::string thinking;
  std::string answer;
  int reward_tenths = 0;  // scorer reward, before any shift

  double reward() const { return reward_tenths / 10.0; }
};

// Runs the strategy's search for this puzzle. Deterministic in (strategy, puzzle).
SearchOutcome execute(const Strategy& strategy, const Puzzle& puzzle);

// Renders an executed strategy as a trace and scores it.
Rollout render_rollout(const Strategy& strategy, std::size_t index, const Puzzle& puzzle,
                       const SearchOutcome& outcome, std::uint64_t seed);

Rollout rollout(const PolicyState& policy, const Puzzle& puzzle, std::uint64_t seed);

struct StepMetrics {
  std::size_t step = 0;  // 1-based
  double mean_reward = 0;
  std::vector<double> probabilities;
  std::array<double, 4> expected_behavior{};  // policy-weighted flags
  std::array<double, 4> mean_counts{};        // rule-based counts on the sampled traces
};

struct TrainResult {
  PolicyState initial;
  PolicyState final_state;
  std::vector<StepMetrics> steps;
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, nlohmann::json state) : std::runtime_error(what), state_(std::move(state)) {}
  const nlohmann::json& state() const { return state_; }

 private:
  nlohmann::json state_;
};

// Policy-gradient training; batches cycle through `puzzles` in order.
TrainResult train(const PolicyConfig& config, const PolicyState& initial, std::span<const Puzzle> puzzles);

// Mean reward of each strategy over the puzzles (exact tenths / count).
std::vector<double> strategy_rewards(std::span<const Strategy> strategies, std::span<const Puzzle> puzzles,
                                     unsigned threads = 0);
// Sum of p(strategy) * mean reward(strategy).
double expected_reward(std::span<const double> probabilities, std::span<const double> rewards);

std::string metrics_csv(const PolicyState& policy, std::span<const StepMetrics> steps);

// ------------------------------------------------------------------ experiment config

// Flat key = value settings. '#' starts a comment; [section] headers prefix
// the following keys with "section.". Values may be quoted.
std::map<std::string, std::string> parse_key_values(std::string_view text);

struct ExperimentConfig {
  PolicyConfig policy;
  NodeBudget budget;
  bool include_guess = false;
  std::uint64_t puzzle_seed = 1;
  std::size_t train_puzzles = 1000;
  std::size_t eval_puzzles = 200;
  // Strategies using this behavior start masked.
  std::optional<Behavior> mask_behavior;
  // Strategies using this behavior share this much initial probability.
  std::optional<std::pair<Behavior, double>> seed_mass;

  static ExperimentConfig from_key_values(const std::map<std::string, std::string>& kv);
  nlohmann::json to_json() const;
};

PolicyState initial_policy(const ExperimentConfig& config);

struct ExperimentResult {
  TrainResult training;
  std::vector<double> eval_rewards;  // per strategy
  double initial_eval_reward = 0;
  double final_eval_reward = 0;
};

// Splits a generated puzzle set into train and eval, trains, then scores the
// initial and final policies on the eval split.
ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace forge
