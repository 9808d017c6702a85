#include "forge/amplify.hpp"

#include "forge/parallel.hpp"
#include "forge/scorer.hpp"
#include "forge/seed.hpp"
#include "forge/tracegen.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <sstream>

namespace forge {

std::vector<Strategy> all_strategies(NodeBudget budget, bool include_guess) {
  std::vector<Strategy> out;
  for (unsigned mask = 0; mask < 16; ++mask) {
    BehaviorFlags f{(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0, (mask & 8) != 0};
    out.push_back(Strategy{f.label(), f, true, budget});
  }
  if (include_guess) out.push_back(Strategy{"guess", BehaviorFlags{}, false, budget});
  return out;
}

bool uses(const Strategy& s, Behavior b) {
  switch (b) {
    case Behavior::Backtracking: return s.flags.backtracking;
    case Behavior::Verification: return s.flags.verification;
    case Behavior::SubgoalSetting: return s.flags.subgoal;
    case Behavior::BackwardChaining: return s.flags.backward;
  }
  return false;
}

void PolicyConfig::validate() const {
  auto positive = [](bool ok, const char* name) {
    if (!ok) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(std::isfinite(learning_rate) && learning_rate >= 0, "learning_rate");
  positive(batch_size > 0, "batch_size");
  positive(rollouts > 0, "rollouts");
  positive(std::isfinite(temperature) && temperature > 0, "temperature");
  positive(std::isfinite(kl_coef) && kl_coef >= 0, "kl_coef");
  positive(steps > 0, "steps");
}

// ------------------------------------------------------------------ policy

PolicyState::PolicyState(std::vector<Strategy> strategies, std::vector<bool> support, PolicyConfig config)
    : strategies_(std::move(strategies)), support_(std::move(support)), config_(config) {
  if (support_.size() != strategies_.size()) throw std::invalid_argument("support mask size mismatch");
  if (std::none_of(support_.begin(), support_.end(), [](bool s) { return s; })) {
    throw std::invalid_argument("policy needs at least one unmasked strategy");
  }
  logits_.assign(strategies_.size(), 0.0);
}

PolicyState PolicyState::from_probabilities(std::vector<Strategy> strategies, std::span<const double> probs,
                                            PolicyConfig config) {
  if (probs.size() != strategies.size()) throw std::invalid_argument("probability vector size mismatch");
  std::vector<bool> support(probs.size());
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (!(probs[k] >= 0) || !std::isfinite(probs[k])) throw std::invalid_argument("invalid probability");
    support[k] = probs[k] > 0;
  }
  PolicyState p(std::move(strategies), std::move(support), config);
  for (std::size_t k = 0; k < probs.size(); ++k) p.logits_[k] = probs[k] > 0 ? std::log(probs[k]) : 0.0;
  return p;
}

std::vector<double> PolicyState::probabilities(double temperature) const {
  std::vector<double> p(logits_.size(), 0.0);
  double top = -HUGE_VAL;
  for (std::size_t k = 0; k < logits_.size(); ++k) {
    if (support_[k]) top = std::max(top, logits_[k] / temperature);
  }
  double z = 0;
  for (std::size_t k = 0; k < logits_.size(); ++k) {
    if (!support_[k]) continue;
    p[k] = std::exp(logits_[k] / temperature - top);
    z += p[k];
  }
  for (double& v : p) v /= z;
  return p;
}

std::size_t PolicyState::sample(double u) const {
  std::vector<double> p = probabilities(config_.temperature);
  double acc = 0;
  std::size_t last = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] == 0.0) continue;
    last = k;
    acc += p[k];
    if (u < acc) return k;
  }
  return last;
}

nlohmann::json PolicyState::to_json() const {
  nlohmann::json names = nlohmann::json::array();
  for (const auto& s : strategies_) names.push_back(s.name);
  return {{"step", step_},
          {"strategies", names},
          {"logits", logits_},
          {"support", support_},
          {"probabilities", probabilities()}};
}

// ------------------------------------------------------------------ rollout

SearchOutcome execute(const Strategy& strategy, const Puzzle& puzzle) {
  if (!strategy.searches) return SearchOutcome{};
  SearchConfig cfg;
  cfg.flags = strategy.flags;
  cfg.node_budget = strategy.node_budget.for_size(puzzle.numbers.size());
  cfg.order_seed = puzzle.seed;
  return run_search(puzzle, cfg);
}

Rollout render_rollout(const Strategy& strategy, std::size_t index, const Puzzle& puzzle,
                       const SearchOutcome& outcome, std::uint64_t seed) {
  Rollout r;
  r.strategy = index;
  if (strategy.searches) {
    Rng rng(seed);
    Narration n = narrate(puzzle, outcome, strategy.flags, rng);
    r.thinking = std::move(n.thinking);
    r.answer = render(n.answer);
  } else {
    r.answer = render(fixed_guess(puzzle));
  }
  r.reward_tenths = score(parse_response(format_response(r.thinking, r.answer)), puzzle).tenths();
  return r;
}

Rollout rollout(const PolicyState& policy, const Puzzle& puzzle, std::uint64_t seed) {
  check_puzzle(puzzle);
  Rng rng(seed);
  std::size_t k = policy.sample(rng.unit());
  const Strategy& s = policy.strategies()[k];
  return render_rollout(s, k, puzzle, execute(s, puzzle), rng.next());
}

// ------------------------------------------------------------------ training

namespace {

// Executor results per (strategy, puzzle); filled on first use.
class OutcomeCache {
 public:
  OutcomeCache(std::span<const Strategy> strategies, std::span<const Puzzle> puzzles)
      : strategies_(strategies), puzzles_(puzzles), cells_(strategies.size() * puzzles.size()) {}

  std::shared_ptr<const SearchOutcome> get(std::size_t k, std::size_t p) {
    std::size_t cell = k * puzzles_.size() + p;
    {
      std::lock_guard lock(mu_);
      if (cells_[cell]) return cells_[cell];
    }
    auto out = std::make_shared<const SearchOutcome>(execute(strategies_[k], puzzles_[p]));
    std::lock_guard lock(mu_);
    if (!cells_[cell]) cells_[cell] = out;
    return cells_[cell];
  }

 private:
  std::span<const Strategy> strategies_;
  std::span<const Puzzle> puzzles_;
  std::mutex mu_;
  std::vector<std::shared_ptr<const SearchOutcome>> cells_;
};

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

class Trainer {
 public:
  static TrainResult run(const PolicyConfig& config, const PolicyState& initial, std::span<const Puzzle> puzzles) {
    config.validate();
    if (puzzles.empty()) throw std::invalid_argument("empty puzzle stream");
    for (const auto& p : puzzles) check_puzzle(p);

    TrainResult result;
    result.initial = initial;
    result.initial.config_ = config;
    PolicyState state = result.initial;
    const std::size_t n_strat = state.strategies_.size();
    const std::vector<double> init_log = log_probs(state);
    OutcomeCache cache(state.strategies_, puzzles);

    const std::size_t n = config.batch_size * config.rollouts;
    const auto n_i = static_cast<std::int64_t>(n);
    std::vector<Rollout> batch(n);

    for (std::size_t step = 0; step < config.steps; ++step) {
      const std::vector<double> tempered = state.probabilities(config.temperature);
      parallel_for(n, config.threads, [&](std::size_t j) {
        std::size_t item = j / config.rollouts;
        std::size_t p = (step * config.batch_size + item) % puzzles.size();
        Rng rng(derive_seed(config.seed, {step, j}));
        std::size_t k = state.sample(rng.unit());
        batch[j] = render_rollout(state.strategies_[k], k, puzzles[p], *cache.get(k, p), rng.next());
      });

      // Advantages in units of 1/(10 n): (r_j + c) * n - sum_i (r_i + c).
      std::int64_t sum = 0;
      std::int64_t raw_sum = 0;
      for (const Rollout& r : batch) {
        sum += r.reward_tenths + config.reward_shift_tenths;
        raw_sum += r.reward_tenths;
      }
      std::vector<std::int64_t> adv_by_strategy(n_strat, 0);
      for (const Rollout& r : batch) {
        adv_by_strategy[r.strategy] += (r.reward_tenths + config.reward_shift_tenths) * n_i - sum;
      }

      // Score-function gradient. The advantages sum to zero, so the
      // -pi_T term of d log pi_T / d logits drops out.
      const double scale = 1.0 / (10.0 * static_cast<double>(n) * static_cast<double>(n) * config.temperature);
      std::vector<double> grad(n_strat, 0.0);
      for (std::size_t k = 0; k < n_strat; ++k) {
        if (state.support_[k]) grad[k] = static_cast<double>(adv_by_strategy[k]) * scale;
      }

      // KL(pi || pi_0) pull towards the initial distribution.
      if (config.kl_coef > 0) {
        std::vector<double> cur = log_probs(state);
        std::vector<double> pi = state.probabilities();
        double kl = 0;
        for (std::size_t k = 0; k < n_strat; ++k) {
          if (state.support_[k]) kl += pi[k] * (cur[k] - init_log[k]);
        }
        for (std::size_t k = 0; k < n_strat; ++k) {
          if (state.support_[k]) grad[k] -= config.kl_coef * pi[k] * (cur[k] - init_log[k] - kl);
        }
      }

      if (!all_finite(grad)) {
        nlohmann::json dump = state.to_json();
        dump["gradient"] = grad;
        throw TrainingError("non-finite gradient at step " + std::to_string(step + 1), std::move(dump));
      }
      for (std::size_t k = 0; k < n_strat; ++k) {
        if (state.support_[k]) state.logits_[k] += config.learning_rate * grad[k];
      }
      ++state.step_;

      StepMetrics m;
      m.step = state.step_;
      m.mean_reward = static_cast<double>(raw_sum) / (10.0 * static_cast<double>(n));
      m.probabilities = state.probabilities();
      if (!all_finite(m.probabilities)) {
        throw TrainingError("non-finite policy at step " + std::to_string(m.step), state.to_json());
      }
      for (std::size_t k = 0; k < n_strat; ++k) {
        for (Behavior b : kBehaviors) {
          if (uses(state.strategies_[k], b)) m.expected_behavior[static_cast<std::size_t>(b)] += m.probabilities[k];
        }
      }
      std::array<std::uint64_t, 4> totals{};
      for (const Rollout& r : batch) {
        BehaviorCounts c = count_rules(r.thinking);
        for (std::size_t b = 0; b < 4; ++b) totals[b] += c.counts[b];
      }
      for (std::size_t b = 0; b < 4; ++b) m.mean_counts[b] = static_cast<double>(totals[b]) / static_cast<double>(n);
      result.steps.push_back(std::move(m));
    }
    result.final_state = std::move(state);
    return result;
  }

 private:
  static std::vector<double> log_probs(const PolicyState& s) {
    std::vector<double> p = s.probabilities();
    std::vector<double> out(p.size(), 0.0);
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (s.support_[k]) out[k] = std::log(p[k]);
    }
    return out;
  }
};

TrainResult train(const PolicyConfig& config, const PolicyState& initial, std::span<const Puzzle> puzzles) {
  return Trainer::run(config, initial, puzzles);
}

std::vector<double> strategy_rewards(std::span<const Strategy> strategies, std::span<const Puzzle> puzzles,
                                     unsigned threads) {
  if (puzzles.empty()) throw std::invalid_argument("empty puzzle set");
  std::vector<int> tenths(strategies.size() * puzzles.size());
  parallel_for(tenths.size(), threads, [&](std::size_t cell) {
    std::size_t k = cell / puzzles.size();
    const Puzzle& p = puzzles[cell % puzzles.size()];
    tenths[cell] = render_rollout(strategies[k], k, p, execute(strategies[k], p), 0).reward_tenths;
  });
  std::vector<double> out(strategies.size());
  for (std::size_t k = 0; k < strategies.size(); ++k) {
    auto first = tenths.begin() + static_cast<std::ptrdiff_t>(k * puzzles.size());
    std::int64_t sum = std::accumulate(first, first + static_cast<std::ptrdiff_t>(puzzles.size()), std::int64_t{0});
    out[k] = static_cast<double>(sum) / (10.0 * static_cast<double>(puzzles.size()));
  }
  return out;
}

double expected_reward(std::span<const double> probabilities, std::span<const double> rewards) {
  if (probabilities.size() != rewards.size()) throw std::invalid_argument("size mismatch");
  double total = 0;
  for (std::size_t k = 0; k < rewards.size(); ++k) total += probabilities[k] * rewards[k];
  return total;
}

std::string metrics_csv(const PolicyState& policy, std::span<const StepMetrics> steps) {
  std::ostringstream out;
  out.precision(17);
  out << "step,mean_reward";
  for (const auto& s : policy.strategies()) out << ",p_" << s.name;
  for (Behavior b : kBehaviors) out << ",expected_" << behavior_name(b);
  for (Behavior b : kBehaviors) out << ",count_" << behavior_name(b);
  out << '\n';
  for (const StepMetrics& m : steps) {
    out << m.step << ',' << m.mean_reward;
    for (double p : m.probabilities) out << ',' << p;
    for (double e : m.expected_behavior) out << ',' << e;
    for (double c : m.mean_counts) out << ',' << c;
    out << '\n';
  }
  return out.str();
}

// ------------------------------------------------------------------ experiment config

namespace {

std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (!in || !(in >> std::ws).eof()) throw ConfigError("bad value for " + key + ": '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("bad value for " + key + ": '" + value + "'");
}

Behavior parse_behavior(const std::string& key, const std::string& value) {
  if (auto b = behavior_from_name(value)) return *b;
  throw ConfigError("unknown behavior for " + key + ": '" + value + "'");
}

}  // namespace

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> out;
  std::string section;
  std::size_t line_no = 0;
  while (!text.empty()) {
    std::size_t eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text.remove_prefix(eol == std::string_view::npos ? text.size() : eol + 1);
    ++line_no;

    // Cut comments outside quotes.
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line = line.substr(0, i);
        break;
      }
    }
    line = strip(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": bad section header");
      section = std::string(strip(line.substr(1, line.size() - 2)));
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    std::string key(strip(line.substr(0, eq)));
    std::string_view value = strip(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (!section.empty()) key = section + "." + key;
    out[key] = std::string(value);
  }
  return out;
}

ExperimentConfig ExperimentConfig::from_key_values(const std::map<std::string, std::string>& kv) {
  ExperimentConfig c;
  std::optional<Behavior> seed_behavior;
  std::optional<double> seed_mass;
  for (const auto& [full_key, value] : kv) {
    std::string key = full_key.substr(full_key.rfind('.') == std::string::npos ? 0 : full_key.rfind('.') + 1);
    if (key == "learning_rate") c.policy.learning_rate = parse_number<double>(key, value);
    else if (key == "batch_size") c.policy.batch_size = parse_number<std::size_t>(key, value);
    else if (key == "rollouts") c.policy.rollouts = parse_number<std::size_t>(key, value);
    else if (key == "temperature") c.policy.temperature = parse_number<double>(key, value);
    else if (key == "kl_coef") c.policy.kl_coef = parse_number<double>(key, value);
    else if (key == "steps") c.policy.steps = parse_number<std::size_t>(key, value);
    else if (key == "seed") c.policy.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "threads") c.policy.threads = parse_number<unsigned>(key, value);
    else if (key == "reward_shift_tenths") c.policy.reward_shift_tenths = parse_number<std::int64_t>(key, value);
    else if (key == "budget_three") c.budget.three = parse_number<std::uint64_t>(key, value);
    else if (key == "budget_four") c.budget.four = parse_number<std::uint64_t>(key, value);
    else if (key == "include_guess") c.include_guess = parse_bool(key, value);
    else if (key == "puzzle_seed") c.puzzle_seed = parse_number<std::uint64_t>(key, value);
    else if (key == "train_puzzles") c.train_puzzles = parse_number<std::size_t>(key, value);
    else if (key == "eval_puzzles") c.eval_puzzles = parse_number<std::size_t>(key, value);
    else if (key == "mask_behavior") c.mask_behavior = value.empty() || value == "none" ? std::nullopt : std::optional(parse_behavior(key, value));
    else if (key == "seed_behavior") seed_behavior = parse_behavior(key, value);
    else if (key == "seed_mass") seed_mass = parse_number<double>(key, value);
    else throw ConfigError("unknown key '" + full_key + "'");
  }
  if (seed_behavior.has_value() != seed_mass.has_value()) {
    throw ConfigError("seed_behavior and seed_mass go together");
  }
  if (seed_mass) {
    if (!(*seed_mass > 0 && *seed_mass < 1)) throw ConfigError("seed_mass must be in (0, 1)");
    c.seed_mass = std::pair{*seed_behavior, *seed_mass};
  }
  if (c.train_puzzles == 0 || c.eval_puzzles == 0) throw ConfigError("puzzle counts must be positive");
  if (c.budget.three == 0 || c.budget.four == 0) throw ConfigError("node budgets must be positive");
  c.policy.validate();
  return c;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j = {{"learning_rate", policy.learning_rate},
                      {"batch_size", policy.batch_size},
                      {"rollouts", policy.rollouts},
                      {"temperature", policy.temperature},
                      {"kl_coef", policy.kl_coef},
                      {"steps", policy.steps},
                      {"seed", policy.seed},
                      {"reward_shift_tenths", policy.reward_shift_tenths},
                      {"budget_three", budget.three},
                      {"budget_four", budget.four},
                      {"include_guess", include_guess},
                      {"puzzle_seed", puzzle_seed},
                      {"train_puzzles", train_puzzles},
                      {"eval_puzzles", eval_puzzles},
                      {"mask_behavior", mask_behavior ? std::string(behavior_name(*mask_behavior)) : "none"}};
  if (seed_mass) {
    j["seed_behavior"] = std::string(behavior_name(seed_mass->first));
    j["seed_mass"] = seed_mass->second;
  }
  return j;
}

PolicyState initial_policy(const ExperimentConfig& config) {
  std::vector<Strategy> strategies = all_strategies(config.budget, config.include_guess);
  std::vector<double> probs(strategies.size(), 1.0);
  if (config.seed_mass) {
    auto [behavior, mass] = *config.seed_mass;
    std::size_t with = 0;
    for (const auto& s : strategies) with += uses(s, behavior);
    std::size_t without = strategies.size() - with;
    for (std::size_t k = 0; k < strategies.size(); ++k) {
      probs[k] = uses(strategies[k], behavior) ? mass / static_cast<double>(with)
                                               : (1.0 - mass) / static_cast<double>(without);
    }
  }
  if (config.mask_behavior) {
    for (std::size_t k = 0; k < strategies.size(); ++k) {
      if (uses(strategies[k], *config.mask_behavior)) probs[k] = 0.0;
    }
  }
  double z = std::accumulate(probs.begin(), probs.end(), 0.0);
  if (z <= 0) throw ConfigError("every strategy is masked");
  for (double& p : probs) p /= z;
  return PolicyState::from_probabilities(std::move(strategies), probs, config.policy);
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  GenConfig gen;
  gen.threads = config.policy.threads;
  std::vector<Puzzle> all = generate(config.puzzle_seed, config.train_puzzles + config.eval_puzzles, gen);
  std::span<const Puzzle> train_set(all.data(), config.train_puzzles);
  std::span<const Puzzle> eval_set(all.data() + config.train_puzzles, config.eval_puzzles);

  ExperimentResult out;
  PolicyState init = initial_policy(config);
  out.training = train(config.policy, init, train_set);
  out.eval_rewards = strategy_rewards(init.strategies(), eval_set, config.policy.threads);
  out.initial_eval_reward = expected_reward(init.probabilities(), out.eval_rewards);
  out.final_eval_reward = expected_reward(out.training.final_state.probabilities(), out.eval_rewards);
  return out;
}

}  // namespace forge
