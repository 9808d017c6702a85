#include "forge/tracegen.hpp"

#include "forge/cues.hpp"
#include "forge/parallel.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

namespace forge {

std::string_view profile_name(Profile p) {
  switch (p) {
    case Profile::AllStrategies: return "all_strategies";
    case Profile::BacktrackingOnly: return "backtracking_only";
    case Profile::BacktrackingVerification: return "backtracking_verification";
    case Profile::BacktrackingSubgoal: return "backtracking_subgoal";
    case Profile::BacktrackingBackwardChaining: return "backtracking_backward_chaining";
    case Profile::EmptyCot: return "empty_cot";
    case Profile::PlaceholderCot: return "placeholder_cot";
    case Profile::AllStrategiesIncorrect: return "all_strategies_incorrect";
  }
  return "?";
}

std::optional<Profile> profile_from_name(std::string_view name) {
  for (Profile p : kProfiles) {
    if (profile_name(p) == name) return p;
  }
  return std::nullopt;
}

BehaviorFlags profile_flags(Profile p) {
  switch (p) {
    case Profile::AllStrategies:
    case Profile::AllStrategiesIncorrect: return {true, true, true, true};
    case Profile::BacktrackingOnly: return {true, false, false, false};
    case Profile::BacktrackingVerification: return {true, true, false, false};
    case Profile::BacktrackingSubgoal: return {true, false, true, false};
    case Profile::BacktrackingBackwardChaining: return {true, false, false, true};
    case Profile::EmptyCot:
    case Profile::PlaceholderCot: return {};
  }
  return {};
}

bool is_behavioral(Profile p) { return p != Profile::EmptyCot && p != Profile::PlaceholderCot; }

const char* const kSystemPrompt =
    "You are a helpful assistant. You first think about the reasoning process and then provide the user "
    "with the answer.";

std::string countdown_prompt(const Puzzle& puzzle) {
  std::string nums;
  for (std::size_t i = 0; i < puzzle.numbers.size(); ++i) {
    if (i) nums += ", ";
    nums += std::to_string(puzzle.numbers[i]);
  }
  return "Using the numbers [" + nums + "], create an equation that equals " + std::to_string(puzzle.target) +
         ". You can use basic arithmetic operations (+, -, *, /) and each number must be used exactly once. "
         "Show your work in <think> </think> tags. And return the final answer in <answer> </answer> tags, "
         "for example <answer> (1 + 2) / 3 </answer>.";
}

std::size_t count_words(std::string_view text) {
  std::size_t words = 0;
  bool in_word = false;
  for (char c : text) {
    bool space = std::isspace(static_cast<unsigned char>(c));
    if (!space && !in_word) ++words;
    in_word = !space;
  }
  return words;
}

namespace {

using Values = std::vector<std::pair<std::string_view, std::string>>;

std::string join_numbers(const std::vector<std::int64_t>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(xs[i]);
  }
  return out;
}

// "30 - 25 = 5, 5 + 3 = 8, 8 * 4 = 32"
Rational steps_into(const Expr& e, std::vector<std::string>& steps) {
  if (e.is_leaf()) return Rational(e.value());
  Rational l = steps_into(e.left(), steps);
  Rational r = steps_into(e.right(), steps);
  Rational v;
  switch (e.op()) {
    case Op::Add: v = l + r; break;
    case Op::Sub: v = l - r; break;
    case Op::Mul: v = l * r; break;
    case Op::Div: v = r.is_zero() ? Rational(0) : l / r; break;
  }
  steps.push_back(l.str() + " " + op_symbol(e.op()) + " " + r.str() + " = " + v.str());
  return v;
}

std::string steps_of(const Expr& e) {
  std::vector<std::string> steps;
  steps_into(e, steps);
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i) out += ", ";
    out += steps[i];
  }
  return out;
}

// First binary node (post-order) whose children are both leaves.
const Expr* first_intermediate(const Expr& e) {
  if (e.is_leaf()) return nullptr;
  if (e.left().is_leaf() && e.right().is_leaf()) return &e;
  if (const Expr* l = first_intermediate(e.left())) return l;
  return first_intermediate(e.right());
}

class Writer {
 public:
  Writer(Rng& rng) : rng_(rng) {}

  void neutral(std::string sentence) { add(std::move(sentence)); }

  void from(std::initializer_list<TemplateSlot> slots, const Values& values) {
    std::vector<const PhraseTemplate*> pool;
    for (TemplateSlot s : slots) {
      auto fam = CueRegistry::instance().family(s);
      pool.insert(pool.end(), fam.begin(), fam.end());
    }
    const PhraseTemplate* t = pool[rng_.index(pool.size())];
    add(fill_template(t->text, values));
  }

  std::string str() && { return std::move(text_); }

 private:
  void add(std::string sentence) {
    if (!text_.empty()) text_ += ' ';
    text_ += sentence;
  }
  Rng& rng_;
  std::string text_;
};

struct FactorText {
  std::string need;
  std::string rest;
  std::string relation;
};

FactorText describe(const GoalFactor& f, std::int64_t target) {
  std::string known = eval(f.known).str();
  std::string need = f.need.str();
  std::string relation = f.known_left ? known + " " + op_symbol(f.op) + " " + need
                                      : need + " " + op_symbol(f.op) + " " + known;
  return {need, join_numbers(leaves(f.needed)), relation + " = " + std::to_string(target)};
}

// Goal factoring read off a finished expression: target = left op right, with
// the larger side as the part still needed.
std::optional<GoalFactor> factor_of(const Expr& e) {
  if (e.is_leaf()) return std::nullopt;
  bool known_left = e.left().leaf_count() < e.right().leaf_count();
  const Expr& known = known_left ? e.left() : e.right();
  const Expr& needed = known_left ? e.right() : e.left();
  try {
    return GoalFactor{known, needed, eval(needed), e.op(), known_left};
  } catch (const EvalError&) {
    return std::nullopt;
  }
}

FactorText fallback_factor(const Puzzle& p) {
  std::int64_t v = p.numbers.back();
  std::vector<std::int64_t> rest(p.numbers.begin(), p.numbers.end() - 1);
  std::string need = std::to_string(p.target - v);
  return {need, join_numbers(rest), need + " + " + std::to_string(v) + " = " + std::to_string(p.target)};
}

}  // namespace

Narration narrate(const Puzzle& puzzle, const SearchOutcome& outcome, const BehaviorFlags& flags, Rng& rng,
                  const NarrationOptions& options) {
  Writer w(rng);
  const std::string target = std::to_string(puzzle.target);
  w.neutral("We have the numbers " + join_numbers(puzzle.numbers) + " and want to make " + target +
            " using each number once.");

  std::optional<Expr> final_expr = options.conclusion ? std::optional<Expr>(options.conclusion->expr) : outcome.answer;

  if (flags.backward) {
    std::optional<FactorText> ft;
    if (!outcome.factors.empty()) {
      ft = describe(outcome.factors.front(), puzzle.target);
    } else if (outcome.solved && outcome.answer) {
      if (auto f = factor_of(*outcome.answer)) ft = describe(*f, puzzle.target);
    }
    if (!ft && (outcome.solved || options.conclusion)) ft = fallback_factor(puzzle);
    if (ft) {
      w.from({TemplateSlot::FactorGoal},
             {{"target", target}, {"need", ft->need}, {"rest", ft->rest}, {"relation", ft->relation}});
    }
  }

  std::size_t shown = std::min(options.max_misses, outcome.misses.size());
  Rational goal(puzzle.target);
  for (std::size_t i = 0; i < shown; ++i) {
    const Candidate& m = outcome.misses[i];
    const std::string value = m.value.str();
    w.neutral("Trying " + render(m.expr) + " gives " + value + ".");
    Values vals{{"value", value}, {"target", target}};
    if (flags.verification) {
      if (m.value > goal) {
        w.from({TemplateSlot::CheckMiss, TemplateSlot::CheckMissHigh}, vals);
      } else {
        w.from({TemplateSlot::CheckMiss, TemplateSlot::CheckMissLow}, vals);
      }
    }
    if (flags.backtracking && (i + 1 < shown || final_expr)) {
      w.from({TemplateSlot::Retreat}, vals);
    }
  }

  Expr answer = final_expr ? *final_expr : fixed_guess(puzzle);
  if (!final_expr && !outcome.misses.empty()) {
    // Unsolved: answer with the closest candidate seen.
    const Candidate* best = &outcome.misses.front();
    for (const Candidate& m : outcome.misses) {
      if (distance(m.value, goal) < distance(best->value, goal)) best = &m;
    }
    answer = best->expr;
  }

  if (final_expr) {
    if (flags.subgoal) {
      if (const Expr* mid = first_intermediate(*final_expr)) {
        w.from({TemplateSlot::Decompose}, {{"a", std::to_string(mid->left().value())},
                                           {"b", std::to_string(mid->right().value())},
                                           {"value", eval(*mid).str()}});
      }
    }
    Rational value = [&] {
      try {
        return eval(*final_expr);
      } catch (const EvalError&) {
        return Rational(0);
      }
    }();
    if (options.conclusion) {
      w.neutral("Trying " + render(*final_expr) + " gives " + value.str() + ", the closest to " + target +
                " so far.");
    } else {
      w.neutral("Trying " + render(*final_expr) + " gives " + value.str() + ".");
      if (flags.verification) {
        w.from({TemplateSlot::CheckHit}, {{"steps", steps_of(*final_expr)}, {"target", target}});
      }
    }
  }
  w.neutral("So the answer is " + render(answer) + ".");
  return Narration{std::move(w).str(), answer};
}

namespace {

constexpr std::uint64_t kTraceSearchBudget = 200'000;

// A complete candidate that misses the target, made by swapping the root
// operator of the witness.
std::optional<Candidate> perturb(const Expr& witness, std::int64_t target) {
  if (witness.is_leaf()) return std::nullopt;
  for (Op op : kAllOps) {
    if (op == witness.op()) continue;
    Expr e = Expr::binary(op, witness.left(), witness.right());
    try {
      Rational v = eval(e);
      if (v != Rational(target)) return Candidate{e, v};
    } catch (const EvalError&) {
    }
  }
  return std::nullopt;
}

Trace behavioral(const Puzzle& puzzle, Profile profile, std::uint64_t seed) {
  BehaviorFlags flags = profile_flags(profile);
  bool incorrect = profile == Profile::AllStrategiesIncorrect;
  SearchConfig cfg{flags, kTraceSearchBudget, derive_seed(seed, {0x5EA7C4})};
  SearchOutcome outcome = run_search(puzzle, cfg);
  if (!outcome.solved && !incorrect) {
    throw GenerationError("puzzle " + puzzle.id + " has no solution for profile " +
                          std::string(profile_name(profile)));
  }
  if (outcome.misses.empty()) {
    std::optional<Candidate> probe;
    if (outcome.answer) {
      probe = perturb(*outcome.answer, puzzle.target);
    } else {
      Expr guess = fixed_guess(puzzle);
      Rational v = eval(guess);
      probe = v != Rational(puzzle.target) ? std::optional(Candidate{guess, v}) : perturb(guess, puzzle.target);
    }
    if (!probe) throw GenerationError("puzzle " + puzzle.id + " offers no failed candidate to narrate");
    outcome.misses.push_back(*probe);
  }

  Rng rng(derive_seed(seed, {0x7E4F1A7E}));
  NarrationOptions opts;
  opts.max_misses = static_cast<std::size_t>(rng.uniform(1, 3));
  if (incorrect) {
    std::size_t shown = std::min(opts.max_misses, outcome.misses.size());
    Rational goal(puzzle.target);
    const Candidate* best = &outcome.misses.front();
    for (std::size_t i = 0; i < shown; ++i) {
      if (distance(outcome.misses[i].value, goal) < distance(best->value, goal)) best = &outcome.misses[i];
    }
    opts.conclusion = *best;
  }
  Narration n = narrate(puzzle, outcome, flags, rng, opts);

  Trace t;
  t.puzzle_id = puzzle.id;
  t.profile = profile;
  t.thinking = std::move(n.thinking);
  t.answer = render(n.answer);
  t.correct = !incorrect;
  t.word_count = count_words(t.thinking);
  return t;
}

}  // namespace

Trace synthesize(const Puzzle& puzzle, Profile profile, std::uint64_t seed) {
  check_puzzle(puzzle);
  if (is_behavioral(profile)) return behavioral(puzzle, profile, seed);

  SolveResult solved = solve(puzzle);
  if (!solved.solvable()) {
    throw GenerationError("puzzle " + puzzle.id + " has no solution for profile " +
                          std::string(profile_name(profile)));
  }
  Trace t;
  t.puzzle_id = puzzle.id;
  t.profile = profile;
  t.answer = render(*solved.witness);
  t.correct = true;
  if (profile == Profile::PlaceholderCot) {
    std::size_t words = behavioral(puzzle, Profile::AllStrategies, seed).word_count;
    std::string filler;
    filler.reserve(words * (kPlaceholderToken.size() + 1));
    for (std::size_t i = 0; i < words; ++i) {
      if (i) filler += ' ';
      filler += kPlaceholderToken;
    }
    t.thinking = std::move(filler);
  }
  t.word_count = count_words(t.thinking);
  return t;
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

std::vector<bool> eval_mask(const std::vector<Puzzle>& puzzles, std::uint64_t seed, std::size_t eval_count) {
  std::vector<std::size_t> order(puzzles.size());
  std::iota(order.begin(), order.end(), 0);
  auto rank = [&](std::size_t i) { return derive_seed(seed, {fnv1a(puzzles[i].id)}); };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    auto ra = rank(a), rb = rank(b);
    return ra != rb ? ra < rb : a < b;
  });
  std::vector<bool> mask(puzzles.size(), false);
  for (std::size_t k = 0; k < std::min(eval_count, order.size()); ++k) mask[order[k]] = true;
  return mask;
}

DatasetSplit build_dataset(Profile profile, std::uint64_t seed, const DatasetOptions& options) {
  if (options.eval > options.total) throw GenerationError("eval split larger than the dataset");
  GenConfig gen = options.puzzles;
  gen.require_solvable = true;
  gen.threads = options.threads;
  std::vector<Puzzle> puzzles = generate(seed, options.total, gen);

  std::vector<Trace> traces(puzzles.size());
  parallel_for(puzzles.size(), options.threads, [&](std::size_t i) {
    traces[i] = synthesize(puzzles[i], profile, derive_seed(seed, {0xDA7A, i}));
  });

  std::vector<bool> is_eval = eval_mask(puzzles, seed, options.eval);
  DatasetSplit split;
  split.train.reserve(options.total - options.eval);
  split.eval.reserve(options.eval);
  for (std::size_t i = 0; i < puzzles.size(); ++i) {
    Example ex{std::move(puzzles[i]), std::move(traces[i])};
    (is_eval[i] ? split.eval : split.train).push_back(std::move(ex));
  }
  return split;
}

}  // namespace forge
