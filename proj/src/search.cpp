#include "forge/search.hpp"

#include "forge/seed.hpp"

#include <algorithm>
#include <set>

namespace forge {

std::string BehaviorFlags::label() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += '+';
    out += name;
  };
  add(backtracking, "bt");
  add(verification, "ver");
  add(subgoal, "sub");
  add(backward, "bwd");
  return out.empty() ? "none" : out;
}

Expr fixed_guess(const Puzzle& puzzle) {
  Expr e = Expr::leaf(puzzle.numbers.front());
  for (std::size_t i = 1; i < puzzle.numbers.size(); ++i) {
    e = Expr::binary(Op::Add, e, Expr::leaf(puzzle.numbers[i]));
  }
  return e;
}

namespace {

// Every ordered way to join two partial results with one operator.
std::vector<Candidate> combine(const Candidate& a, const Candidate& b) {
  std::vector<Candidate> out;
  out.reserve(6);
  out.push_back({Expr::binary(Op::Add, a.expr, b.expr), a.value + b.value});
  out.push_back({Expr::binary(Op::Sub, a.expr, b.expr), a.value - b.value});
  out.push_back({Expr::binary(Op::Sub, b.expr, a.expr), b.value - a.value});
  out.push_back({Expr::binary(Op::Mul, a.expr, b.expr), a.value * b.value});
  if (!b.value.is_zero()) out.push_back({Expr::binary(Op::Div, a.expr, b.expr), a.value / b.value});
  if (!a.value.is_zero()) out.push_back({Expr::binary(Op::Div, b.expr, a.expr), b.value / a.value});
  return out;
}

struct Exhausted {};

class Searcher {
 public:
  Searcher(const Puzzle& puzzle, const SearchConfig& config)
      : target_(puzzle.target), config_(config), rng_(config.order_seed.value_or(0)) {}

  SearchOutcome run(const Puzzle& puzzle) {
    std::vector<Candidate> state;
    for (std::int64_t n : puzzle.numbers) state.push_back({Expr::leaf(n), Rational(n)});
    try {
      visit(state);
    } catch (const Exhausted&) {
      out_.budget_exhausted = true;
    }
    return std::move(out_);
  }

 private:
  bool hit(const Candidate& c) {
    out_.solved = true;
    out_.answer = c.expr;
    return true;
  }

  bool check_pair(const Candidate& x, const Candidate& y) {
    for (const Candidate& c : combine(x, y)) {
      if (c.value == target_) return hit(c);
    }
    return false;
  }

  bool factor_triple(const std::vector<Candidate>& s) {
    for (std::size_t k = 0; k < 3; ++k) {
      const Candidate& v = s[k];
      const Candidate& x = s[(k + 1) % 3];
      const Candidate& y = s[(k + 2) % 3];
      auto pair_values = combine(x, y);
      // target = v op need  or  target = need op v
      struct Option {
        Op op;
        bool known_left;
        std::optional<Rational> need;
      };
      std::vector<Option> options = {
          {Op::Mul, true, v.value.is_zero() ? std::nullopt : std::optional<Rational>(target_ / v.value)},
          {Op::Div, true, target_.is_zero() ? std::nullopt : std::optional<Rational>(v.value / target_)},
          {Op::Div, false, target_ * v.value},
      };
      for (const Option& o : options) {
        if (!o.need) continue;
        if (o.op == Op::Div && o.known_left && o.need->is_zero()) continue;
        if (o.op == Op::Div && !o.known_left && v.value.is_zero()) continue;
        for (const Candidate& c : pair_values) {
          if (c.value != *o.need) continue;
          out_.factors.push_back(GoalFactor{v.expr, c.expr, c.value, o.op, o.known_left});
          Expr whole = o.known_left ? Expr::binary(o.op, v.expr, c.expr) : Expr::binary(o.op, c.expr, v.expr);
          return hit(Candidate{whole, target_});
        }
      }
    }
    return false;
  }

  bool subgoal_triple(const std::vector<Candidate>& s) {
    for (std::size_t k = 0; k < 3; ++k) {
      const Candidate& v = s[k];
      for (const Candidate& mid : combine(s[(k + 1) % 3], s[(k + 2) % 3])) {
        if (check_pair(mid, v)) return true;
      }
    }
    return false;
  }

  static std::string key(const std::vector<Candidate>& s) {
    std::vector<std::string> parts;
    parts.reserve(s.size());
    for (const Candidate& c : s) parts.push_back(c.value.str());
    std::sort(parts.begin(), parts.end());
    std::string k;
    for (const auto& p : parts) {
      k += p;
      k += ',';
    }
    return k;
  }

  bool visit(const std::vector<Candidate>& state) {
    if (state.size() == 1) {
      if (state[0].value == target_) return hit(state[0]);
      out_.misses.push_back(state[0]);
      return false;
    }
    const BehaviorFlags& f = config_.flags;
    if (f.verification && state.size() == 2 && check_pair(state[0], state[1])) return true;
    if (f.backward && state.size() == 3 && factor_triple(state)) return true;
    if (f.subgoal && state.size() == 3) {
      // The pair split covers every completion, so a miss closes the state.
      if (subgoal_triple(state)) return true;
      ++out_.pruned;
      return false;
    }
    if (f.verification) {
      if (!seen_.insert(key(state)).second) {
        ++out_.pruned;
        return false;
      }
    }

    std::vector<std::vector<Candidate>> children;
    for (std::size_t i = 0; i < state.size(); ++i) {
      for (std::size_t j = i + 1; j < state.size(); ++j) {
        for (Candidate& c : combine(state[i], state[j])) {
          std::vector<Candidate> next;
          next.reserve(state.size() - 1);
          for (std::size_t k = 0; k < state.size(); ++k) {
            if (k != i && k != j) next.push_back(state[k]);
          }
          next.push_back(std::move(c));
          children.push_back(std::move(next));
        }
      }
    }
    if (config_.order_seed) {
      for (std::size_t i = children.size(); i > 1; --i) std::swap(children[i - 1], children[rng_.index(i)]);
    }
    for (const auto& child : children) {
      if (out_.expansions >= config_.node_budget) throw Exhausted{};
      ++out_.expansions;
      if (visit(child)) return true;
      if (!f.backtracking) return false;
      ++out_.retreats;
    }
    return false;
  }

  Rational target_;
  SearchConfig config_;
  Rng rng_;
  SearchOutcome out_;
  std::set<std::string> seen_;
};

}  // namespace

SearchOutcome run_search(const Puzzle& puzzle, const SearchConfig& config) {
  return Searcher(puzzle, config).run(puzzle);
}

}  // namespace forge
