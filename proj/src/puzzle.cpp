#include "forge/puzzle.hpp"

#include "forge/parallel.hpp"
#include "forge/seed.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>

namespace forge {

void check_puzzle(const Puzzle& p) {
  if (p.numbers.size() < 3 || p.numbers.size() > 4) {
    throw std::invalid_argument("puzzle " + p.id + " must have 3 or 4 numbers");
  }
  for (std::int64_t n : p.numbers) {
    if (n < 1) throw std::invalid_argument("puzzle " + p.id + " has a number below 1");
  }
  if (p.target < 1) throw std::invalid_argument("puzzle " + p.id + " has a target below 1");
}

RejectionBudgetExceeded::RejectionBudgetExceeded(std::size_t index, std::size_t attempts)
    : std::runtime_error("rejection budget of " + std::to_string(attempts) +
                         " attempts exceeded for puzzle index " + std::to_string(index)),
      index_(index) {}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Solvable: return "solvable";
    case SolveStatus::Unsolvable: return "unsolvable";
    case SolveStatus::Undetermined: return "undetermined";
  }
  return "?";
}

namespace {

// ---------------------------------------------------------------- values

struct Overflow {};

// int64 fraction, always reduced. Any result that leaves int64 throws Overflow
// and the caller redoes the work with Rational.
struct Frac {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Frac make(__int128 n, __int128 d) {
    if (d < 0) {
      n = -n;
      d = -d;
    }
    __int128 a = n < 0 ? -n : n;
    __int128 b = d;
    while (b != 0) {
      __int128 t = a % b;
      a = b;
      b = t;
    }
    if (a > 1) {
      n /= a;
      d /= a;
    }
    constexpr __int128 lim = INT64_MAX;
    if (n > lim || n < -lim || d > lim) throw Overflow{};
    return Frac{static_cast<std::int64_t>(n), static_cast<std::int64_t>(d)};
  }

  static Frac from(std::int64_t v) { return Frac{v, 1}; }
  bool is_zero() const { return num == 0; }
  bool equals(std::int64_t v) const { return den == 1 && num == v; }
};

Frac apply(Op op, const Frac& a, const Frac& b) {
  using I = __int128;
  switch (op) {
    case Op::Add: return Frac::make(I(a.num) * b.den + I(b.num) * a.den, I(a.den) * b.den);
    case Op::Sub: return Frac::make(I(a.num) * b.den - I(b.num) * a.den, I(a.den) * b.den);
    case Op::Mul: return Frac::make(I(a.num) * b.num, I(a.den) * b.den);
    case Op::Div: return Frac::make(I(a.num) * b.den, I(a.den) * b.num);
  }
  return a;
}

Rational apply(Op op, const Rational& a, const Rational& b) {
  switch (op) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    case Op::Div: return a / b;
  }
  return a;
}

bool equals(const Frac& v, std::int64_t target) { return v.equals(target); }
bool equals(const Rational& v, std::int64_t target) { return v == Rational(target); }
bool is_zero(const Frac& v) { return v.is_zero(); }
bool is_zero(const Rational& v) { return v.is_zero(); }
Frac lift(std::int64_t v, Frac*) { return Frac::from(v); }
Rational lift(std::int64_t v, Rational*) { return Rational(v); }

// ---------------------------------------------------------------- shapes

// A tree shape over a contiguous run of leaf positions.
struct Shape {
  std::size_t leaves = 1;
  int left = -1;  // index into the shape pool, -1 for a leaf
  int right = -1;
};

class ShapePool {
 public:
  // Roots for every shape with n leaves, left-deep first.
  const std::vector<int>& roots(std::size_t n) {
    if (n >= by_size_.size()) by_size_.resize(n + 1);
    if (!by_size_[n].empty()) return by_size_[n];
    std::vector<int> out;
    if (n == 1) {
      out.push_back(add(Shape{1, -1, -1}));
    } else {
      for (std::size_t left = n - 1; left >= 1; --left) {
        std::vector<int> ls = roots(left);
        std::vector<int> rs = roots(n - left);
        for (int l : ls) {
          for (int r : rs) out.push_back(add(Shape{n, l, r}));
        }
      }
    }
    by_size_[n] = out;
    return by_size_[n];
  }

  const Shape& at(int i) const { return pool_[static_cast<std::size_t>(i)]; }

 private:
  int add(Shape s) {
    pool_.push_back(s);
    return static_cast<int>(pool_.size() - 1);
  }
  std::vector<Shape> pool_;
  std::vector<std::vector<int>> by_size_;
};

struct BudgetExhausted {};

template <typename V>
class ShapeEvaluator {
 public:
  ShapeEvaluator(const ShapePool& pool, std::span<const std::int64_t> operands, std::uint64_t& explored,
                 std::optional<std::uint64_t> budget)
      : pool_(pool), operands_(operands), explored_(explored), budget_(budget) {}

  // Values of every operator assignment for the subtree, in enumeration order.
  // An empty optional marks a division by zero somewhere inside.
  std::vector<std::optional<V>> values(int shape, std::size_t first_leaf) {
    const Shape& s = pool_.at(shape);
    if (s.left < 0) {
      return {lift(operands_[first_leaf], static_cast<V*>(nullptr))};
    }
    std::size_t left_leaves = pool_.at(s.left).leaves;
    auto ls = values(s.left, first_leaf);
    auto rs = values(s.right, first_leaf + left_leaves);
    std::vector<std::optional<V>> out;
    out.reserve(4 * ls.size() * rs.size());
    for (Op op : kAllOps) {
      for (const auto& l : ls) {
        for (const auto& r : rs) {
          if (budget_ && explored_ >= *budget_) throw BudgetExhausted{};
          ++explored_;
          if (!l || !r || (op == Op::Div && is_zero(*r))) {
            out.emplace_back();
          } else {
            out.emplace_back(apply(op, *l, *r));
          }
        }
      }
    }
    return out;
  }

 private:
  const ShapePool& pool_;
  std::span<const std::int64_t> operands_;
  std::uint64_t& explored_;
  std::optional<std::uint64_t> budget_;
};

std::size_t assignments(std::size_t leaves) {
  std::size_t n = 1;
  for (std::size_t i = 1; i < leaves; ++i) n *= 4;
  return n;
}

Expr decode(const ShapePool& pool, int shape, std::size_t first_leaf, std::size_t index,
            std::span<const std::int64_t> operands) {
  const Shape& s = pool.at(shape);
  if (s.left < 0) return Expr::leaf(operands[first_leaf]);
  std::size_t left_leaves = pool.at(s.left).leaves;
  std::size_t nl = assignments(left_leaves);
  std::size_t nr = assignments(s.leaves - left_leaves);
  std::size_t op_index = index / (nl * nr);
  std::size_t rest = index % (nl * nr);
  return Expr::binary(kAllOps[op_index], decode(pool, s.left, first_leaf, rest / nr, operands),
                      decode(pool, s.right, first_leaf + left_leaves, rest % nr, operands));
}

template <typename V>
std::optional<std::size_t> find_in_shape(const ShapePool& pool, int shape, std::span<const std::int64_t> operands,
                                         std::int64_t target, std::uint64_t& explored,
                                         std::optional<std::uint64_t> budget) {
  ShapeEvaluator<V> ev(pool, operands, explored, budget);
  auto vals = ev.values(shape, 0);
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (vals[i] && equals(*vals[i], target)) return i;
  }
  return std::nullopt;
}

}  // namespace

SolveResult solve_numbers(std::span<const std::int64_t> numbers, std::int64_t target,
                          std::optional<std::uint64_t> budget) {
  if (numbers.empty()) throw std::invalid_argument("solve needs at least one number");
  SolveResult result;
  ShapePool pool;
  const auto& shapes = pool.roots(numbers.size());

  std::vector<std::size_t> order(numbers.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::int64_t> operands(numbers.size());
  try {
    do {
      for (std::size_t i = 0; i < order.size(); ++i) operands[i] = numbers[order[i]];
      for (int shape : shapes) {
        std::uint64_t before = result.explored;
        std::optional<std::size_t> hit;
        try {
          hit = find_in_shape<Frac>(pool, shape, operands, target, result.explored, budget);
        } catch (const Overflow&) {
          result.explored = before;
          hit = find_in_shape<Rational>(pool, shape, operands, target, result.explored, budget);
        }
        if (hit) {
          result.status = SolveStatus::Solvable;
          result.witness = decode(pool, shape, 0, *hit, operands);
          return result;
        }
      }
    } while (std::next_permutation(order.begin(), order.end()));
  } catch (const BudgetExhausted&) {
    result.status = SolveStatus::Undetermined;
    return result;
  }
  result.status = SolveStatus::Unsolvable;
  return result;
}

SolveResult solve(const Puzzle& puzzle, std::optional<std::uint64_t> budget) {
  check_puzzle(puzzle);
  return solve_numbers(puzzle.numbers, puzzle.target, budget);
}

// ---------------------------------------------------------------- generator

namespace {

struct Draw {
  std::vector<std::int64_t> numbers;
  std::int64_t target = 0;
  std::uint64_t seed = 0;
};

Draw draw(std::uint64_t batch_seed, std::size_t index, std::size_t attempt, const GenConfig& cfg) {
  Draw d;
  d.seed = derive_seed(batch_seed, {index, attempt});
  Rng rng(d.seed);
  std::size_t n = index % 2 == 0 ? 3 : 4;
  d.numbers.reserve(n);
  for (std::size_t i = 0; i < n; ++i) d.numbers.push_back(rng.uniform(cfg.min_number, cfg.max_number));
  d.target = rng.uniform(cfg.min_target, cfg.max_target);
  return d;
}

bool acceptable(const Draw& d, const GenConfig& cfg) {
  return !cfg.require_solvable || solve_numbers(d.numbers, d.target).solvable();
}

using Key = std::pair<std::vector<std::int64_t>, std::int64_t>;

Key key_of(const Draw& d) {
  Key k{d.numbers, d.target};
  std::sort(k.first.begin(), k.first.end());
  return k;
}

}  // namespace

std::vector<Puzzle> generate(std::uint64_t seed, std::size_t count, const GenConfig& cfg) {
  if (count == 0) throw ConfigError("count must be at least 1");
  if (cfg.min_number < 1 || cfg.min_number > cfg.max_number) {
    throw ConfigError("number range is empty or below 1");
  }
  if (cfg.min_target < 1 || cfg.min_target > cfg.max_target) {
    throw ConfigError("target range is empty or below 1");
  }
  if (cfg.rejection_budget == 0) throw ConfigError("rejection budget must be positive");

  // Per-index first acceptable draw; independent across indices.
  std::vector<Draw> first(count);
  std::vector<std::size_t> attempt(count, 0);
  parallel_for(count, cfg.threads, [&](std::size_t i) {
    for (std::size_t a = 0; a < cfg.rejection_budget; ++a) {
      Draw d = draw(seed, i, a, cfg);
      if (acceptable(d, cfg)) {
        first[i] = std::move(d);
        attempt[i] = a;
        return;
      }
    }
    throw RejectionBudgetExceeded(i, cfg.rejection_budget);
  });

  // Duplicates are resolved in index order so the result is schedule-free.
  std::set<Key> seen;
  std::vector<Puzzle> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Draw d = std::move(first[i]);
    std::size_t a = attempt[i];
    while (seen.contains(key_of(d))) {
      bool found = false;
      while (++a < cfg.rejection_budget) {
        d = draw(seed, i, a, cfg);
        if (!seen.contains(key_of(d)) && acceptable(d, cfg)) {
          found = true;
          break;
        }
      }
      if (!found) throw RejectionBudgetExceeded(i, cfg.rejection_budget);
    }
    seen.insert(key_of(d));
    char id[48];
    std::snprintf(id, sizeof id, "cd-%016llx-%05zu", static_cast<unsigned long long>(seed), i);
    out.push_back(Puzzle{id, std::move(d.numbers), d.target, d.seed});
  }
  return out;
}

}  // namespace forge
