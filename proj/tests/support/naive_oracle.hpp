#pragma once

// Test-only reference enumerator. Repeatedly replaces two values by one of
// their combinations until a single value remains. Shares no code with the
// library solver: plain int64 fractions, a different search shape.

#include <cstdint>
#include <numeric>
#include <set>
#include <utility>
#include <vector>

namespace oracle {

struct Frac {
  std::int64_t n;
  std::int64_t d;  // > 0, reduced

  static Frac of(std::int64_t n, std::int64_t d) {
    if (d < 0) {
      n = -n;
      d = -d;
    }
    std::int64_t g = std::gcd(n < 0 ? -n : n, d);
    if (g > 1) {
      n /= g;
      d /= g;
    }
    return {n, d};
  }
  friend bool operator<(const Frac& a, const Frac& b) { return a.n != b.n ? a.n < b.n : a.d < b.d; }
  friend bool operator==(const Frac& a, const Frac& b) { return a.n == b.n && a.d == b.d; }
};

inline void reach(std::vector<Frac> xs, std::set<Frac>& out) {
  if (xs.size() == 1) {
    out.insert(xs[0]);
    return;
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j < xs.size(); ++j) {
      if (i == j) continue;
      Frac a = xs[i], b = xs[j];
      std::vector<Frac> rest;
      for (std::size_t k = 0; k < xs.size(); ++k) {
        if (k != i && k != j) rest.push_back(xs[k]);
      }
      std::vector<Frac> made = {Frac::of(a.n * b.d + b.n * a.d, a.d * b.d), Frac::of(a.n * b.d - b.n * a.d, a.d * b.d),
                                Frac::of(a.n * b.n, a.d * b.d)};
      if (b.n != 0) made.push_back(Frac::of(a.n * b.d, a.d * b.n));
      for (const Frac& m : made) {
        rest.push_back(m);
        reach(rest, out);
        rest.pop_back();
      }
    }
  }
}

// Every exact value an expression using each number once can take.
inline std::set<Frac> reachable(const std::vector<std::int64_t>& numbers) {
  std::vector<Frac> xs;
  for (std::int64_t n : numbers) xs.push_back({n, 1});
  std::set<Frac> out;
  reach(xs, out);
  return out;
}

inline bool solvable(const std::vector<std::int64_t>& numbers, std::int64_t target) {
  return reachable(numbers).count(Frac{target, 1}) > 0;
}

}  // namespace oracle
