#include "doctest.h"

#include "forge/expr.hpp"
#include "forge/seed.hpp"

#include <algorithm>

using namespace forge;

namespace {

Expr L(std::int64_t v) { return Expr::leaf(v); }
Expr B(Op op, Expr a, Expr b) { return Expr::binary(op, std::move(a), std::move(b)); }

Expr random_expr(Rng& rng, int depth) {
  if (depth == 0 || rng.uniform(0, 3) == 0) return L(rng.uniform(0, 12));
  Op op = kAllOps[rng.index(4)];
  return B(op, random_expr(rng, depth - 1), random_expr(rng, depth - 1));
}

}  // namespace

TEST_CASE("parse builds the expected trees") {
  CHECK(parse("(30-25+3)*4") == B(Op::Mul, B(Op::Add, B(Op::Sub, L(30), L(25)), L(3)), L(4)));
  CHECK(parse("7") == L(7));
  CHECK(parse("1+2*3") == B(Op::Add, L(1), B(Op::Mul, L(2), L(3))));
  CHECK(parse("8-3-2") == B(Op::Sub, B(Op::Sub, L(8), L(3)), L(2)));
  CHECK(parse("  ( 30 - 25 + 3 ) * 4 ") == parse("(30-25+3)*4"));
}

TEST_CASE("parse accepts unicode operator synonyms") {
  CHECK(parse("(30\xE2\x88\x92" "25+3)\xC3\x97" "4") == parse("(30-25+3)*4"));
  CHECK(parse("8\xC3\xB7" "2") == B(Op::Div, L(8), L(2)));
}

TEST_CASE("parse errors carry byte offsets") {
  auto offset_of = [](std::string_view text) -> std::size_t {
    try {
      parse(text);
    } catch (const ParseError& e) {
      return e.offset();
    }
    FAIL("expected a parse error for " << text);
    return 0;
  };
  CHECK(offset_of("") == 0);
  CHECK(offset_of("   ") == 3);
  CHECK(offset_of("1+") == 2);
  CHECK(offset_of("(1+2") == 4);
  CHECK(offset_of("1 2") == 2);
  CHECK(offset_of("-3+4") == 0);
  CHECK(offset_of("2*(-3)") == 3);
  CHECK(offset_of("2^3") == 1);
  CHECK(offset_of("99999999999999999999") == 0);
  CHECK(offset_of(std::string(600, '(') + "1" + std::string(600, ')')) > 0);
}

TEST_CASE("eval is exact") {
  CHECK(eval(parse("(30-25+3)*4")) == Rational(32));
  CHECK(eval(parse("2/2")) == Rational(1));
  CHECK(eval(parse("1/3*3")) == Rational(1));
  CHECK(eval(parse("1/3")) == Rational(BigInt(1), BigInt(3)));
  CHECK(eval(parse("3-5")) == Rational(-2));
  // 1/3 has no finite binary expansion; a float evaluator drifts here.
  CHECK(eval(parse("1/3+1/3+1/3-1")) == Rational(0));
}

TEST_CASE("eval reports the offending node on division by zero") {
  try {
    eval(parse("4+1/(2-2)"));
    FAIL("expected EvalError");
  } catch (const EvalError& e) {
    CHECK(e.node() == "1/(2-2)");
  }
}

TEST_CASE("render is fully parenthesized ascii") {
  CHECK(render(parse("(30-25+3)*4")) == "((30-25)+3)*4");
  CHECK(render(parse("1+2*3")) == "1+(2*3)");
  CHECK(render(L(5)) == "5");
}

TEST_CASE("validate_usage needs the exact multiset") {
  std::vector<std::int64_t> nums = {25, 30, 3, 4};
  CHECK(validate_usage(parse("(30-25+3)*4"), nums));
  CHECK_FALSE(validate_usage(parse("4*8"), nums));
  CHECK_FALSE(validate_usage(parse("30-25+3"), nums));
  CHECK_FALSE(validate_usage(parse("(30-25+3)*4*4"), nums));
  std::vector<std::int64_t> dup = {2, 2, 1};
  CHECK(validate_usage(parse("2+2+1"), dup));
  CHECK_FALSE(validate_usage(parse("2+1+1"), dup));
}

TEST_CASE("parse_answer strips and records an '= N' claim") {
  auto a = parse_answer("(30-25+3)*4 = 32");
  CHECK(a.expr == parse("(30-25+3)*4"));
  REQUIRE(a.claimed);
  CHECK(*a.claimed == Rational(32));
  CHECK_FALSE(parse_answer("(30-25+3)*4").claimed);
  CHECK(*parse_answer("3-5=-2").claimed == Rational(-2));
  CHECK_THROWS_AS(parse_answer("1+2 = x"), ParseError);
  CHECK_THROWS_AS(parse_answer("= 3"), ParseError);
}

TEST_CASE("property: render/parse round trip and value preservation") {
  Rng rng(42);
  for (int i = 0; i < 500; ++i) {
    Expr e = random_expr(rng, 4);
    Expr back = parse(render(e));
    CHECK(back == e);
    std::optional<Rational> v1, v2;
    try {
      v1 = eval(e);
    } catch (const EvalError&) {
    }
    try {
      v2 = eval(back);
    } catch (const EvalError&) {
    }
    CHECK(v1.has_value() == v2.has_value());
    if (v1 && v2) CHECK(*v1 == *v2);
  }
}

TEST_CASE("property: (a / b) * b == a for nonzero b") {
  Rng rng(7);
  int checked = 0;
  for (int i = 0; i < 500; ++i) {
    Expr a = random_expr(rng, 3);
    Expr b = random_expr(rng, 3);
    try {
      Rational bv = eval(b);
      if (bv.is_zero()) continue;
      Rational av = eval(a);
      CHECK(eval(B(Op::Mul, B(Op::Div, a, b), b)) == av);
      ++checked;
    } catch (const EvalError&) {
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("property: validate_usage ignores the order of the number list") {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    Expr e = random_expr(rng, 3);
    std::vector<std::int64_t> nums = leaves(e);
    CHECK(validate_usage(e, nums));
    for (std::size_t k = nums.size(); k > 1; --k) std::swap(nums[k - 1], nums[rng.index(k)]);
    CHECK(validate_usage(e, nums));
    nums.push_back(1);
    CHECK_FALSE(validate_usage(e, nums));
  }
}
