#pragma once

#include "forge/rational.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace forge {

enum class Op : std::uint8_t { Add, Sub, Mul, Div };

inline constexpr Op kAllOps[] = {Op::Add, Op::Sub, Op::Mul, Op::Div};

char op_symbol(Op op);

// Immutable arithmetic expression tree. Copies share structure.
class Expr {
 public:
  static Expr leaf(std::int64_t value);
  static Expr binary(Op op, Expr left, Expr right);

  bool is_leaf() const;
  std::int64_t value() const;  // leaf only
  Op op() const;               // binary only
  const Expr& left() const;    // binary only
  const Expr& right() const;   // binary only

  std::size_t leaf_count() const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  struct Node;
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at byte " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class EvalError : public std::runtime_error {
 public:
  EvalError(const std::string& what, std::string node)
      : std::runtime_error(what + " in " + node), node_(std::move(node)) {}
  // Rendering of the offending subexpression.
  const std::string& node() const { return node_; }

 private:
  std::string node_;
};

// Infix grammar: integers, parentheses, + - * / and the unicode synonyms
// U+00D7, U+00F7, U+2212. Standard precedence, left associative. No unary minus.
Expr parse(std::string_view text);

// Exact value. Throws EvalError on division by a zero-valued subexpression.
Rational eval(const Expr& e);

// ASCII rendering; every non-root binary node is parenthesized.
std::string render(const Expr& e);

std::vector<std::int64_t> leaves(const Expr& e);

// True iff the leaves of e are exactly the multiset `numbers`.
bool validate_usage(const Expr& e, std::span<const std::int64_t> numbers);

struct ParsedAnswer {
  Expr expr;
  std::optional<Rational> claimed;  // value after a trailing "= N"
};

// parse() plus tolerance for a trailing "= N" claim.
ParsedAnswer parse_answer(std::string_view text);

}  // namespace forge
