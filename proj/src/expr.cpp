#include "forge/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <limits>

namespace forge {

struct Expr::Node {
  bool leaf = true;
  std::int64_t value = 0;
  Op op = Op::Add;
  std::optional<Expr> left;
  std::optional<Expr> right;
  std::size_t leaves = 1;
};

char op_symbol(Op op) {
  switch (op) {
    case Op::Add: return '+';
    case Op::Sub: return '-';
    case Op::Mul: return '*';
    case Op::Div: return '/';
  }
  return '?';
}

Expr Expr::leaf(std::int64_t value) {
  if (value < 0) {
    throw std::invalid_argument("expression leaves must be non-negative");
  }
  auto node = std::make_shared<Node>();
  node->value = value;
  return Expr(std::move(node));
}

Expr Expr::binary(Op op, Expr left, Expr right) {
  auto node = std::make_shared<Node>();
  node->leaf = false;
  node->op = op;
  node->leaves = left.leaf_count() + right.leaf_count();
  node->left = std::move(left);
  node->right = std::move(right);
  return Expr(std::move(node));
}

bool Expr::is_leaf() const { return node_->leaf; }
std::int64_t Expr::value() const { return node_->value; }
Op Expr::op() const { return node_->op; }
const Expr& Expr::left() const { return *node_->left; }
const Expr& Expr::right() const { return *node_->right; }
std::size_t Expr::leaf_count() const { return node_->leaves; }

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  if (a.is_leaf() != b.is_leaf()) return false;
  if (a.is_leaf()) return a.value() == b.value();
  return a.op() == b.op() && a.left() == b.left() && a.right() == b.right();
}

namespace {

constexpr std::size_t kMaxDepth = 512;

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expr run() {
    skip_space();
    if (pos_ == text_.size()) {
      throw ParseError("empty expression", pos_);
    }
    Expr e = sum(0);
    skip_space();
    if (pos_ != text_.size()) {
      throw ParseError("unexpected trailing input", pos_);
    }
    return e;
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  // Returns the operator at the cursor (without consuming) and its byte width.
  std::optional<std::pair<Op, std::size_t>> peek_op() const {
    if (pos_ >= text_.size()) return std::nullopt;
    std::string_view rest = text_.substr(pos_);
    switch (rest[0]) {
      case '+': return std::pair{Op::Add, std::size_t{1}};
      case '-': return std::pair{Op::Sub, std::size_t{1}};
      case '*': return std::pair{Op::Mul, std::size_t{1}};
      case '/': return std::pair{Op::Div, std::size_t{1}};
      default: break;
    }
    if (rest.starts_with("\xC3\x97")) return std::pair{Op::Mul, std::size_t{2}};
    if (rest.starts_with("\xC3\xB7")) return std::pair{Op::Div, std::size_t{2}};
    if (rest.starts_with("\xE2\x88\x92")) return std::pair{Op::Sub, std::size_t{3}};
    return std::nullopt;
  }

  Expr sum(std::size_t depth) {
    Expr lhs = product(depth);
    for (;;) {
      skip_space();
      auto op = peek_op();
      if (!op || (op->first != Op::Add && op->first != Op::Sub)) return lhs;
      pos_ += op->second;
      lhs = Expr::binary(op->first, std::move(lhs), product(depth));
    }
  }

  Expr product(std::size_t depth) {
    Expr lhs = atom(depth);
    for (;;) {
      skip_space();
      auto op = peek_op();
      if (!op || (op->first != Op::Mul && op->first != Op::Div)) return lhs;
      pos_ += op->second;
      lhs = Expr::binary(op->first, std::move(lhs), atom(depth));
    }
  }

  Expr atom(std::size_t depth) {
    skip_space();
    if (pos_ >= text_.size()) {
      throw ParseError("unexpected end of input", pos_);
    }
    char c = text_[pos_];
    if (c == '(') {
      if (depth >= kMaxDepth) {
        throw ParseError("parentheses nested too deeply", pos_);
      }
      ++pos_;
      Expr inner = sum(depth + 1);
      skip_space();
      if (pos_ >= text_.size() || text_[pos_] != ')') {
        throw ParseError("expected ')'", pos_);
      }
      ++pos_;
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
      }
      std::int64_t value = 0;
      auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, value);
      if (ec != std::errc{}) {
        throw ParseError("integer literal out of range", start);
      }
      return Expr::leaf(value);
    }
    if (auto op = peek_op(); op && op->first == Op::Sub) {
      throw ParseError("unary minus is not supported", pos_);
    }
    throw ParseError("expected a number or '('", pos_);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

void render_into(const Expr& e, std::string& out, bool root) {
  if (e.is_leaf()) {
    out += std::to_string(e.value());
    return;
  }
  if (!root) out += '(';
  render_into(e.left(), out, false);
  out += op_symbol(e.op());
  render_into(e.right(), out, false);
  if (!root) out += ')';
}

void collect_leaves(const Expr& e, std::vector<std::int64_t>& out) {
  if (e.is_leaf()) {
    out.push_back(e.value());
    return;
  }
  collect_leaves(e.left(), out);
  collect_leaves(e.right(), out);
}

}  // namespace

Expr parse(std::string_view text) { return Parser(text).run(); }

Rational eval(const Expr& e) {
  if (e.is_leaf()) {
    return Rational(e.value());
  }
  Rational lhs = eval(e.left());
  Rational rhs = eval(e.right());
  switch (e.op()) {
    case Op::Add: return lhs + rhs;
    case Op::Sub: return lhs - rhs;
    case Op::Mul: return lhs * rhs;
    case Op::Div:
      if (rhs.is_zero()) {
        throw EvalError("division by zero", render(e));
      }
      return lhs / rhs;
  }
  return lhs;
}

std::string render(const Expr& e) {
  std::string out;
  render_into(e, out, true);
  return out;
}

std::vector<std::int64_t> leaves(const Expr& e) {
  std::vector<std::int64_t> out;
  out.reserve(e.leaf_count());
  collect_leaves(e, out);
  return out;
}

bool validate_usage(const Expr& e, std::span<const std::int64_t> numbers) {
  if (e.leaf_count() != numbers.size()) return false;
  std::vector<std::int64_t> used = leaves(e);
  std::vector<std::int64_t> given(numbers.begin(), numbers.end());
  std::sort(used.begin(), used.end());
  std::sort(given.begin(), given.end());
  return used == given;
}

ParsedAnswer parse_answer(std::string_view text) {
  std::size_t eq = text.rfind('=');
  if (eq == std::string_view::npos) {
    return ParsedAnswer{parse(text), std::nullopt};
  }
  std::string_view claim = text.substr(eq + 1);
  std::size_t b = 0;
  while (b < claim.size() && std::isspace(static_cast<unsigned char>(claim[b]))) ++b;
  std::size_t e = claim.size();
  while (e > b && std::isspace(static_cast<unsigned char>(claim[e - 1]))) --e;
  std::string_view digits = claim.substr(b, e - b);
  bool negative = false;
  if (!digits.empty() && digits[0] == '-') {
    negative = true;
    digits.remove_prefix(1);
  }
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (digits.empty() || ec != std::errc{} || ptr != digits.data() + digits.size()) {
    throw ParseError("malformed '= N' suffix", eq + 1 + b);
  }
  Expr expr = parse(text.substr(0, eq));
  return ParsedAnswer{std::move(expr), Rational(negative ? -value : value)};
}

}  // namespace forge
