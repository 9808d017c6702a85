#include "forge/rational.hpp"

#include <limits>

namespace forge {

Rational::Rational(BigInt num, BigInt den) {
  if (den == 0) {
    throw std::domain_error("rational with zero denominator");
  }
  if (den < 0) {
    num = -num;
    den = -den;
  }
  BigInt g = boost::multiprecision::gcd(num < 0 ? BigInt(-num) : num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  num_ = std::move(num);
  den_ = std::move(den);
}

std::int64_t Rational::to_int64() const {
  if (den_ != 1) {
    throw std::domain_error("rational " + str() + " is not an integer");
  }
  if (num_ > std::numeric_limits<std::int64_t>::max() ||
      num_ < std::numeric_limits<std::int64_t>::min()) {
    throw std::domain_error("rational " + str() + " does not fit in 64 bits");
  }
  return static_cast<std::int64_t>(num_);
}

double Rational::to_double() const {
  return static_cast<double>(num_) / static_cast<double>(den_);
}

std::string Rational::str() const {
  if (den_ == 1) {
    return num_.str();
  }
  return num_.str() + "/" + den_.str();
}

Rational operator+(const Rational& a, const Rational& b) {
  if (a.den_ == 1 && b.den_ == 1) {
    return Rational(a.num_ + b.num_, BigInt(1), Rational::Normalized{});
  }
  return Rational(a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_);
}

Rational operator-(const Rational& a, const Rational& b) {
  if (a.den_ == 1 && b.den_ == 1) {
    return Rational(a.num_ - b.num_, BigInt(1), Rational::Normalized{});
  }
  return Rational(a.num_ * b.den_ - b.num_ * a.den_, a.den_ * b.den_);
}

Rational operator*(const Rational& a, const Rational& b) {
  if (a.den_ == 1 && b.den_ == 1) {
    return Rational(a.num_ * b.num_, BigInt(1), Rational::Normalized{});
  }
  return Rational(a.num_ * b.num_, a.den_ * b.den_);
}

Rational operator/(const Rational& a, const Rational& b) {
  if (b.num_ == 0) {
    throw std::domain_error("division by zero");
  }
  return Rational(a.num_ * b.den_, a.den_ * b.num_);
}

Rational Rational::operator-() const { return Rational(-num_, den_, Normalized{}); }

std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
  BigInt lhs = a.num_ * b.den_;
  BigInt rhs = b.num_ * a.den_;
  if (lhs < rhs) return std::strong_ordering::less;
  if (lhs > rhs) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

double distance(const Rational& a, const Rational& b) {
  Rational d = a - b;
  double v = d.to_double();
  return v < 0 ? -v : v;
}

}  // namespace forge
