#include "kaisar/rational.hpp"

#include <stdexcept>

namespace kaisar {

double to_double(const Rational& q) { return q.convert_to<double>(); }

bool is_integer(const Rational& q) { return denominator(q) == 1; }

Rational rational_of(const std::string& s) {
  if (s.empty()) throw std::invalid_argument("empty rational literal");
  auto slash = s.find('/');
  if (slash != std::string::npos) {
    Integer num(s.substr(0, slash));
    Integer den(s.substr(slash + 1));
    if (den == 0) throw std::invalid_argument("zero denominator: " + s);
    return Rational(num, den);
  }
  auto dot = s.find('.');
  if (dot == std::string::npos) return Rational(Integer(s));
  std::string whole = s.substr(0, dot), frac = s.substr(dot + 1);
  if (frac.empty()) throw std::invalid_argument("bad decimal: " + s);
  for (char c : frac)
    if (!std::isdigit(static_cast<unsigned char>(c)))
      throw std::invalid_argument("bad decimal: " + s);
  bool neg = !whole.empty() && whole[0] == '-';
  if (neg || (!whole.empty() && whole[0] == '+')) whole = whole.substr(1);
  if (whole.empty()) whole = "0";
  Integer scale = 1;
  for (size_t i = 0; i < frac.size(); ++i) scale *= 10;
  Rational r = Rational(Integer(whole)) + Rational(Integer(frac), scale);
  return neg ? -r : r;
}

std::string rational_str(const Rational& q) {
  Integer num = numerator(q), den = denominator(q);
  if (den == 1) return num.str();
  // Finite decimal iff den = 2^a * 5^b; keep it short (<= 12 digits).
  Integer d = den;
  int twos = 0, fives = 0;
  while (d % 2 == 0) { d /= 2; ++twos; }
  while (d % 5 == 0) { d /= 5; ++fives; }
  int digits = std::max(twos, fives);
  if (d == 1 && digits <= 12) {
    Integer scale = 1;
    for (int i = 0; i < digits; ++i) scale *= 10;
    Integer v = num * scale / den;
    bool neg = v < 0;
    std::string body = (neg ? -v : v).str();
    while (static_cast<int>(body.size()) <= digits) body = "0" + body;
    body.insert(body.size() - digits, ".");
    return (neg ? "-" : "") + body;
  }
  return num.str() + "/" + den.str();
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace kaisar
