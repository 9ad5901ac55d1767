#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <string>

namespace kaisar {

using Integer = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

double to_double(const Rational& q);
bool is_integer(const Rational& q);

// Parses "3", "-3", "3.25" or "7/2". Throws std::invalid_argument on junk.
Rational rational_of(const std::string& s);

// Prints integers plainly, exact finite decimals as decimals, otherwise "p/q".
std::string rational_str(const Rational& q);

// 64-bit FNV-1a, used wherever a stable cross-run hash of a string is needed.
std::uint64_t fnv1a(const std::string& s);

}  // namespace kaisar
