#pragma once
// Exact arbitrary-precision integers and rationals used throughout.

#include <boost/multiprecision/cpp_int.hpp>

#include <string>

namespace upg {

using Int = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

inline Int int_gcd(Int a, Int b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b != 0) {
    Int t = a % b;
    a = b;
    b = t;
  }
  return a;
}

// Extended gcd: returns g = gcd(a,b) and s,t with s*a + t*b = g, g >= 0.
struct ExtGcd {
  Int g, s, t;
};

inline ExtGcd ext_gcd(Int a, Int b) {
  Int old_r = a, r = b, old_s = 1, s = 0, old_t = 0, t = 1;
  while (r != 0) {
    Int q = old_r / r;
    Int tmp = old_r - q * r;
    old_r = r;
    r = tmp;
    tmp = old_s - q * s;
    old_s = s;
    s = tmp;
    tmp = old_t - q * t;
    old_t = t;
    t = tmp;
  }
  if (old_r < 0) {
    old_r = -old_r;
    old_s = -old_s;
    old_t = -old_t;
  }
  return {old_r, old_s, old_t};
}

inline std::string rat_str(const Rat& r) { return r.str(); }

}  // namespace upg
