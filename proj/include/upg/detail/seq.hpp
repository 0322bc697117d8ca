#pragma once
// Low-level helpers shared by free-group words and graph edge paths.  Both are
// sequences of nonzero signed indices where x and -x are formal inverses and
// adjacent inverse pairs cancel.

#include <algorithm>
#include <cstdlib>
#include <optional>
#include <vector>

namespace upg::detail {

using Seq = std::vector<int>;

inline Seq seq_inverse(const Seq& s) {
  Seq r(s.size());
  for (size_t i = 0; i < s.size(); ++i) r[i] = -s[s.size() - 1 - i];
  return r;
}

// Free reduction: repeatedly drop adjacent (x, -x) pairs.
inline Seq seq_reduce(const Seq& raw) {
  Seq out;
  out.reserve(raw.size());
  for (int x : raw) {
    if (!out.empty() && out.back() == -x)
      out.pop_back();
    else
      out.push_back(x);
  }
  return out;
}

inline bool seq_is_reduced(const Seq& s) {
  for (size_t i = 0; i + 1 < s.size(); ++i)
    if (s[i] == -s[i + 1]) return false;
  return true;
}

// Strip matching conjugating ends of a reduced sequence: s = p . core . p^-1.
// Returns (core, p).
inline std::pair<Seq, Seq> seq_cyclic_strip(Seq s) {
  Seq p;
  size_t lo = 0, hi = s.size();
  while (hi - lo >= 2 && s[lo] == -s[hi - 1]) {
    p.push_back(s[lo]);
    ++lo;
    --hi;
  }
  return {Seq(s.begin() + lo, s.begin() + hi), p};
}

inline Seq seq_rotate(const Seq& s, size_t r) {
  Seq out;
  out.reserve(s.size());
  out.insert(out.end(), s.begin() + r, s.end());
  out.insert(out.end(), s.begin(), s.begin() + r);
  return out;
}

// Index of the lexicographically least rotation (plain int comparison).
inline size_t seq_least_rotation(const Seq& s) {
  size_t best = 0;
  for (size_t r = 1; r < s.size(); ++r) {
    Seq a = seq_rotate(s, r), b = seq_rotate(s, best);
    if (std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end())) best = r;
  }
  return best;
}

// Smallest period d (d divides n, s[i] == s[i mod d]); n = 0 gives 0.
inline size_t seq_period(const Seq& s) {
  size_t n = s.size();
  for (size_t d = 1; d <= n; ++d) {
    if (n % d != 0) continue;
    bool ok = true;
    for (size_t i = d; i < n && ok; ++i) ok = (s[i] == s[i % d]);
    if (ok) return d;
  }
  return 0;
}

// Exact signed power: s == t^p (literal concatenation, no cancellation).
// Empty s gives 0; empty t only matches empty s.
inline std::optional<int> seq_as_power_of(const Seq& s, const Seq& t) {
  if (s.empty()) return 0;
  if (t.empty()) return std::nullopt;
  if (s.size() % t.size() != 0) return std::nullopt;
  int k = static_cast<int>(s.size() / t.size());
  auto matches = [&](const Seq& base) {
    for (size_t i = 0; i < s.size(); ++i)
      if (s[i] != base[i % base.size()]) return false;
    return true;
  };
  if (matches(t)) return k;
  if (matches(seq_inverse(t))) return -k;
  return std::nullopt;
}

// Length of the longest common prefix.
inline size_t seq_common_prefix(const Seq& a, const Seq& b) {
  size_t n = std::min(a.size(), b.size()), i = 0;
  while (i < n && a[i] == b[i]) ++i;
  return i;
}

}  // namespace upg::detail
