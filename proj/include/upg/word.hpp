#pragma once
// Freely reduced words and conjugacy classes in a free group F_n.
//
// A letter is a nonzero signed generator index: +i is the i-th generator
// (1-based), -i its inverse.  Text convention: 'a'..'z' are generators
// 1..26 and the matching upper-case letter is the inverse, so "A" reads
// a^-1 and "baB" reads b a b^-1.

#include <compare>
#include <optional>
#include <string>
#include <vector>

#include "upg/detail/seq.hpp"
#include "upg/errors.hpp"

namespace upg {

using Letter = int;

inline Letter letter_inverse(Letter x) { return -x; }

inline char letter_char(Letter x) {
  int i = std::abs(x) - 1;
  require(i >= 0 && i < 26, "UnknownGenerator", "letter index out of a..z range");
  return static_cast<char>((x > 0 ? 'a' : 'A') + i);
}

inline Letter char_letter(char c, int rank) {
  int idx;
  bool pos;
  if (c >= 'a' && c <= 'z') {
    idx = c - 'a' + 1;
    pos = true;
  } else if (c >= 'A' && c <= 'Z') {
    idx = c - 'A' + 1;
    pos = false;
  } else {
    fail("UnknownGenerator", std::string("unexpected character '") + c + "'");
  }
  require(idx <= rank, "UnknownGenerator",
          std::string("letter '") + c + "' exceeds rank " + std::to_string(rank));
  return pos ? idx : -idx;
}

// A freely reduced word.  All constructors reduce, so the invariant holds by
// construction.
class Word {
 public:
  Word() = default;

  static Word from_letters(const std::vector<Letter>& raw) {
    return Word(detail::seq_reduce(raw));
  }

  static Word one_letter(Letter x) { return Word({x}); }

  // Parses the text convention; spaces and dots are ignored, "" is identity.
  static Word parse(const std::string& s, int rank) {
    std::vector<Letter> raw;
    for (char c : s) {
      if (c == ' ' || c == '.') continue;
      raw.push_back(char_letter(c, rank));
    }
    return from_letters(raw);
  }

  const std::vector<Letter>& letters() const { return ls_; }
  int size() const { return static_cast<int>(ls_.size()); }
  bool empty() const { return ls_.empty(); }

  Word inverse() const { return Word(detail::seq_inverse(ls_)); }

  friend Word operator*(const Word& a, const Word& b) {
    std::vector<Letter> cat = a.ls_;
    cat.insert(cat.end(), b.ls_.begin(), b.ls_.end());
    return from_letters(cat);
  }

  Word pow(int k) const {
    Word base = k >= 0 ? *this : inverse();
    Word out;
    for (int i = 0; i < std::abs(k); ++i) out = out * base;
    return out;
  }

  // Conjugate c w c^-1.
  Word conjugated_by(const Word& c) const { return c * *this * c.inverse(); }

  std::string str() const {
    if (ls_.empty()) return "";
    std::string out;
    for (Letter x : ls_) out += letter_char(x);
    return out;
  }

  auto operator<=>(const Word&) const = default;
  bool operator==(const Word&) const = default;

 private:
  explicit Word(std::vector<Letter> reduced) : ls_(std::move(reduced)) {}
  std::vector<Letter> ls_;
};

// A conjugacy class of F_n: cyclically reduced, stored as the
// lexicographically least rotation so equality is plain comparison.
class CyclicWord {
 public:
  CyclicWord() = default;

  static CyclicWord of(const Word& w) {
    auto [core, p] = detail::seq_cyclic_strip(w.letters());
    CyclicWord c;
    if (!core.empty()) c.ls_ = detail::seq_rotate(core, detail::seq_least_rotation(core));
    return c;
  }

  static CyclicWord parse(const std::string& s, int rank) {
    return of(Word::parse(s, rank));
  }

  const std::vector<Letter>& letters() const { return ls_; }
  int size() const { return static_cast<int>(ls_.size()); }
  bool trivial() const { return ls_.empty(); }

  // Some representative word spelling this class.
  Word rep() const { return Word::from_letters(ls_); }

  CyclicWord inverse() const { return of(rep().inverse()); }

  std::string str() const { return rep().str(); }

  auto operator<=>(const CyclicWord&) const = default;
  bool operator==(const CyclicWord&) const = default;

 private:
  std::vector<Letter> ls_;
};

struct CyclicReduction {
  CyclicWord cls;
  Word conj;  // w == conj * cls.rep() * conj^-1
};

// Cyclic reduction with conjugator: strips matching ends, then rotates the
// core to canonical position, folding the rotation into the conjugator.
inline CyclicReduction cyclic_reduce(const Word& w) {
  auto [core, p] = detail::seq_cyclic_strip(w.letters());
  if (core.empty()) return {CyclicWord(), Word::from_letters(p)};
  size_t r = detail::seq_least_rotation(core);
  // core = head . tail with |head| = r, so w = (p.head) (tail.head) (p.head)^-1.
  std::vector<Letter> head(core.begin(), core.begin() + r);
  std::vector<Letter> conj = p;
  conj.insert(conj.end(), head.begin(), head.end());
  return {CyclicWord::of(Word::from_letters(detail::seq_rotate(core, r))),
          Word::from_letters(conj)};
}

inline int word_length(const Word& w) { return w.size(); }
inline int cyclic_length(const Word& w) { return CyclicWord::of(w).size(); }

// c with u = c v c^-1, if u and v are conjugate.
inline std::optional<Word> conjugacy_witness(const Word& u, const Word& v) {
  CyclicReduction ru = cyclic_reduce(u), rv = cyclic_reduce(v);
  if (ru.cls != rv.cls) return std::nullopt;
  // u = cu k cu^-1 and v = cv k cv^-1 for the common canonical core k.
  return ru.conj * rv.conj.inverse();
}

struct RootPower {
  CyclicWord root;
  int exponent;  // >= 1; cls == root^exponent as cyclic words
};

// Primitive root of a nontrivial conjugacy class.
inline RootPower primitive_root(const CyclicWord& w) {
  require(!w.trivial(), "WordNotRealizable", "primitive root of the identity");
  size_t d = detail::seq_period(w.letters());
  std::vector<Letter> root(w.letters().begin(), w.letters().begin() + d);
  return {CyclicWord::of(Word::from_letters(root)),
          static_cast<int>(w.letters().size() / d)};
}

// Linear (non-cyclic) power test on reduced words: s == t^p exactly.
inline std::optional<int> as_power_of(const Word& s, const Word& t) {
  return detail::seq_as_power_of(s.letters(), t.letters());
}

}  // namespace upg
