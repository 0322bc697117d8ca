#pragma once
// Automorphisms of F_n given on the basis, with certified inverses.  The
// inverse images are part of the value: bijectivity never rests on a search,
// only on checking that both compositions reduce to the identity.

#include <optional>
#include <set>
#include <vector>

#include "upg/errors.hpp"
#include "upg/word.hpp"

namespace upg {

class Aut {
 public:
  Aut() = default;

  // Certifies that images and inverse_images define mutually inverse
  // endomorphisms; rejects otherwise.
  static Aut validate(int rank, std::vector<Word> images, std::vector<Word> inverse_images) {
    require(static_cast<int>(images.size()) == rank &&
                static_cast<int>(inverse_images.size()) == rank,
            "CompositionNotIdentity", "image list length differs from rank");
    Aut f;
    f.n_ = rank;
    f.images_ = std::move(images);
    f.inv_images_ = std::move(inverse_images);
    for (int j = 1; j <= rank; ++j) {
      Word x = Word::one_letter(j);
      require(f.apply(f.apply_inverse(x)) == x && f.apply_inverse(f.apply(x)) == x,
              "CompositionNotIdentity",
              "generator " + x.str() + " not restored by the certificate");
    }
    return f;
  }

  static Aut identity(int rank) {
    std::vector<Word> im;
    for (int j = 1; j <= rank; ++j) im.push_back(Word::one_letter(j));
    return validate(rank, im, im);
  }

  // Inner automorphism w -> c w c^-1.
  static Aut inner(int rank, const Word& c) {
    std::vector<Word> im, inv;
    for (int j = 1; j <= rank; ++j) {
      im.push_back(Word::one_letter(j).conjugated_by(c));
      inv.push_back(Word::one_letter(j).conjugated_by(c.inverse()));
    }
    return validate(rank, im, inv);
  }

  int rank() const { return n_; }
  const std::vector<Word>& images() const { return images_; }
  const std::vector<Word>& inverse_images() const { return inv_images_; }

  Word apply(const Word& w) const { return substitute(images_, w); }
  Word apply_inverse(const Word& w) const { return substitute(inv_images_, w); }

  CyclicWord apply_to_class(const CyclicWord& c) const {
    return CyclicWord::of(apply(c.rep()));
  }

  Aut inverse() const {
    Aut f;
    f.n_ = n_;
    f.images_ = inv_images_;
    f.inv_images_ = images_;
    return f;
  }

  bool is_identity() const {
    for (int j = 1; j <= n_; ++j)
      if (images_[j - 1] != Word::one_letter(j)) return false;
    return true;
  }

  bool operator==(const Aut& o) const { return n_ == o.n_ && images_ == o.images_; }

 private:
  static Word substitute(const std::vector<Word>& table, const Word& w) {
    Word out;
    for (Letter x : w.letters()) {
      const Word& im = table[std::abs(x) - 1];
      out = out * (x > 0 ? im : im.inverse());
    }
    return out;
  }

  int n_ = 0;
  std::vector<Word> images_, inv_images_;
};

// Apply the left argument after the right: compose(f,g) = f∘g.
inline Aut compose(const Aut& f, const Aut& g) {
  require(f.rank() == g.rank(), "CompositionNotIdentity", "rank mismatch in compose");
  std::vector<Word> im, inv;
  for (int j = 0; j < f.rank(); ++j) {
    im.push_back(f.apply(g.images()[j]));
    inv.push_back(g.apply_inverse(f.inverse_images()[j]));
  }
  return Aut::validate(f.rank(), im, inv);
}

// Centralizer generator of a nontrivial element: for w = p k p^-1 with k
// cyclically reduced, the centralizer is generated by p root(k) p^-1.
inline Word centralizer_root(const Word& w) {
  require(!w.empty(), "WordNotRealizable", "centralizer root of the identity");
  CyclicReduction r = cyclic_reduce(w);
  RootPower rp = primitive_root(r.cls);
  return rp.root.rep().conjugated_by(r.conj);
}

// Is f = (inner by c) ∘ g for some c?  Returns such a c.  All candidate
// conjugators agree modulo the centralizer of g's first image, which in a
// free group is cyclic; the sweep over its powers is bounded.
inline std::optional<Word> outer_conjugator(const Aut& f, const Aut& g, int power_bound = 24) {
  int n = f.rank();
  if (n == 0 || f == g) return Word();
  auto check = [&](const Word& c) {
    for (int j = 0; j < n; ++j)
      if (f.images()[j] != g.images()[j].conjugated_by(c)) return false;
    return true;
  };
  // Anchor on the first generator with a nontrivial image (images of
  // generators are nontrivial for genuine automorphisms).
  Word gi = g.images()[0], fi = f.images()[0];
  auto u = conjugacy_witness(fi, gi);
  if (!u) return std::nullopt;
  Word z = centralizer_root(gi);
  for (int k = 0; k <= power_bound; ++k) {
    for (int s : {1, -1}) {
      Word c = *u * z.pow(s * k);
      if (check(c)) return c;
      if (k == 0) break;
    }
  }
  return std::nullopt;
}

inline bool outer_equal(const Aut& f, const Aut& g) {
  return outer_conjugator(f, g).has_value();
}

namespace detail {

inline int tuple_length(const std::vector<Word>& b) {
  int s = 0;
  for (const Word& w : b) s += w.size();
  return s;
}

// Elementary Nielsen automorphism tables (images of the standard basis).
inline Aut nielsen_right(int n, int i, int j, int eps) {  // x_i -> x_i x_j^eps
  std::vector<Word> im, inv;
  for (int k = 1; k <= n; ++k) {
    Word x = Word::one_letter(k);
    im.push_back(k == i ? x * Word::one_letter(eps * j) : x);
    inv.push_back(k == i ? x * Word::one_letter(-eps * j) : x);
  }
  return Aut::validate(n, im, inv);
}

inline Aut nielsen_left(int n, int i, int j, int eps) {  // x_i -> x_j^eps x_i
  std::vector<Word> im, inv;
  for (int k = 1; k <= n; ++k) {
    Word x = Word::one_letter(k);
    im.push_back(k == i ? Word::one_letter(eps * j) * x : x);
    inv.push_back(k == i ? Word::one_letter(-eps * j) * x : x);
  }
  return Aut::validate(n, im, inv);
}

inline Aut nielsen_invert(int n, int i) {  // x_i -> x_i^-1
  std::vector<Word> im;
  for (int k = 1; k <= n; ++k)
    im.push_back(k == i ? Word::one_letter(-k) : Word::one_letter(k));
  return Aut::validate(n, im, im);
}

inline Aut nielsen_swap(int n, int i, int j) {
  std::vector<Word> im;
  for (int k = 1; k <= n; ++k) {
    int t = (k == i) ? j : (k == j) ? i : k;
    im.push_back(Word::one_letter(t));
  }
  return Aut::validate(n, im, im);
}

}  // namespace detail

// Given a tuple of words forming a basis of F_n, produces the automorphism
// x_j -> tuple[j] with a constructive inverse, by tracked Nielsen reduction:
// greedy length descent, then a bounded plateau search, then normalization of
// the resulting signed permutation.  Returns none if the search gets stuck
// (in particular whenever the tuple is not a basis).
inline std::optional<Aut> aut_from_basis_tuple(const std::vector<Word>& tuple,
                                               int plateau_cap = 4000) {
  int n = static_cast<int>(tuple.size());
  for (const Word& w : tuple)
    if (w.empty()) return std::nullopt;
  // P accumulates the applied moves: current = original ∘ P.
  Aut P = Aut::identity(n);
  std::vector<Word> cur = tuple;

  auto apply_move = [&](const Aut& tau, std::vector<Word>& b) {
    // New tuple entries: (b ∘ tau)(x_k) = substitute b into tau's images.
    std::vector<Word> out;
    for (int k = 0; k < n; ++k) {
      Word im;
      for (Letter x : tau.images()[k].letters()) {
        const Word& piece = b[std::abs(x) - 1];
        im = im * (x > 0 ? piece : piece.inverse());
      }
      out.push_back(im);
    }
    b = out;
  };

  auto moves = [&]() {
    std::vector<Aut> ms;
    for (int i = 1; i <= n; ++i)
      for (int j = 1; j <= n; ++j) {
        if (i == j) continue;
        for (int eps : {1, -1}) {
          ms.push_back(detail::nielsen_right(n, i, j, eps));
          ms.push_back(detail::nielsen_left(n, i, j, eps));
        }
      }
    return ms;
  }();

  auto is_signed_perm = [&](const std::vector<Word>& b) {
    std::vector<bool> used(n, false);
    for (const Word& w : b) {
      if (w.size() != 1) return false;
      int g = std::abs(w.letters()[0]);
      if (used[g - 1]) return false;
      used[g - 1] = true;
    }
    return true;
  };

  // Greedy strict descent with a bounded breadth-first plateau search.
  while (!is_signed_perm(cur)) {
    int len = detail::tuple_length(cur);
    bool advanced = false;
    for (const Aut& tau : moves) {
      std::vector<Word> nb = cur;
      apply_move(tau, nb);
      if (detail::tuple_length(nb) < len) {
        cur = nb;
        P = compose(P, tau);
        advanced = true;
        break;
      }
    }
    if (advanced) continue;
    // Plateau: breadth-first over length-preserving moves to a strict drop.
    std::set<std::vector<Word>> seen{cur};
    std::vector<std::pair<std::vector<Word>, Aut>> frontier{{cur, Aut::identity(n)}};
    bool escaped = false;
    while (!frontier.empty() && !escaped && static_cast<int>(seen.size()) < plateau_cap) {
      std::vector<std::pair<std::vector<Word>, Aut>> next;
      for (auto& [b, acc] : frontier) {
        for (const Aut& tau : moves) {
          std::vector<Word> nb = b;
          apply_move(tau, nb);
          int nl = detail::tuple_length(nb);
          if (nl < len) {
            cur = nb;
            P = compose(P, compose(acc, tau));
            escaped = true;
            break;
          }
          if (nl == len && !seen.count(nb) && static_cast<int>(seen.size()) < plateau_cap) {
            seen.insert(nb);
            next.emplace_back(nb, compose(acc, tau));
          }
        }
        if (escaped) break;
      }
      frontier = std::move(next);
    }
    if (!escaped) return std::nullopt;  // stuck: not a basis, or search too shallow
  }
  // Normalize the signed permutation with swaps and inversions.
  for (int i = 1; i <= n; ++i) {
    for (int j = i; j <= n; ++j) {
      if (std::abs(cur[j - 1].letters()[0]) == i) {
        if (j != i) {
          Aut tau = detail::nielsen_swap(n, i, j);
          std::vector<Word> nb = cur;
          std::swap(nb[i - 1], nb[j - 1]);
          cur = nb;
          P = compose(P, tau);
        }
        break;
      }
    }
    if (cur[i - 1].letters()[0] < 0) {
      cur[i - 1] = cur[i - 1].inverse();
      P = compose(P, detail::nielsen_invert(n, i));
    }
  }
  // Now original ∘ P = identity, so the original tuple defines P^-1.
  return Aut::validate(n, tuple, P.images());
}

}  // namespace upg
