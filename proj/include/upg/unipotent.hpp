#pragma once
// Exact integer linear algebra for unipotence: nilpotency test, integral
// triangularizing bases built from primitive fixed vectors, and the mod-3
// triviality criterion.  All arithmetic is arbitrary precision.

#include <vector>

#include "upg/aut.hpp"
#include "upg/errors.hpp"
#include "upg/numeric.hpp"

namespace upg {

struct IntMatrix {
  int n = 0;
  std::vector<Int> a;  // row-major, size n*n

  IntMatrix() = default;
  explicit IntMatrix(int dim) : n(dim), a(static_cast<size_t>(dim) * dim, 0) {}

  static IntMatrix identity(int dim) {
    IntMatrix m(dim);
    for (int i = 0; i < dim; ++i) m.at(i, i) = 1;
    return m;
  }

  Int& at(int i, int j) { return a[static_cast<size_t>(i) * n + j]; }
  const Int& at(int i, int j) const { return a[static_cast<size_t>(i) * n + j]; }

  bool operator==(const IntMatrix&) const = default;

  bool is_zero() const {
    for (const Int& x : a)
      if (x != 0) return false;
    return true;
  }
};

inline IntMatrix mat_mul(const IntMatrix& x, const IntMatrix& y) {
  IntMatrix z(x.n);
  for (int i = 0; i < x.n; ++i)
    for (int k = 0; k < x.n; ++k) {
      if (x.at(i, k) == 0) continue;
      for (int j = 0; j < x.n; ++j) z.at(i, j) += x.at(i, k) * y.at(k, j);
    }
  return z;
}

inline IntMatrix mat_sub(const IntMatrix& x, const IntMatrix& y) {
  IntMatrix z(x.n);
  for (size_t i = 0; i < x.a.size(); ++i) z.a[i] = x.a[i] - y.a[i];
  return z;
}

inline std::vector<Int> mat_apply(const IntMatrix& m, const std::vector<Int>& v) {
  std::vector<Int> out(m.n, 0);
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j) out[i] += m.at(i, j) * v[j];
  return out;
}

// Exact inverse of a unimodular integer matrix (Gauss over rationals; the
// result is checked to be integral).
inline IntMatrix mat_inverse_unimodular(const IntMatrix& m) {
  int n = m.n;
  std::vector<std::vector<Rat>> w(n, std::vector<Rat>(2 * n, 0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) w[i][j] = Rat(m.at(i, j));
    w[i][n + i] = 1;
  }
  for (int col = 0; col < n; ++col) {
    int piv = -1;
    for (int r = col; r < n; ++r)
      if (w[r][col] != 0) {
        piv = r;
        break;
      }
    require(piv >= 0, "NotUnipotent", "matrix is singular, no inverse");
    std::swap(w[col], w[piv]);
    Rat d = w[col][col];
    for (int j = 0; j < 2 * n; ++j) w[col][j] /= d;
    for (int r = 0; r < n; ++r) {
      if (r == col || w[r][col] == 0) continue;
      Rat f = w[r][col];
      for (int j = 0; j < 2 * n; ++j) w[r][j] -= f * w[col][j];
    }
  }
  IntMatrix inv(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Rat x = w[i][n + j];
      require(boost::multiprecision::denominator(x) == 1, "NotUnipotent",
              "inverse is not integral; matrix not unimodular");
      inv.at(i, j) = boost::multiprecision::numerator(x);
    }
  return inv;
}

inline bool is_upper_unitriangular(const IntMatrix& m) {
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j <= i; ++j)
      if (m.at(i, j) != (i == j ? 1 : 0)) return false;
  return true;
}

// (I - M)^n = 0, with n the dimension.
inline bool is_unipotent(const IntMatrix& m) {
  IntMatrix nil = mat_sub(IntMatrix::identity(m.n), m);
  IntMatrix p = IntMatrix::identity(m.n);
  for (int i = 0; i < m.n; ++i) p = mat_mul(p, nil);
  return p.is_zero();
}

inline bool trivial_mod3(const IntMatrix& m) {
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j) {
      Int diff = m.at(i, j) - (i == j ? 1 : 0);
      if (diff % 3 != 0) return false;
    }
  return true;
}

namespace detail {

// A primitive integer vector fixed by M (kernel of M - I), via rational
// elimination and gcd scaling.  Exists whenever M is unipotent.
inline std::vector<Int> primitive_fixed_vector(const IntMatrix& m) {
  int n = m.n;
  IntMatrix a = mat_sub(m, IntMatrix::identity(n));
  std::vector<std::vector<Rat>> w(n, std::vector<Rat>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) w[i][j] = Rat(a.at(i, j));
  // Row echelon with column pivots.
  std::vector<int> pivot_col;
  int row = 0;
  for (int col = 0; col < n && row < n; ++col) {
    int piv = -1;
    for (int r = row; r < n; ++r)
      if (w[r][col] != 0) {
        piv = r;
        break;
      }
    if (piv < 0) continue;
    std::swap(w[row], w[piv]);
    Rat d = w[row][col];
    for (int j = 0; j < n; ++j) w[row][j] /= d;
    for (int r = 0; r < n; ++r) {
      if (r == row || w[r][col] == 0) continue;
      Rat f = w[r][col];
      for (int j = 0; j < n; ++j) w[r][j] -= f * w[row][j];
    }
    pivot_col.push_back(col);
    ++row;
  }
  // Free column exists (M - I is singular for unipotent M).
  int free_col = -1;
  for (int col = 0; col < n; ++col) {
    bool is_pivot = false;
    for (int pc : pivot_col) is_pivot |= (pc == col);
    if (!is_pivot) {
      free_col = col;
      break;
    }
  }
  require(free_col >= 0, "NotUnipotent", "no fixed vector: matrix has no eigenvalue 1");
  std::vector<Rat> x(n, 0);
  x[free_col] = 1;
  for (size_t r = 0; r < pivot_col.size(); ++r) x[pivot_col[r]] = -w[r][free_col];
  // Clear denominators, divide by gcd.
  Int lcm = 1;
  for (const Rat& xi : x) {
    Int den = boost::multiprecision::denominator(xi);
    lcm = lcm / int_gcd(lcm, den) * den;
  }
  std::vector<Int> v(n);
  Int g = 0;
  for (int i = 0; i < n; ++i) {
    Rat scaled = x[i] * Rat(lcm);
    v[i] = boost::multiprecision::numerator(scaled);
    g = int_gcd(g, v[i]);
  }
  for (int i = 0; i < n; ++i) v[i] /= g;
  return v;
}

// Unimodular U with U v = e1, built by extended-gcd row operations.
inline IntMatrix carry_to_e1(const std::vector<Int>& v) {
  int n = static_cast<int>(v.size());
  IntMatrix u = IntMatrix::identity(n);
  std::vector<Int> w = v;
  for (int i = 1; i < n; ++i) {
    if (w[i] == 0) continue;
    ExtGcd e = ext_gcd(w[0], w[i]);
    // Rows 0 and i get the 2x2 unimodular block [[s,t],[-w_i/g, w_0/g]].
    std::vector<Int> r0(n), ri(n);
    for (int j = 0; j < n; ++j) {
      r0[j] = e.s * u.at(0, j) + e.t * u.at(i, j);
      ri[j] = (-w[i] / e.g) * u.at(0, j) + (w[0] / e.g) * u.at(i, j);
    }
    for (int j = 0; j < n; ++j) {
      u.at(0, j) = r0[j];
      u.at(i, j) = ri[j];
    }
    w[i] = 0;
    w[0] = e.g;
  }
  if (w[0] < 0)
    for (int j = 0; j < n; ++j) u.at(0, j) = -u.at(0, j);
  return u;
}

}  // namespace detail

// Change of basis P in GL_n(Z) with P^-1 M P upper unitriangular.  Columns
// are sign-normalized (first nonzero entry positive).
inline IntMatrix unipotent_basis(const IntMatrix& m) {
  require(is_unipotent(m), "NotUnipotent", "matrix fails the nilpotency identity");
  int n = m.n;
  if (n == 0) return m;
  if (n == 1) return IntMatrix::identity(1);
  std::vector<Int> v = detail::primitive_fixed_vector(m);
  IntMatrix u = detail::carry_to_e1(v);
  IntMatrix uinv = mat_inverse_unimodular(u);
  IntMatrix m1 = mat_mul(mat_mul(u, m), uinv);
  // m1 fixes e1; recurse on the lower-right block.
  IntMatrix q(n - 1);
  for (int i = 1; i < n; ++i) {
    require(m1.at(i, 0) == 0, "NotUnipotent", "fixed vector did not split off");
    for (int j = 1; j < n; ++j) q.at(i - 1, j - 1) = m1.at(i, j);
  }
  IntMatrix pq = unipotent_basis(q);
  IntMatrix block = IntMatrix::identity(n);
  for (int i = 1; i < n; ++i)
    for (int j = 1; j < n; ++j) block.at(i, j) = pq.at(i - 1, j - 1);
  IntMatrix p = mat_mul(uinv, block);
  // Sign-normalize columns; conjugation by a diagonal ±1 matrix preserves
  // unitriangularity.
  for (int j = 0; j < n; ++j) {
    int first = -1;
    for (int i = 0; i < n; ++i)
      if (p.at(i, j) != 0) {
        first = i;
        break;
      }
    if (first >= 0 && p.at(first, j) < 0)
      for (int i = 0; i < n; ++i) p.at(i, j) = -p.at(i, j);
  }
  IntMatrix check = mat_mul(mat_mul(mat_inverse_unimodular(p), m), p);
  require(is_upper_unitriangular(check), "NotUnipotent",
          "triangularization check failed");
  return p;
}

// Column j = exponent-sum vector of the image of the j-th generator.
inline IntMatrix abelianization(const Aut& f) {
  IntMatrix m(f.rank());
  for (int j = 0; j < f.rank(); ++j)
    for (Letter x : f.images()[j].letters())
      m.at(std::abs(x) - 1, j) += (x > 0 ? 1 : -1);
  return m;
}

}  // namespace upg
