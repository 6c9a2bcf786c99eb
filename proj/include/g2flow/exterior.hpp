#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// Exact basis-indexed exterior algebra over (R^7)*.
//
// Basis k-forms e^{i1...ik} (i1<...<ik, axes 0..6 internally) are ordered
// lexicographically; a k-form is the coefficient vector over that basis.
// All sign bookkeeping lives in static tables computed once from permutation
// parities.

namespace g2flow::ext {

inline constexpr int kDim = 7;
inline constexpr int kMaxComp = 35;  // C(7,3) = C(7,4)

inline constexpr std::array<int, 8> kCompCount = {1, 7, 21, 35, 35, 21, 7, 1};

inline int comp_count(int k) { return kCompCount[static_cast<std::size_t>(k)]; }

// --- multi-index bookkeeping ------------------------------------------------

// rank of an increasing index tuple within the lex order of its degree
int mi_rank(int k, const int* idx);
// inverse of mi_rank
void mi_unrank(int k, int rank, int* idx_out);
// bitmask (bit a set iff axis a present) of the basis element at `rank`
std::uint8_t mi_mask(int k, int rank);
int mask_rank(std::uint8_t mask);  // rank within degree popcount(mask)

// Coefficient lookup for arbitrary (possibly unsorted / repeated) index
// tuples: returns {rank, sign} with sign 0 when an index repeats.
struct RankedIndex {
  int rank;
  int sign;
};
RankedIndex mi_sort(int k, const int* idx);

// --- sparse structure tables -------------------------------------------------

struct WedgeTerm {
  std::uint16_t ia, ib, iout;
  std::int8_t sign;
};
// terms of the bilinear map Λ^ka × Λ^kb → Λ^{ka+kb}
std::span<const WedgeTerm> wedge_table(int ka, int kb);

struct InteriorTerm {
  std::uint16_t iin, iout;
  std::uint8_t axis;
  std::int8_t sign;
};
// terms of (v, a) -> v ⌟ a for degree k input
std::span<const InteriorTerm> interior_table(int k);

struct StarTerm {
  std::uint16_t iout;
  std::int8_t sign;
};
// Euclidean star on degree k, standard orientation e^{1...7}
std::span<const StarTerm> star_table(int k);

// --- raw-coefficient kernels (hot path) --------------------------------------

// out (degree ka+kb) = a ∧ b; caller provides zeroed or garbage out, it is
// overwritten. Requires ka+kb <= 7.
void wedge(int ka, const double* a, int kb, const double* b, double* out);

// out (degree k-1) = v ⌟ a for a vector v in the standard frame
void interior(const double v[kDim], int k, const double* a, double* out);

// Euclidean inner product (orthonormal-covector convention)
double inner_euclid(int k, const double* a, const double* b);

// Euclidean star, orientation +1 = e^{1...7}
void star_euclid(int k, const double* in, double* out);

// pullback of a k-form by the linear map M (row-major 7x7, M[r*7+c]):
// (M^*a)_I = sum_J a_J det(M[J,I]) with rows J, columns I
void pullback(const double* M, int k, const double* a, double* out);

// --- metric-aware layer -------------------------------------------------------

struct NotPositiveError : std::runtime_error {
  explicit NotPositiveError(const std::string& what) : std::runtime_error(what) {}
};

// Symmetric positive-definite metric on tangent vectors with cached inverse
// and Cholesky factor (g = L L^T, L lower). Matrices are row-major 7x7.
struct Metric7 {
  std::array<double, 49> g{};
  std::array<double, 49> ginv{};
  std::array<double, 49> chol{};      // L
  std::array<double, 49> chol_inv{};  // L^{-1}
  double det = 0.0;

  static Metric7 identity();
  // throws NotPositiveError when g is not SPD
  static Metric7 from(const double* g99);
  // returns false instead of throwing
  static bool try_from(const double* g99, Metric7& out);
};

// compound (exterior-power) action: out = Λ^k(M) a where M is given together
// with its inverse and determinant so degrees k >= 4 can use the adjugate
// identity det(M[I,J]) = det(M)·(−1)^{Σ I+Σ J}·det(M^{-1}[Jc,Ic]).
void compound_apply(int k, const double* M, const double* Minv, double detM,
                    const double* a, double* out);

// inner product of two k-forms w.r.t. g
double inner(int k, const double* a, const double* b, const Metric7& m);

// Hodge star of g: out = orient · sqrt(det g) · star_euclid(Λ^k(g^{-1}) a)
void hodge_star(int k, const double* a, double* out, const Metric7& m,
                int orient = +1);

// unique 1-form r with <r,α>_g = <s∧α, c>_g for all 1-forms α
// (s degree 3, c degree 4); closed form r = −*_g(s ∧ *_g c)
void wedge_adjoint(const double* s3, const double* c4, const Metric7& m,
                   double out1[kDim]);

// --- convenience value type ---------------------------------------------------

struct KForm {
  int k = 0;
  std::array<double, kMaxComp> c{};

  KForm() = default;
  explicit KForm(int degree) : k(degree) {}
  int n() const { return comp_count(k); }
  double& operator[](int i) { return c[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return c[static_cast<std::size_t>(i)]; }

  // coefficient on e^{idx[0]} ∧ ... (0-based axes, any order)
  static KForm basis(int k, std::initializer_list<int> idx);
  double coeff(std::initializer_list<int> idx) const;

  KForm& operator+=(const KForm& o);
  KForm& operator-=(const KForm& o);
  KForm& operator*=(double s);
};

KForm operator+(KForm a, const KForm& b);
KForm operator-(KForm a, const KForm& b);
KForm operator*(double s, KForm a);

KForm wedge(const KForm& a, const KForm& b);
KForm interior(const std::array<double, kDim>& v, const KForm& a);
double inner(const KForm& a, const KForm& b, const Metric7& m);
KForm hodge_star(const KForm& a, const Metric7& m, int orient = +1);
KForm wedge_adjoint(const KForm& s, const KForm& c, const Metric7& m);
KForm pullback(const double* M, const KForm& a);

// the standard G2 3-form e^{123}+e^{145}+e^{167}+e^{246}−e^{257}−e^{347}−e^{356}
const KForm& sigma_std();

double norm(const KForm& a, const Metric7& m);

}  // namespace g2flow::ext
