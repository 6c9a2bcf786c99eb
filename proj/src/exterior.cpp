#include "g2flow/exterior.hpp"

#include <bit>
#include <cmath>
#include <cstring>

namespace g2flow::ext {

namespace {

constexpr std::uint8_t kFullMask = 0x7f;

int popcount(std::uint8_t m) { return std::popcount(static_cast<unsigned>(m)); }

// parity sign of merging the increasing tuples behind masks a and b
// (0 when they intersect); also the sign of *e^I when b = complement(a)
int merge_sign(std::uint8_t a, std::uint8_t b) {
  if (a & b) return 0;
  int inv = 0;
  for (int j = 0; j < kDim; ++j)
    if (b & (1u << j)) inv += popcount(static_cast<std::uint8_t>(a >> (j + 1)));
  return (inv & 1) ? -1 : +1;
}

struct Tables {
  // masks per degree in lex order of increasing tuples
  std::array<std::vector<std::uint8_t>, 8> masks;
  std::array<int, 128> rank_of_mask{};
  std::array<std::vector<WedgeTerm>, 64> wedge;  // [ka*8+kb]
  std::array<std::vector<InteriorTerm>, 8> interior;
  std::array<std::vector<StarTerm>, 8> star;

  Tables() {
    for (int k = 0; k <= kDim; ++k) {
      std::array<int, 7> idx{};
      for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
      while (true) {
        std::uint8_t m = 0;
        for (int i = 0; i < k; ++i) m |= static_cast<std::uint8_t>(1u << idx[static_cast<std::size_t>(i)]);
        rank_of_mask[m] = static_cast<int>(masks[static_cast<std::size_t>(k)].size());
        masks[static_cast<std::size_t>(k)].push_back(m);
        // next increasing tuple in lex order
        int p = k - 1;
        while (p >= 0 && idx[static_cast<std::size_t>(p)] == kDim - k + p) --p;
        if (p < 0) break;
        ++idx[static_cast<std::size_t>(p)];
        for (int q = p + 1; q < k; ++q) idx[static_cast<std::size_t>(q)] = idx[static_cast<std::size_t>(q - 1)] + 1;
      }
    }
    for (int ka = 0; ka <= kDim; ++ka)
      for (int kb = 0; ka + kb <= kDim; ++kb) {
        auto& tab = wedge[static_cast<std::size_t>(ka * 8 + kb)];
        for (std::size_t ia = 0; ia < masks[static_cast<std::size_t>(ka)].size(); ++ia)
          for (std::size_t ib = 0; ib < masks[static_cast<std::size_t>(kb)].size(); ++ib) {
            const std::uint8_t ma = masks[static_cast<std::size_t>(ka)][ia];
            const std::uint8_t mb = masks[static_cast<std::size_t>(kb)][ib];
            const int s = merge_sign(ma, mb);
            if (s == 0) continue;
            tab.push_back({static_cast<std::uint16_t>(ia), static_cast<std::uint16_t>(ib),
                           static_cast<std::uint16_t>(rank_of_mask[ma | mb]),
                           static_cast<std::int8_t>(s)});
          }
      }
    for (int k = 1; k <= kDim; ++k) {
      auto& tab = interior[static_cast<std::size_t>(k)];
      for (std::size_t i = 0; i < masks[static_cast<std::size_t>(k)].size(); ++i) {
        const std::uint8_t m = masks[static_cast<std::size_t>(k)][i];
        for (int a = 0; a < kDim; ++a) {
          if (!(m & (1u << a))) continue;
          const int pos = popcount(static_cast<std::uint8_t>(m & ((1u << a) - 1u)));
          tab.push_back({static_cast<std::uint16_t>(i),
                         static_cast<std::uint16_t>(rank_of_mask[m & ~(1u << a)]),
                         static_cast<std::uint8_t>(a),
                         static_cast<std::int8_t>((pos & 1) ? -1 : +1)});
        }
      }
    }
    for (int k = 0; k <= kDim; ++k) {
      auto& tab = star[static_cast<std::size_t>(k)];
      for (std::size_t i = 0; i < masks[static_cast<std::size_t>(k)].size(); ++i) {
        const std::uint8_t m = masks[static_cast<std::size_t>(k)][i];
        const std::uint8_t mc = static_cast<std::uint8_t>(kFullMask & ~m);
        tab.push_back({static_cast<std::uint16_t>(rank_of_mask[mc]),
                       static_cast<std::int8_t>(merge_sign(m, mc))});
      }
    }
  }
};

const Tables& tables() {
  static const Tables t;
  return t;
}

double det1(const double* M, const int* r, const int* c) { return M[r[0] * 7 + c[0]]; }

double det2(const double* M, const int* r, const int* c) {
  return M[r[0] * 7 + c[0]] * M[r[1] * 7 + c[1]] -
         M[r[0] * 7 + c[1]] * M[r[1] * 7 + c[0]];
}

double det3(const double* M, const int* r, const int* c) {
  const double a = M[r[0] * 7 + c[0]], b = M[r[0] * 7 + c[1]], cc = M[r[0] * 7 + c[2]];
  const double d = M[r[1] * 7 + c[0]], e = M[r[1] * 7 + c[1]], f = M[r[1] * 7 + c[2]];
  const double g = M[r[2] * 7 + c[0]], h = M[r[2] * 7 + c[1]], i = M[r[2] * 7 + c[2]];
  return a * (e * i - f * h) - b * (d * i - f * g) + cc * (d * h - e * g);
}

// general minor by Laplace expansion (cold paths only)
double detk(const double* M, const int* r, const int* c, int k) {
  if (k == 0) return 1.0;
  if (k == 1) return det1(M, r, c);
  if (k == 2) return det2(M, r, c);
  if (k == 3) return det3(M, r, c);
  double sum = 0.0;
  std::array<int, 7> rs{};
  for (int i = 1; i < k; ++i) rs[static_cast<std::size_t>(i - 1)] = r[i];
  for (int j = 0; j < k; ++j) {
    std::array<int, 7> cs{};
    int t = 0;
    for (int q = 0; q < k; ++q)
      if (q != j) cs[static_cast<std::size_t>(t++)] = c[q];
    const double mj = M[r[0] * 7 + c[j]];
    if (mj != 0.0) sum += ((j & 1) ? -1.0 : 1.0) * mj * detk(M, rs.data(), cs.data(), k - 1);
  }
  return sum;
}

void mask_to_idx(std::uint8_t m, int* idx) {
  int t = 0;
  for (int a = 0; a < kDim; ++a)
    if (m & (1u << a)) idx[t++] = a;
}

int mask_index_sum(std::uint8_t m) {
  int s = 0;
  for (int a = 0; a < kDim; ++a)
    if (m & (1u << a)) s += a;
  return s;
}

}  // namespace

int mi_rank(int k, const int* idx) {
  std::uint8_t m = 0;
  for (int i = 0; i < k; ++i) m |= static_cast<std::uint8_t>(1u << idx[i]);
  return tables().rank_of_mask[m];
}

void mi_unrank(int k, int rank, int* idx_out) {
  mask_to_idx(tables().masks[static_cast<std::size_t>(k)][static_cast<std::size_t>(rank)], idx_out);
}

std::uint8_t mi_mask(int k, int rank) {
  return tables().masks[static_cast<std::size_t>(k)][static_cast<std::size_t>(rank)];
}

int mask_rank(std::uint8_t mask) { return tables().rank_of_mask[mask]; }

RankedIndex mi_sort(int k, const int* idx) {
  // insertion sort, counting transpositions
  std::array<int, 7> a{};
  for (int i = 0; i < k; ++i) a[static_cast<std::size_t>(i)] = idx[i];
  int swaps = 0;
  for (int i = 1; i < k; ++i)
    for (int j = i; j > 0 && a[static_cast<std::size_t>(j - 1)] > a[static_cast<std::size_t>(j)]; --j) {
      std::swap(a[static_cast<std::size_t>(j - 1)], a[static_cast<std::size_t>(j)]);
      ++swaps;
    }
  for (int i = 1; i < k; ++i)
    if (a[static_cast<std::size_t>(i - 1)] == a[static_cast<std::size_t>(i)]) return {0, 0};
  return {mi_rank(k, a.data()), (swaps & 1) ? -1 : +1};
}

std::span<const WedgeTerm> wedge_table(int ka, int kb) {
  return tables().wedge[static_cast<std::size_t>(ka * 8 + kb)];
}

std::span<const InteriorTerm> interior_table(int k) {
  return tables().interior[static_cast<std::size_t>(k)];
}

std::span<const StarTerm> star_table(int k) {
  return tables().star[static_cast<std::size_t>(k)];
}

void wedge(int ka, const double* a, int kb, const double* b, double* out) {
  if (ka + kb > kDim) throw std::invalid_argument("wedge: degree overflow");
  const int nc = comp_count(ka + kb);
  for (int i = 0; i < nc; ++i) out[i] = 0.0;
  for (const auto& t : wedge_table(ka, kb))
    out[t.iout] += t.sign * a[t.ia] * b[t.ib];
}

void interior(const double v[kDim], int k, const double* a, double* out) {
  if (k < 1) throw std::invalid_argument("interior: degree-0 input");
  const int nc = comp_count(k - 1);
  for (int i = 0; i < nc; ++i) out[i] = 0.0;
  for (const auto& t : interior_table(k))
    out[t.iout] += t.sign * v[t.axis] * a[t.iin];
}

double inner_euclid(int k, const double* a, const double* b) {
  const int nc = comp_count(k);
  double s = 0.0;
  for (int i = 0; i < nc; ++i) s += a[i] * b[i];
  return s;
}

void star_euclid(int k, const double* in, double* out) {
  const auto tab = star_table(k);
  const int nc = comp_count(7 - k);
  for (int i = 0; i < nc; ++i) out[i] = 0.0;
  for (std::size_t i = 0; i < tab.size(); ++i)
    out[tab[i].iout] = tab[i].sign * in[i];
}

void pullback(const double* M, int k, const double* a, double* out) {
  const int nc = comp_count(k);
  std::array<int, 7> ri{}, ci{};
  for (int I = 0; I < nc; ++I) {
    mask_to_idx(mi_mask(k, I), ci.data());
    double s = 0.0;
    for (int J = 0; J < nc; ++J) {
      if (a[J] == 0.0) continue;
      mask_to_idx(mi_mask(k, J), ri.data());
      s += a[J] * detk(M, ri.data(), ci.data(), k);
    }
    out[I] = s;
  }
}

Metric7 Metric7::identity() {
  Metric7 m;
  for (int i = 0; i < kDim; ++i) {
    m.g[static_cast<std::size_t>(i * 7 + i)] = 1.0;
    m.ginv[static_cast<std::size_t>(i * 7 + i)] = 1.0;
    m.chol[static_cast<std::size_t>(i * 7 + i)] = 1.0;
    m.chol_inv[static_cast<std::size_t>(i * 7 + i)] = 1.0;
  }
  m.det = 1.0;
  return m;
}

bool Metric7::try_from(const double* g99, Metric7& out) {
  std::memcpy(out.g.data(), g99, sizeof(double) * 49);
  // Cholesky g = L L^T
  std::array<double, 49>& L = out.chol;
  L.fill(0.0);
  double det = 1.0;
  for (int i = 0; i < kDim; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = g99[i * 7 + j];
      for (int q = 0; q < j; ++q) s -= L[static_cast<std::size_t>(i * 7 + q)] * L[static_cast<std::size_t>(j * 7 + q)];
      if (i == j) {
        if (!(s > 0.0) || !std::isfinite(s)) return false;
        L[static_cast<std::size_t>(i * 7 + i)] = std::sqrt(s);
        det *= s;
      } else {
        L[static_cast<std::size_t>(i * 7 + j)] = s / L[static_cast<std::size_t>(j * 7 + j)];
      }
    }
  }
  out.det = det;
  // L^{-1} by forward substitution
  std::array<double, 49>& Li = out.chol_inv;
  Li.fill(0.0);
  for (int j = 0; j < kDim; ++j) {
    Li[static_cast<std::size_t>(j * 7 + j)] = 1.0 / L[static_cast<std::size_t>(j * 7 + j)];
    for (int i = j + 1; i < kDim; ++i) {
      double s = 0.0;
      for (int q = j; q < i; ++q) s += L[static_cast<std::size_t>(i * 7 + q)] * Li[static_cast<std::size_t>(q * 7 + j)];
      Li[static_cast<std::size_t>(i * 7 + j)] = -s / L[static_cast<std::size_t>(i * 7 + i)];
    }
  }
  // g^{-1} = L^{-T} L^{-1}
  for (int i = 0; i < kDim; ++i)
    for (int j = 0; j < kDim; ++j) {
      double s = 0.0;
      for (int q = std::max(i, j); q < kDim; ++q)
        s += Li[static_cast<std::size_t>(q * 7 + i)] * Li[static_cast<std::size_t>(q * 7 + j)];
      out.ginv[static_cast<std::size_t>(i * 7 + j)] = s;
    }
  return true;
}

Metric7 Metric7::from(const double* g99) {
  Metric7 m;
  if (!try_from(g99, m)) throw NotPositiveError("Metric7: matrix is not positive-definite");
  return m;
}

namespace {

// Offset tables so the exterior-power (compound) action runs on flat loads:
// C2 minors come from four matrix offsets; C3 minors expand along the first
// row against the cached C2 block; degrees >= 4 go through the adjugate
// identity det(M[I,J]) = det(M)·(−1)^{ΣI+ΣJ}·det(Minv[Jc,Ic]).
struct CompoundTables {
  struct C2Entry {
    std::uint8_t o00, o01, o10, o11;
  };
  std::array<C2Entry, 441> c2{};
  struct C3Term {
    std::uint8_t m_off;
    std::int8_t sign;
    std::uint16_t c2_idx;
  };
  std::array<C3Term, 1225 * 3> c3{};
  // degree-4: adjugate into a 3-minor of Minv addressed as a c3 pair
  struct AdjEntry {
    std::int8_t sign;
    std::uint16_t pair;
  };
  std::array<AdjEntry, 1225> adj4{};
  std::array<AdjEntry, 441> adj5{};   // pair indexes the c2 table
  std::array<AdjEntry, 49> adj6{};    // pair is a single Minv offset

  CompoundTables() {
    std::array<int, 7> ri{}, ci{};
    for (int I = 0; I < 21; ++I)
      for (int J = 0; J < 21; ++J) {
        mask_to_idx(mi_mask(2, I), ri.data());
        mask_to_idx(mi_mask(2, J), ci.data());
        c2[static_cast<std::size_t>(I * 21 + J)] = {
            static_cast<std::uint8_t>(ri[0] * 7 + ci[0]), static_cast<std::uint8_t>(ri[0] * 7 + ci[1]),
            static_cast<std::uint8_t>(ri[1] * 7 + ci[0]), static_cast<std::uint8_t>(ri[1] * 7 + ci[1])};
      }
    for (int I = 0; I < 35; ++I)
      for (int J = 0; J < 35; ++J) {
        mask_to_idx(mi_mask(3, I), ri.data());
        mask_to_idx(mi_mask(3, J), ci.data());
        const int rsub[2] = {ri[1], ri[2]};
        for (int r = 0; r < 3; ++r) {
          int csub[2];
          int t = 0;
          for (int q = 0; q < 3; ++q)
            if (q != r) csub[t++] = ci[q];
          const int i2 = mi_rank(2, rsub);
          const int j2 = mi_rank(2, csub);
          c3[static_cast<std::size_t>((I * 35 + J) * 3 + r)] = {
              static_cast<std::uint8_t>(ri[0] * 7 + ci[r]),
              static_cast<std::int8_t>((r % 2) ? -1 : 1),
              static_cast<std::uint16_t>(i2 * 21 + j2)};
        }
      }
    for (int I = 0; I < 35; ++I)
      for (int J = 0; J < 35; ++J) {
        const std::uint8_t mI = mi_mask(4, I);
        const std::uint8_t mJ = mi_mask(4, J);
        const int i3 = mask_rank(static_cast<std::uint8_t>(kFullMask & ~mJ));
        const int j3 = mask_rank(static_cast<std::uint8_t>(kFullMask & ~mI));
        adj4[static_cast<std::size_t>(I * 35 + J)] = {
            static_cast<std::int8_t>(((mask_index_sum(mI) + mask_index_sum(mJ)) & 1) ? -1 : 1),
            static_cast<std::uint16_t>(i3 * 35 + j3)};
      }
    for (int I = 0; I < 21; ++I)
      for (int J = 0; J < 21; ++J) {
        const std::uint8_t mI = mi_mask(5, I);
        const std::uint8_t mJ = mi_mask(5, J);
        const int i2 = mask_rank(static_cast<std::uint8_t>(kFullMask & ~mJ));
        const int j2 = mask_rank(static_cast<std::uint8_t>(kFullMask & ~mI));
        adj5[static_cast<std::size_t>(I * 21 + J)] = {
            static_cast<std::int8_t>(((mask_index_sum(mI) + mask_index_sum(mJ)) & 1) ? -1 : 1),
            static_cast<std::uint16_t>(i2 * 21 + j2)};
      }
    for (int I = 0; I < 7; ++I)
      for (int J = 0; J < 7; ++J) {
        const std::uint8_t mI = mi_mask(6, I);
        const std::uint8_t mJ = mi_mask(6, J);
        mask_to_idx(static_cast<std::uint8_t>(kFullMask & ~mJ), ri.data());
        mask_to_idx(static_cast<std::uint8_t>(kFullMask & ~mI), ci.data());
        adj6[static_cast<std::size_t>(I * 7 + J)] = {
            static_cast<std::int8_t>(((mask_index_sum(mI) + mask_index_sum(mJ)) & 1) ? -1 : 1),
            static_cast<std::uint16_t>(ri[0] * 7 + ci[0])};
      }
  }
};

const CompoundTables& ctables() {
  static const CompoundTables t;
  return t;
}

void c2_cache(const double* M, double* cache) {
  const auto& tab = ctables().c2;
  for (int p = 0; p < 441; ++p) {
    const auto& e = tab[static_cast<std::size_t>(p)];
    cache[p] = M[e.o00] * M[e.o11] - M[e.o01] * M[e.o10];
  }
}

// exterior-power action of a SYMMETRIC matrix: the minor matrix is symmetric,
// so each det is evaluated once and applied to both triangle entries
void sym_compound_apply(int k, const double* M, const double* Minv, double detM,
                        const double* a, double* out) {
  const auto& T = ctables();
  switch (k) {
    case 0:
      out[0] = a[0];
      return;
    case kDim:
      out[0] = detM * a[0];
      return;
    case 1:
      for (int i = 0; i < 7; ++i) {
        double s = 0.0;
        for (int j = 0; j < 7; ++j) s += M[i * 7 + j] * a[j];
        out[i] = s;
      }
      return;
    case 2: {
      double c2[441];
      c2_cache(M, c2);
      for (int I = 0; I < 21; ++I) out[I] = c2[I * 21 + I] * a[I];
      for (int I = 0; I < 21; ++I)
        for (int J = I + 1; J < 21; ++J) {
          const double det = c2[I * 21 + J];
          out[I] += det * a[J];
          out[J] += det * a[I];
        }
      return;
    }
    case 3: {
      double c2[441];
      c2_cache(M, c2);
      for (int I = 0; I < 35; ++I) out[I] = 0.0;
      for (int I = 0; I < 35; ++I)
        for (int J = I; J < 35; ++J) {
          const auto* t3 = T.c3.data() + static_cast<std::size_t>((I * 35 + J) * 3);
          const double det = t3[0].sign * M[t3[0].m_off] * c2[t3[0].c2_idx] +
                             t3[1].sign * M[t3[1].m_off] * c2[t3[1].c2_idx] +
                             t3[2].sign * M[t3[2].m_off] * c2[t3[2].c2_idx];
          out[I] += det * a[J];
          if (J != I) out[J] += det * a[I];
        }
      return;
    }
    case 4: {
      double c2[441];
      c2_cache(Minv, c2);
      for (int I = 0; I < 35; ++I) out[I] = 0.0;
      for (int I = 0; I < 35; ++I)
        for (int J = I; J < 35; ++J) {
          const auto& e = T.adj4[static_cast<std::size_t>(I * 35 + J)];
          const auto* t3 = T.c3.data() + static_cast<std::size_t>(e.pair) * 3;
          const double det = e.sign * (t3[0].sign * Minv[t3[0].m_off] * c2[t3[0].c2_idx] +
                                       t3[1].sign * Minv[t3[1].m_off] * c2[t3[1].c2_idx] +
                                       t3[2].sign * Minv[t3[2].m_off] * c2[t3[2].c2_idx]);
          out[I] += det * a[J];
          if (J != I) out[J] += det * a[I];
        }
      for (int I = 0; I < 35; ++I) out[I] *= detM;
      return;
    }
    case 5: {
      double c2[441];
      c2_cache(Minv, c2);
      for (int I = 0; I < 21; ++I) out[I] = 0.0;
      for (int I = 0; I < 21; ++I)
        for (int J = I; J < 21; ++J) {
          const auto& e = T.adj5[static_cast<std::size_t>(I * 21 + J)];
          const double det = e.sign * c2[e.pair];
          out[I] += det * a[J];
          if (J != I) out[J] += det * a[I];
        }
      for (int I = 0; I < 21; ++I) out[I] *= detM;
      return;
    }
    case 6: {
      for (int I = 0; I < 7; ++I) {
        double s = 0.0;
        for (int J = 0; J < 7; ++J) {
          const auto& e = T.adj6[static_cast<std::size_t>(I * 7 + J)];
          s += e.sign * Minv[e.pair] * a[J];
        }
        out[I] = detM * s;
      }
      return;
    }
    default:
      throw std::invalid_argument("sym_compound_apply: bad degree");
  }
}

}  // namespace

void compound_apply(int k, const double* M, const double* Minv, double detM,
                    const double* a, double* out) {
  const auto& T = ctables();
  switch (k) {
    case 0:
      out[0] = a[0];
      return;
    case kDim:
      out[0] = detM * a[0];
      return;
    case 1:
      for (int i = 0; i < 7; ++i) {
        double s = 0.0;
        for (int j = 0; j < 7; ++j) s += M[i * 7 + j] * a[j];
        out[i] = s;
      }
      return;
    case 2: {
      double c2[441];
      c2_cache(M, c2);
      for (int I = 0; I < 21; ++I) {
        double s = 0.0;
        const double* row = c2 + I * 21;
        for (int J = 0; J < 21; ++J) s += row[J] * a[J];
        out[I] = s;
      }
      return;
    }
    case 3: {
      double c2[441];
      c2_cache(M, c2);
      for (int I = 0; I < 35; ++I) {
        double s = 0.0;
        for (int J = 0; J < 35; ++J) {
          const auto* t3 = T.c3.data() + static_cast<std::size_t>((I * 35 + J) * 3);
          const double det = t3[0].sign * M[t3[0].m_off] * c2[t3[0].c2_idx] +
                             t3[1].sign * M[t3[1].m_off] * c2[t3[1].c2_idx] +
                             t3[2].sign * M[t3[2].m_off] * c2[t3[2].c2_idx];
          s += det * a[J];
        }
        out[I] = s;
      }
      return;
    }
    case 4: {
      double c2[441];
      c2_cache(Minv, c2);
      for (int I = 0; I < 35; ++I) {
        double s = 0.0;
        for (int J = 0; J < 35; ++J) {
          const auto& e = T.adj4[static_cast<std::size_t>(I * 35 + J)];
          const auto* t3 = T.c3.data() + static_cast<std::size_t>(e.pair) * 3;
          const double det = t3[0].sign * Minv[t3[0].m_off] * c2[t3[0].c2_idx] +
                             t3[1].sign * Minv[t3[1].m_off] * c2[t3[1].c2_idx] +
                             t3[2].sign * Minv[t3[2].m_off] * c2[t3[2].c2_idx];
          s += e.sign * det * a[J];
        }
        out[I] = detM * s;
      }
      return;
    }
    case 5: {
      double c2[441];
      c2_cache(Minv, c2);
      for (int I = 0; I < 21; ++I) {
        double s = 0.0;
        for (int J = 0; J < 21; ++J) {
          const auto& e = T.adj5[static_cast<std::size_t>(I * 21 + J)];
          s += e.sign * c2[e.pair] * a[J];
        }
        out[I] = detM * s;
      }
      return;
    }
    case 6: {
      for (int I = 0; I < 7; ++I) {
        double s = 0.0;
        for (int J = 0; J < 7; ++J) {
          const auto& e = T.adj6[static_cast<std::size_t>(I * 7 + J)];
          s += e.sign * Minv[e.pair] * a[J];
        }
        out[I] = detM * s;
      }
      return;
    }
    default:
      throw std::invalid_argument("compound_apply: bad degree");
  }
}

double inner(int k, const double* a, const double* b, const Metric7& m) {
  std::array<double, kMaxComp> tmp{};
  compound_apply(k, m.ginv.data(), m.g.data(), 1.0 / m.det, b, tmp.data());
  return inner_euclid(k, a, tmp.data());
}

void hodge_star(int k, const double* a, double* out, const Metric7& m, int orient) {
  std::array<double, kMaxComp> tmp{};
  compound_apply(k, m.ginv.data(), m.g.data(), 1.0 / m.det, a, tmp.data());
  star_euclid(k, tmp.data(), out);
  const double s = orient * std::sqrt(m.det);
  const int nc = comp_count(7 - k);
  for (int i = 0; i < nc; ++i) out[i] *= s;
}

void wedge_adjoint(const double* s3, const double* c4, const Metric7& m, double out1[kDim]) {
  std::array<double, kMaxComp> sc{};  // *_g c : degree 3
  hodge_star(4, c4, sc.data(), m);
  std::array<double, 7> w6{};  // s ∧ *c : degree 6
  wedge(3, s3, 3, sc.data(), w6.data());
  hodge_star(6, w6.data(), out1, m);
  for (int i = 0; i < kDim; ++i) out1[i] = -out1[i];
}

KForm KForm::basis(int k, std::initializer_list<int> idx) {
  KForm f(k);
  std::array<int, 7> a{};
  int t = 0;
  for (int i : idx) a[static_cast<std::size_t>(t++)] = i;
  const RankedIndex r = mi_sort(k, a.data());
  if (r.sign != 0) f.c[static_cast<std::size_t>(r.rank)] = r.sign;
  return f;
}

double KForm::coeff(std::initializer_list<int> idx) const {
  std::array<int, 7> a{};
  int t = 0;
  for (int i : idx) a[static_cast<std::size_t>(t++)] = i;
  const RankedIndex r = mi_sort(k, a.data());
  return r.sign == 0 ? 0.0 : r.sign * c[static_cast<std::size_t>(r.rank)];
}

KForm& KForm::operator+=(const KForm& o) {
  for (int i = 0; i < n(); ++i) c[static_cast<std::size_t>(i)] += o.c[static_cast<std::size_t>(i)];
  return *this;
}
KForm& KForm::operator-=(const KForm& o) {
  for (int i = 0; i < n(); ++i) c[static_cast<std::size_t>(i)] -= o.c[static_cast<std::size_t>(i)];
  return *this;
}
KForm& KForm::operator*=(double s) {
  for (int i = 0; i < n(); ++i) c[static_cast<std::size_t>(i)] *= s;
  return *this;
}
KForm operator+(KForm a, const KForm& b) { return a += b; }
KForm operator-(KForm a, const KForm& b) { return a -= b; }
KForm operator*(double s, KForm a) { return a *= s; }

KForm wedge(const KForm& a, const KForm& b) {
  KForm out(a.k + b.k);
  wedge(a.k, a.c.data(), b.k, b.c.data(), out.c.data());
  return out;
}

KForm interior(const std::array<double, kDim>& v, const KForm& a) {
  KForm out(a.k - 1);
  interior(v.data(), a.k, a.c.data(), out.c.data());
  return out;
}

double inner(const KForm& a, const KForm& b, const Metric7& m) {
  if (a.k != b.k) throw std::invalid_argument("inner: degree mismatch");
  return inner(a.k, a.c.data(), b.c.data(), m);
}

KForm hodge_star(const KForm& a, const Metric7& m, int orient) {
  KForm out(7 - a.k);
  hodge_star(a.k, a.c.data(), out.c.data(), m, orient);
  return out;
}

KForm wedge_adjoint(const KForm& s, const KForm& c, const Metric7& m) {
  if (s.k != 3 || c.k != 4) throw std::invalid_argument("wedge_adjoint: degrees must be 3 and 4");
  KForm out(1);
  wedge_adjoint(s.c.data(), c.c.data(), m, out.c.data());
  return out;
}

KForm pullback(const double* M, const KForm& a) {
  KForm out(a.k);
  pullback(M, a.k, a.c.data(), out.c.data());
  return out;
}

const KForm& sigma_std() {
  static const KForm s = [] {
    KForm f(3);
    f += KForm::basis(3, {0, 1, 2});
    f += KForm::basis(3, {0, 3, 4});
    f += KForm::basis(3, {0, 5, 6});
    f += KForm::basis(3, {1, 3, 5});
    f -= KForm::basis(3, {1, 4, 6});
    f -= KForm::basis(3, {2, 3, 6});
    f -= KForm::basis(3, {2, 4, 5});
    return f;
  }();
  return s;
}

double norm(const KForm& a, const Metric7& m) { return std::sqrt(inner(a, a, m)); }

}  // namespace g2flow::ext
