#include "g2flow/g2point.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace g2flow::g2 {

using ext::comp_count;
using ext::kDim;

namespace {

struct CubicTerm {
  std::uint16_t i, j, k;
  float coef;
};

// per (u,v) pair, u <= v: terms of the cubic form behind sigma_bilinear
struct BilinearTable {
  std::array<std::vector<CubicTerm>, 28> terms;
  static int pair_index(int u, int v) { return u * 7 + v - u * (u + 1) / 2; }

  BilinearTable() {
    const int n3 = comp_count(3);
    std::array<double, 35> ei{}, ej{};
    std::array<double, 21> a{}, b{};
    std::array<double, 35> ab{};
    std::array<double, 7> vu{}, vv{};
    for (int u = 0; u < kDim; ++u)
      for (int v = u; v < kDim; ++v) {
        auto& list = terms[static_cast<std::size_t>(pair_index(u, v))];
        vu.fill(0.0);
        vv.fill(0.0);
        vu[static_cast<std::size_t>(u)] = 1.0;
        vv[static_cast<std::size_t>(v)] = 1.0;
        for (int I = 0; I < n3; ++I) {
          ei.fill(0.0);
          ei[static_cast<std::size_t>(I)] = 1.0;
          ext::interior(vu.data(), 3, ei.data(), a.data());
          for (int J = 0; J < n3; ++J) {
            ej.fill(0.0);
            ej[static_cast<std::size_t>(J)] = 1.0;
            ext::interior(vv.data(), 3, ej.data(), b.data());
            ext::wedge(2, a.data(), 2, b.data(), ab.data());
            for (int K = 0; K < n3; ++K) {
              // coefficient of (a ∧ b) ∧ e^K on e^{1...7}
              const std::uint8_t mk = ext::mi_mask(3, K);
              const int rank_c = ext::mask_rank(static_cast<std::uint8_t>(0x7f & ~mk));
              const double w = ab[static_cast<std::size_t>(rank_c)];
              if (w == 0.0) continue;
              // sign of e^{complement} ∧ e^K relative to e^{1...7}
              double sgn = 0.0;
              for (const auto& t : ext::wedge_table(4, 3))
                if (t.ia == rank_c && t.ib == K) {
                  sgn = t.sign;
                  break;
                }
              const double c = w * sgn;
              if (c != 0.0)
                list.push_back({static_cast<std::uint16_t>(I), static_cast<std::uint16_t>(J),
                                static_cast<std::uint16_t>(K), static_cast<float>(c)});
            }
          }
        }
      }
  }
};

const BilinearTable& btable() {
  static const BilinearTable t;
  return t;
}

double odd_root9(double x) {
  return x < 0.0 ? -std::pow(-x, 1.0 / 9.0) : std::pow(x, 1.0 / 9.0);
}

// det of a 7x7 matrix by LU with partial pivoting
double det7(const double* Min) {
  std::array<double, 49> M{};
  for (int i = 0; i < 49; ++i) M[static_cast<std::size_t>(i)] = Min[i];
  double det = 1.0;
  for (int c = 0; c < 7; ++c) {
    int p = c;
    for (int r = c + 1; r < 7; ++r)
      if (std::abs(M[static_cast<std::size_t>(r * 7 + c)]) > std::abs(M[static_cast<std::size_t>(p * 7 + c)])) p = r;
    if (M[static_cast<std::size_t>(p * 7 + c)] == 0.0) return 0.0;
    if (p != c) {
      for (int q = 0; q < 7; ++q) std::swap(M[static_cast<std::size_t>(p * 7 + q)], M[static_cast<std::size_t>(c * 7 + q)]);
      det = -det;
    }
    det *= M[static_cast<std::size_t>(c * 7 + c)];
    for (int r = c + 1; r < 7; ++r) {
      const double f = M[static_cast<std::size_t>(r * 7 + c)] / M[static_cast<std::size_t>(c * 7 + c)];
      for (int q = c; q < 7; ++q) M[static_cast<std::size_t>(r * 7 + q)] -= f * M[static_cast<std::size_t>(c * 7 + q)];
    }
  }
  return det;
}

const double kSixthPow79 = std::pow(6.0, -7.0 / 9.0);

}  // namespace

void sigma_bilinear(const double* s, double B[49]) {
  const auto& tab = btable();
  for (int u = 0; u < kDim; ++u)
    for (int v = u; v < kDim; ++v) {
      double acc = 0.0;
      for (const auto& t : tab.terms[static_cast<std::size_t>(BilinearTable::pair_index(u, v))])
        acc += static_cast<double>(t.coef) * s[t.i] * s[t.j] * s[t.k];
      B[u * 7 + v] = acc;
      B[v * 7 + u] = acc;
    }
}

bool try_metric_from_sigma(const double* s3, double refvol_coef, MetricVolume& out) {
  if (refvol_coef == 0.0) return false;
  std::array<double, 49> B{};
  sigma_bilinear(s3, B.data());
  const double detB = det7(B.data());
  const double det_omega = detB / std::pow(refvol_coef, 7.0);
  if (!(det_omega > 0.0) || !std::isfinite(det_omega)) return false;
  const double dvol = kSixthPow79 * odd_root9(det_omega) * refvol_coef;
  if (!(dvol > 0.0)) return false;
  std::array<double, 49> g{};
  const double scale = 1.0 / (6.0 * dvol);
  for (int i = 0; i < 49; ++i) g[static_cast<std::size_t>(i)] = B[static_cast<std::size_t>(i)] * scale;
  if (!Metric7::try_from(g.data(), out.metric)) return false;
  out.dvol_coef = dvol;
  return true;
}

MetricVolume metric_from_sigma(const double* s3, double refvol_coef) {
  MetricVolume mv;
  if (!try_metric_from_sigma(s3, refvol_coef, mv))
    throw NotPositiveError("metric_from_sigma: 3-form is not positive");
  return mv;
}

bool is_positive(const double* s3) {
  MetricVolume mv;
  return try_metric_from_sigma(s3, 1.0, mv);
}

bool G2Point::try_from(const KForm& sigma, G2Point& out) {
  if (sigma.k != 3) return false;
  MetricVolume mv;
  if (!try_metric_from_sigma(sigma.c.data(), 1.0, mv)) return false;
  out.sigma = sigma;
  out.m = mv.metric;
  out.dvol_coef = mv.dvol_coef;
  return true;
}

G2Point G2Point::from(const KForm& sigma) {
  G2Point p;
  if (!try_from(sigma, p)) throw NotPositiveError("G2Point: 3-form is not positive");
  return p;
}

Decomposition3 decompose3(const KForm& gamma, const G2Point& p) {
  Decomposition3 d;
  d.f0 = inner(gamma, p.sigma, p.m) / 7.0;
  const KForm sg = ext::hodge_star(gamma, p.m);
  d.f1 = ext::wedge_adjoint(p.sigma, sg, p.m);
  d.f1 *= -0.25;
  d.f3 = gamma - d.f0 * p.sigma - p.star(wedge(d.f1, p.sigma));
  return d;
}

KForm recompose3(const Decomposition3& d, const G2Point& p) {
  return d.f0 * p.sigma + p.star(wedge(d.f1, p.sigma)) + d.f3;
}

KForm project(Proj label, const KForm& gamma, const G2Point& p) {
  switch (label) {
    case Proj::p3_1: {
      if (gamma.k != 3) throw std::invalid_argument("project: need a 3-form");
      return (inner(gamma, p.sigma, p.m) / 7.0) * p.sigma;
    }
    case Proj::p3_7: {
      if (gamma.k != 3) throw std::invalid_argument("project: need a 3-form");
      const Decomposition3 d = decompose3(gamma, p);
      return p.star(wedge(d.f1, p.sigma));
    }
    case Proj::p3_27: {
      if (gamma.k != 3) throw std::invalid_argument("project: need a 3-form");
      return decompose3(gamma, p).f3;
    }
    case Proj::p2_7: {
      if (gamma.k != 2) throw std::invalid_argument("project: need a 2-form");
      KForm out = gamma;
      out *= 1.0 / 3.0;
      KForm s = p.star(wedge(gamma, p.sigma));
      s *= 1.0 / 3.0;
      return out + s;
    }
    case Proj::p2_14: {
      if (gamma.k != 2) throw std::invalid_argument("project: need a 2-form");
      KForm out = gamma;
      out *= 2.0 / 3.0;
      KForm s = p.star(wedge(gamma, p.sigma));
      s *= 1.0 / 3.0;
      return out - s;
    }
  }
  throw std::invalid_argument("project: unknown label");
}

KForm xi(const KForm& gamma2, const G2Point& p) {
  if (gamma2.k != 2) throw std::invalid_argument("xi: need a 2-form");
  return gamma2 + p.star(wedge(p.sigma, gamma2));
}

KForm hitchin_dual(const KForm& s3) {
  const G2Point p = G2Point::from(s3);
  return p.star_sigma();
}

KForm d_hitchin_dual(const G2Point& p, const KForm& theta3) {
  const Decomposition3 d = decompose3(theta3, p);
  KForm u = (4.0 / 3.0 * d.f0) * p.sigma;
  u += p.star(wedge(d.f1, p.sigma));
  u -= d.f3;
  return p.star(u);
}

}  // namespace g2flow::g2
