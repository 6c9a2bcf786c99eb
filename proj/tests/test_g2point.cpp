#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>

#include "g2flow/g2point.hpp"
#include "g2flow/rng.hpp"

using namespace g2flow;
using namespace g2flow::ext;
using namespace g2flow::g2;

namespace {

KForm random_form(int k, Rng rng, std::uint64_t stream, double scale = 1.0) {
  KForm f(k);
  for (int i = 0; i < f.n(); ++i)
    f[i] = scale * rng.symmetric(stream, static_cast<std::uint64_t>(i));
  return f;
}

// positive forms near the standard one
KForm random_positive(Rng rng, std::uint64_t stream, double amp = 0.25) {
  const KForm s = sigma_std() + random_form(3, rng, stream, amp);
  REQUIRE(is_positive(s));
  return s;
}

double max_abs(const KForm& a) {
  double m = 0.0;
  for (int i = 0; i < a.n(); ++i) m = std::max(m, std::abs(a[i]));
  return m;
}

double max_abs_diff(const KForm& a, const KForm& b) {
  double m = 0.0;
  for (int i = 0; i < a.n(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("standard structure: B = 6I, g = I, dvol = e^{1...7}") {
  std::array<double, 49> B{};
  sigma_bilinear(sigma_std().c.data(), B.data());
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j)
      CHECK(B[static_cast<std::size_t>(i * 7 + j)] == doctest::Approx(i == j ? 6.0 : 0.0).epsilon(1e-14));

  const MetricVolume mv = metric_from_sigma(sigma_std().c.data());
  CHECK(mv.dvol_coef == doctest::Approx(1.0).epsilon(1e-14));
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j)
      CHECK(mv.metric.g[static_cast<std::size_t>(i * 7 + j)] ==
            doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-13));
}

TEST_CASE("metric equivariance under pullback (oracle: g_{L*σ} = L*g)") {
  Rng rng{41};
  for (int trial = 0; trial < 6; ++trial) {
    std::array<double, 49> L{};
    for (int i = 0; i < 49; ++i)
      L[static_cast<std::size_t>(i)] = 0.35 * rng.symmetric(static_cast<std::uint64_t>(trial), static_cast<std::uint64_t>(i));
    for (int i = 0; i < 7; ++i) L[static_cast<std::size_t>(i * 7 + i)] += 1.0;
    const KForm s = pullback(L.data(), sigma_std());
    if (!is_positive(s)) continue;  // det L < 0 draws are skipped
    const MetricVolume mv = metric_from_sigma(s.c.data());
    // expected (L*g_e)(u,v) = (Lu)·(Lv) = (L^T L)_{uv}
    for (int i = 0; i < 7; ++i)
      for (int j = 0; j < 7; ++j) {
        double want = 0.0;
        for (int q = 0; q < 7; ++q)
          want += L[static_cast<std::size_t>(q * 7 + i)] * L[static_cast<std::size_t>(q * 7 + j)];
        CHECK(mv.metric.g[static_cast<std::size_t>(i * 7 + j)] == doctest::Approx(want).epsilon(5e-12));
      }
  }
}

TEST_CASE("homogeneity: c^3 σ gives c^2 g and c^7 dvol; dual scales as c^4") {
  const double c = 1.37;
  KForm s = sigma_std();
  s *= c * c * c;
  const MetricVolume mv = metric_from_sigma(s.c.data());
  for (int i = 0; i < 7; ++i)
    CHECK(mv.metric.g[static_cast<std::size_t>(i * 7 + i)] == doctest::Approx(c * c).epsilon(1e-12));
  CHECK(mv.dvol_coef == doctest::Approx(std::pow(c, 7.0)).epsilon(1e-12));

  const KForm hd = hitchin_dual(s);
  const KForm want = std::pow(c, 4.0) * hitchin_dual(sigma_std());
  CHECK(max_abs_diff(hd, want) <= 1e-12 * max_abs(want));
}

TEST_CASE("positivity test") {
  CHECK(is_positive(sigma_std()));
  KForm neg = sigma_std();
  neg *= -1.0;
  CHECK_FALSE(is_positive(neg));
  const KForm nudged = sigma_std() + 0.01 * KForm::basis(3, {0, 1, 2});
  CHECK(is_positive(nudged));
  CHECK_THROWS_AS(metric_from_sigma(neg.c.data()), NotPositiveError);
  const KForm zero(3);
  CHECK_FALSE(is_positive(zero));
}

TEST_CASE("projection pinned values") {
  const G2Point p = G2Point::from(sigma_std());

  const KForm p31 = project(Proj::p3_1, sigma_std(), p);
  CHECK(max_abs_diff(p31, sigma_std()) <= 1e-13);

  // π²₇(e^{12}) = (1/3)(e^{12} − e^{47} − e^{56})
  const KForm q = project(Proj::p2_7, KForm::basis(2, {0, 1}), p);
  CHECK(q.coeff({0, 1}) == doctest::Approx(1.0 / 3.0));
  CHECK(q.coeff({3, 6}) == doctest::Approx(-1.0 / 3.0));
  CHECK(q.coeff({4, 5}) == doctest::Approx(-1.0 / 3.0));
  double other = 0.0;
  for (int i = 0; i < q.n(); ++i) other += std::abs(q[i]);
  CHECK(other == doctest::Approx(1.0).epsilon(1e-13));

  Rng rng{43};
  const KForm alpha = random_form(1, rng, 1);
  const KForm w = p.star(wedge(alpha, sigma_std()));
  CHECK(max_abs_diff(project(Proj::p3_7, w, p), w) <= 1e-12 * (1.0 + max_abs(w)));
  CHECK(max_abs(project(Proj::p3_1, w, p)) <= 1e-12);
}

TEST_CASE("projection completeness, idempotence, orthogonality (random backgrounds)") {
  Rng rng{47};
  for (int trial = 0; trial < 5; ++trial) {
    const G2Point p = G2Point::from(random_positive(rng, 100 + static_cast<std::uint64_t>(trial)));
    for (int rep = 0; rep < 40; ++rep) {
      const KForm g3 = random_form(3, rng, 200 + static_cast<std::uint64_t>(40 * trial + rep));
      const KForm a = project(Proj::p3_1, g3, p);
      const KForm b = project(Proj::p3_7, g3, p);
      const KForm c = project(Proj::p3_27, g3, p);
      CHECK(max_abs_diff(a + b + c, g3) <= 1e-11 * (1.0 + max_abs(g3)));
      CHECK(std::abs(inner(a, b, p.m)) <= 1e-11 * (1.0 + norm(a, p.m) * norm(b, p.m)));
      CHECK(std::abs(inner(a, c, p.m)) <= 1e-11 * (1.0 + norm(a, p.m) * norm(c, p.m)));
      CHECK(std::abs(inner(b, c, p.m)) <= 1e-11 * (1.0 + norm(b, p.m) * norm(c, p.m)));
      CHECK(max_abs_diff(project(Proj::p3_7, b, p), b) <= 1e-11 * (1.0 + max_abs(b)));

      const KForm g2f = random_form(2, rng, 300 + static_cast<std::uint64_t>(40 * trial + rep));
      const KForm u = project(Proj::p2_7, g2f, p);
      const KForm v = project(Proj::p2_14, g2f, p);
      CHECK(max_abs_diff(u + v, g2f) <= 1e-11 * (1.0 + max_abs(g2f)));
      CHECK(std::abs(inner(u, v, p.m)) <= 1e-11 * (1.0 + norm(u, p.m) * norm(v, p.m)));
      CHECK(max_abs_diff(project(Proj::p2_7, u, p), u) <= 1e-11 * (1.0 + max_abs(u)));

      // eigen-characterizations: u∧σ = 2*u, v∧σ = −*v
      const KForm us = wedge(u, p.sigma);
      KForm su = p.star(u);
      su *= 2.0;
      CHECK(max_abs_diff(us, su) <= 1e-11 * (1.0 + max_abs(us)));
      const KForm vs = wedge(v, p.sigma);
      KForm sv = p.star(v);
      sv *= -1.0;
      CHECK(max_abs_diff(vs, sv) <= 1e-11 * (1.0 + max_abs(vs)));
    }
  }
}

TEST_CASE("product lemma scalars at random positive sigma") {
  Rng rng{53};
  for (int trial = 0; trial < 10; ++trial) {
    const G2Point p = G2Point::from(random_positive(rng, 400 + static_cast<std::uint64_t>(trial)));
    const KForm a1 = random_form(1, rng, 500 + static_cast<std::uint64_t>(trial));
    const KForm a2 = random_form(1, rng, 600 + static_cast<std::uint64_t>(trial));
    const double base = inner(a1, a2, p.m);
    const double w4 = inner(wedge(a1, p.sigma), wedge(a2, p.sigma), p.m);
    CHECK(std::abs(w4 - 4.0 * base) <= 1e-10 * (1.0 + std::abs(w4)));
    const KForm ss = p.star_sigma();
    const double w3 = inner(wedge(a1, ss), wedge(a2, ss), p.m);
    CHECK(std::abs(w3 - 3.0 * base) <= 1e-10 * (1.0 + std::abs(w3)));
  }
}

TEST_CASE("decompose3 recovers the pieces") {
  Rng rng{59};
  for (int trial = 0; trial < 5; ++trial) {
    const G2Point p = G2Point::from(random_positive(rng, 700 + static_cast<std::uint64_t>(trial)));

    const Decomposition3 d0 = decompose3(p.sigma, p);
    CHECK(d0.f0 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(max_abs(d0.f1) <= 1e-12);
    CHECK(max_abs(d0.f3) <= 1e-11);

    const KForm alpha = random_form(1, rng, 800 + static_cast<std::uint64_t>(trial));
    const Decomposition3 d1 = decompose3(p.star(wedge(alpha, p.sigma)), p);
    CHECK(std::abs(d1.f0) <= 1e-12);
    CHECK(max_abs_diff(d1.f1, alpha) <= 1e-11 * (1.0 + max_abs(alpha)));
    CHECK(max_abs(d1.f3) <= 1e-10);

    const KForm g27 = project(Proj::p3_27, random_form(3, rng, 900 + static_cast<std::uint64_t>(trial)), p);
    const Decomposition3 d2 = decompose3(g27, p);
    CHECK(std::abs(d2.f0) <= 1e-11);
    CHECK(max_abs(d2.f1) <= 1e-11);
    CHECK(max_abs_diff(d2.f3, g27) <= 1e-11 * (1.0 + max_abs(g27)));

    // f3 orthogonal to sigma and to every *(basis^i ∧ sigma); reassembly exact
    const KForm g3 = random_form(3, rng, 1000 + static_cast<std::uint64_t>(trial));
    const Decomposition3 d = decompose3(g3, p);
    CHECK(std::abs(inner(d.f3, p.sigma, p.m)) <= 1e-10 * (1.0 + norm(d.f3, p.m)));
    for (int i = 0; i < 7; ++i) {
      const KForm w = p.star(wedge(KForm::basis(1, {i}), p.sigma));
      CHECK(std::abs(inner(d.f3, w, p.m)) <= 1e-10 * (1.0 + norm(d.f3, p.m) * norm(w, p.m)));
    }
    CHECK(max_abs_diff(recompose3(d, p), g3) <= 1e-12 * (1.0 + max_abs(g3)));
  }
}

TEST_CASE("xi equals 3 π²₇ and kills the 14-component") {
  Rng rng{61};
  const G2Point p0 = G2Point::from(sigma_std());
  const KForm e12 = KForm::basis(2, {0, 1});
  const KForm x = xi(e12, p0);
  // e^{12} + *(σ∧e^{12}) = e^{12} − e^{47} − e^{56}
  CHECK(x.coeff({0, 1}) == doctest::Approx(1.0));
  CHECK(x.coeff({3, 6}) == doctest::Approx(-1.0));
  CHECK(x.coeff({4, 5}) == doctest::Approx(-1.0));

  for (int trial = 0; trial < 5; ++trial) {
    const G2Point p = G2Point::from(random_positive(rng, 1100 + static_cast<std::uint64_t>(trial)));
    const KForm g = random_form(2, rng, 1200 + static_cast<std::uint64_t>(trial));
    KForm three_p27 = project(Proj::p2_7, g, p);
    three_p27 *= 3.0;
    CHECK(max_abs_diff(xi(g, p), three_p27) <= 1e-11 * (1.0 + max_abs(three_p27)));
    CHECK(max_abs(xi(project(Proj::p2_14, g, p), p)) <= 1e-10 * (1.0 + max_abs(g)));
    KForm g7 = project(Proj::p2_7, g, p);
    KForm want = g7;
    want *= 3.0;
    CHECK(max_abs_diff(xi(g7, p), want) <= 1e-10 * (1.0 + max_abs(want)));
  }
}

TEST_CASE("hitchin dual basics and equivariance") {
  const Metric7 id = Metric7::identity();
  CHECK(max_abs_diff(hitchin_dual(sigma_std()), hodge_star(sigma_std(), id)) <= 1e-13);

  // equivariance under pullback with det L > 0: (L*σ)-dual = L*(σ-dual)
  Rng rng{67};
  for (int trial = 0; trial < 5; ++trial) {
    std::array<double, 49> L{};
    for (int i = 0; i < 49; ++i)
      L[static_cast<std::size_t>(i)] = 0.3 * rng.symmetric(1300 + static_cast<std::uint64_t>(trial), static_cast<std::uint64_t>(i));
    for (int i = 0; i < 7; ++i) L[static_cast<std::size_t>(i * 7 + i)] += 1.0;
    const KForm s = pullback(L.data(), sigma_std());
    if (!is_positive(s)) continue;
    const KForm got = hitchin_dual(s);
    const KForm want = pullback(L.data(), hitchin_dual(sigma_std()));
    CHECK(max_abs_diff(got, want) <= 1e-10 * (1.0 + max_abs(want)));
  }
}

TEST_CASE("d_hitchin_dual: special directions and finite differences") {
  Rng rng{71};
  const G2Point p0 = G2Point::from(sigma_std());

  KForm want = p0.star_sigma();
  want *= 4.0 / 3.0;
  CHECK(max_abs_diff(d_hitchin_dual(p0, sigma_std()), want) <= 1e-12);

  const KForm g27 = project(Proj::p3_27, random_form(3, rng, 1400), p0);
  KForm w27 = p0.star(g27);
  w27 *= -1.0;
  CHECK(max_abs_diff(d_hitchin_dual(p0, g27), w27) <= 1e-11 * (1.0 + max_abs(w27)));

  // oracle: central finite difference of hitchin_dual, 50 random (σ, θ)
  const double h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const KForm s = random_positive(rng, 1500 + static_cast<std::uint64_t>(trial), 0.15);
    const G2Point p = G2Point::from(s);
    const KForm theta = random_form(3, rng, 1600 + static_cast<std::uint64_t>(trial));
    KForm sp = s;
    KForm sm = s;
    for (int i = 0; i < 35; ++i) {
      sp[i] += h * theta[i];
      sm[i] -= h * theta[i];
    }
    const KForm fd = (1.0 / (2.0 * h)) * (hitchin_dual(sp) - hitchin_dual(sm));
    const KForm an = d_hitchin_dual(p, theta);
    const double rel = max_abs_diff(fd, an) / (1.0 + max_abs(an));
    worst = std::max(worst, rel);
  }
  CHECK(worst <= 1e-6);
}
