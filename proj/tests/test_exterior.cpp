#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "g2flow/exterior.hpp"
#include "g2flow/rng.hpp"

using namespace g2flow;
using namespace g2flow::ext;

namespace {

KForm random_form(int k, Rng rng, std::uint64_t stream) {
  KForm f(k);
  for (int i = 0; i < f.n(); ++i)
    f[i] = rng.symmetric(stream, static_cast<std::uint64_t>(i));
  return f;
}

double max_abs_diff(const KForm& a, const KForm& b) {
  double m = 0.0;
  for (int i = 0; i < a.n(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_abs(const KForm& a) {
  double m = 0.0;
  for (int i = 0; i < a.n(); ++i) m = std::max(m, std::abs(a[i]));
  return m;
}

Metric7 random_spd(Rng rng, std::uint64_t stream) {
  // g = A^T A + 0.5 I keeps conditioning moderate
  std::array<double, 49> a{}, g{};
  for (int i = 0; i < 49; ++i) a[i] = 0.5 * rng.symmetric(stream, static_cast<std::uint64_t>(i));
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j) {
      double s = (i == j) ? 0.5 : 0.0;
      for (int q = 0; q < 7; ++q) s += a[q * 7 + i] * a[q * 7 + j];
      g[i * 7 + j] = s;
    }
  return Metric7::from(g.data());
}

}  // namespace

TEST_CASE("basis bookkeeping is a bijection") {
  for (int k = 0; k <= 7; ++k) {
    CHECK(comp_count(k) == comp_count(7 - k));
    for (int r = 0; r < comp_count(k); ++r) {
      int idx[7];
      mi_unrank(k, r, idx);
      for (int i = 1; i < k; ++i) CHECK(idx[i - 1] < idx[i]);
      CHECK(mi_rank(k, idx) == r);
    }
  }
  // lex order pinned: first two-index element is e^{12}, last is e^{67}
  int idx[2];
  mi_unrank(2, 0, idx);
  CHECK(idx[0] == 0);
  CHECK(idx[1] == 1);
  mi_unrank(2, 20, idx);
  CHECK(idx[0] == 5);
  CHECK(idx[1] == 6);
}

TEST_CASE("wedge basis cases") {
  const KForm e1 = KForm::basis(1, {0});
  const KForm e2 = KForm::basis(1, {1});
  const KForm w = wedge(e1, e2);
  CHECK(w.coeff({0, 1}) == doctest::Approx(1.0));
  CHECK(max_abs(wedge(e1, e1)) == 0.0);
}

TEST_CASE("sigma wedge e1 reproduces the adjoint-lemma expansion") {
  // sigma_std ∧ e^1 = −e^{1246} + e^{1257} + e^{1347} + e^{1356}
  const KForm w = wedge(sigma_std(), KForm::basis(1, {0}));
  CHECK(w.coeff({0, 1, 3, 5}) == doctest::Approx(-1.0));
  CHECK(w.coeff({0, 1, 4, 6}) == doctest::Approx(1.0));
  CHECK(w.coeff({0, 2, 3, 6}) == doctest::Approx(1.0));
  CHECK(w.coeff({0, 2, 4, 5}) == doctest::Approx(1.0));
  double sq = 0.0;
  for (int i = 0; i < w.n(); ++i) sq += w[i] * w[i];
  CHECK(sq == doctest::Approx(4.0));
}

TEST_CASE("wedge is graded-anticommutative and associative") {
  Rng rng{7};
  for (int ka = 0; ka <= 3; ++ka)
    for (int kb = 0; ka + kb <= 5; ++kb) {
      const KForm a = random_form(ka, rng, 10 * static_cast<std::uint64_t>(ka) + 1);
      const KForm b = random_form(kb, rng, 10 * static_cast<std::uint64_t>(kb) + 2);
      KForm ab = wedge(a, b);
      KForm ba = wedge(b, a);
      const double sgn = (ka * kb) % 2 == 0 ? 1.0 : -1.0;
      ba *= sgn;
      CHECK(max_abs_diff(ab, ba) <= 1e-13 * (1.0 + max_abs(ab)));
      for (int kc = 0; ka + kb + kc <= 7; ++kc) {
        const KForm c = random_form(kc, rng, 10 * static_cast<std::uint64_t>(kc) + 3);
        const KForm l = wedge(wedge(a, b), c);
        const KForm r = wedge(a, wedge(b, c));
        CHECK(max_abs_diff(l, r) <= 1e-13 * (1.0 + max_abs(l)));
      }
    }
}

TEST_CASE("interior basics and antiderivation") {
  const std::array<double, 7> e1v = {1, 0, 0, 0, 0, 0, 0};
  const std::array<double, 7> e7v = {0, 0, 0, 0, 0, 0, 1};

  // e_1 ⌟ sigma = e^{23} + e^{45} + e^{67}
  const KForm i1 = interior(e1v, sigma_std());
  CHECK(i1.coeff({1, 2}) == doctest::Approx(1.0));
  CHECK(i1.coeff({3, 4}) == doctest::Approx(1.0));
  CHECK(i1.coeff({5, 6}) == doctest::Approx(1.0));
  double sq = 0.0;
  for (int i = 0; i < i1.n(); ++i) sq += i1[i] * i1[i];
  CHECK(sq == doctest::Approx(3.0));

  CHECK(interior(e1v, KForm::basis(1, {0}))[0] == doctest::Approx(1.0));
  CHECK(max_abs(interior(e7v, KForm::basis(2, {0, 1}))) == 0.0);

  Rng rng{3};
  for (int ka = 1; ka <= 4; ++ka)
    for (int kb = 1; ka + kb <= 6; ++kb) {
      const KForm a = random_form(ka, rng, 40 + static_cast<std::uint64_t>(ka));
      const KForm b = random_form(kb, rng, 50 + static_cast<std::uint64_t>(kb));
      std::array<double, 7> v{};
      for (int i = 0; i < 7; ++i) v[static_cast<std::size_t>(i)] = rng.symmetric(60, static_cast<std::uint64_t>(i));
      const KForm lhs = interior(v, wedge(a, b));
      KForm rhs = wedge(interior(v, a), b);
      KForm t = wedge(a, interior(v, b));
      t *= (ka % 2 == 0) ? 1.0 : -1.0;
      rhs += t;
      CHECK(max_abs_diff(lhs, rhs) <= 1e-13 * (1.0 + max_abs(lhs)));
      // double contraction vanishes
      CHECK(max_abs(interior(v, interior(v, wedge(a, b)))) <= 1e-13);
    }
}

TEST_CASE("euclidean inner values from the product lemma") {
  const Metric7 id = Metric7::identity();
  CHECK(inner(sigma_std(), sigma_std(), id) == doctest::Approx(7.0));

  const KForm e1 = KForm::basis(1, {0});
  const KForm e2 = KForm::basis(1, {1});
  const KForm s1 = wedge(e1, sigma_std());
  const KForm s2 = wedge(e2, sigma_std());
  CHECK(inner(s1, s1, id) == doctest::Approx(4.0));
  CHECK(inner(s1, s2, id) == doctest::Approx(0.0));

  const KForm star_sigma = hodge_star(sigma_std(), id);
  const KForm t1 = wedge(e1, star_sigma);
  const KForm t2 = wedge(e2, star_sigma);
  CHECK(inner(t1, t1, id) == doctest::Approx(3.0));
  CHECK(inner(t1, t2, id) == doctest::Approx(0.0));
}

TEST_CASE("star of sigma (computed star is authoritative; sigma∧*sigma = 7 dvol)") {
  const Metric7 id = Metric7::identity();
  const KForm ss = hodge_star(sigma_std(), id);
  CHECK(ss.coeff({3, 4, 5, 6}) == doctest::Approx(1.0));   // e^{4567}
  CHECK(ss.coeff({1, 2, 5, 6}) == doctest::Approx(1.0));   // e^{2367}
  CHECK(ss.coeff({1, 2, 3, 4}) == doctest::Approx(1.0));   // e^{2345}
  CHECK(ss.coeff({0, 2, 4, 6}) == doctest::Approx(1.0));   // e^{1357}
  CHECK(ss.coeff({0, 2, 3, 5}) == doctest::Approx(-1.0));  // −e^{1346}
  CHECK(ss.coeff({0, 1, 4, 5}) == doctest::Approx(-1.0));  // −e^{1256}
  CHECK(ss.coeff({0, 1, 3, 6}) == doctest::Approx(-1.0));  // −e^{1247}
  const KForm top = wedge(sigma_std(), ss);
  CHECK(top[0] == doctest::Approx(7.0));

  KForm one(0);
  one[0] = 1.0;
  const KForm vol = hodge_star(one, id);
  CHECK(vol[0] == doctest::Approx(1.0));
}

TEST_CASE("star defining relation and involution, random metrics") {
  Rng rng{11};
  for (int trial = 0; trial < 8; ++trial) {
    const Metric7 m = trial == 0 ? Metric7::identity() : random_spd(rng, 100 + static_cast<std::uint64_t>(trial));
    KForm one(0);
    one[0] = 1.0;
    const KForm dvol = hodge_star(one, m);
    for (int k = 0; k <= 7; ++k) {
      const KForm a = random_form(k, rng, 200 + static_cast<std::uint64_t>(8 * trial + k));
      const KForm b = random_form(k, rng, 300 + static_cast<std::uint64_t>(8 * trial + k));
      const KForm sa = hodge_star(a, m);
      // b ∧ *a = <b,a> dvol
      const KForm lhs = wedge(b, sa);
      const double want = inner(b, a, m) * dvol[0];
      CHECK(std::abs(lhs[0] - want) <= 1e-12 * (1.0 + std::abs(want)));
      // ** = id on every degree in dimension 7
      const KForm ssa = hodge_star(sa, m);
      CHECK(max_abs_diff(ssa, a) <= 1e-13 * (1.0 + max_abs(a)));
    }
  }
}

TEST_CASE("star via Cholesky pullback agrees with production star") {
  // independent oracle: orthonormalize with A = L^T, pull back to the
  // Euclidean star, pull forward
  Rng rng{13};
  for (int trial = 0; trial < 5; ++trial) {
    const Metric7 m = random_spd(rng, 400 + static_cast<std::uint64_t>(trial));
    std::array<double, 49> A{}, Ainv{};
    for (int i = 0; i < 7; ++i)
      for (int j = 0; j < 7; ++j) {
        A[static_cast<std::size_t>(i * 7 + j)] = m.chol[static_cast<std::size_t>(j * 7 + i)];
        Ainv[static_cast<std::size_t>(i * 7 + j)] = m.chol_inv[static_cast<std::size_t>(j * 7 + i)];
      }
    for (int k = 0; k <= 7; ++k) {
      const KForm a = random_form(k, rng, 500 + static_cast<std::uint64_t>(k));
      const KForm beta = pullback(Ainv.data(), a);
      const KForm gamma = hodge_star(beta, Metric7::identity());
      const KForm oracle = pullback(A.data(), gamma);
      const KForm got = hodge_star(a, m);
      CHECK(max_abs_diff(oracle, got) <= 1e-11 * (1.0 + max_abs(oracle)));
    }
  }
}

TEST_CASE("orientation flip negates the star") {
  Rng rng{17};
  const Metric7 m = random_spd(rng, 600);
  const KForm a = random_form(3, rng, 601);
  const KForm p = hodge_star(a, m, +1);
  KForm n = hodge_star(a, m, -1);
  n *= -1.0;
  CHECK(max_abs_diff(p, n) == 0.0);
}

TEST_CASE("wedge_adjoint: lemma coefficients and brute-force matrix oracle") {
  const Metric7 id = Metric7::identity();

  // coefficient pattern from the adjoint lemma: <r, e^1> = −a_{1246} + a_{1257} + a_{1347} + a_{1356}
  Rng rng{19};
  KForm c = random_form(4, rng, 700);
  const KForm r = wedge_adjoint(sigma_std(), c, id);
  const double want = -c.coeff({0, 1, 3, 5}) + c.coeff({0, 1, 4, 6}) +
                      c.coeff({0, 2, 3, 6}) + c.coeff({0, 2, 4, 5});
  CHECK(r[0] == doctest::Approx(want));

  // s = sigma, c = *sigma -> 0
  const KForm z = wedge_adjoint(sigma_std(), hodge_star(sigma_std(), id), id);
  CHECK(max_abs(z) <= 1e-13);

  // s = 0 -> 0
  const KForm s0(3);
  CHECK(max_abs(wedge_adjoint(s0, c, id)) == 0.0);

  // brute force: r = G1^{-1} W^T G4 c with W the 7->35 wedge matrix,
  // checked against the defining relation on all 7 basis covectors
  for (int trial = 0; trial < 4; ++trial) {
    const Metric7 m = trial == 0 ? id : random_spd(rng, 710 + static_cast<std::uint64_t>(trial));
    const KForm s = random_form(3, rng, 720 + static_cast<std::uint64_t>(trial));
    c = random_form(4, rng, 730 + static_cast<std::uint64_t>(trial));
    const KForm got = wedge_adjoint(s, c, m);
    for (int i = 0; i < 7; ++i) {
      const KForm alpha = KForm::basis(1, {i});
      const double lhs = inner(got, alpha, m);
      const double rhs = inner(wedge(s, alpha), c, m);
      CHECK(std::abs(lhs - rhs) <= 1e-12 * (1.0 + std::abs(rhs)));
    }
  }
}

TEST_CASE("pullback is functorial and matches scaling") {
  Rng rng{23};
  std::array<double, 49> M{};
  for (int i = 0; i < 49; ++i) M[static_cast<std::size_t>(i)] = rng.symmetric(800, static_cast<std::uint64_t>(i));
  for (int i = 0; i < 7; ++i) M[static_cast<std::size_t>(i * 7 + i)] += 2.0;
  const KForm a = random_form(2, rng, 801);
  const KForm b = random_form(3, rng, 802);
  // M*(a ∧ b) = M*a ∧ M*b
  const KForm l = pullback(M.data(), wedge(a, b));
  const KForm r = wedge(pullback(M.data(), a), pullback(M.data(), b));
  CHECK(max_abs_diff(l, r) <= 1e-11 * (1.0 + max_abs(l)));

  std::array<double, 49> S{};
  for (int i = 0; i < 7; ++i) S[static_cast<std::size_t>(i * 7 + i)] = 2.0;
  const KForm sa = pullback(S.data(), a);
  for (int i = 0; i < a.n(); ++i) CHECK(sa[i] == doctest::Approx(4.0 * a[i]));
}

TEST_CASE("degree guards") {
  const KForm a = KForm::basis(4, {0, 1, 2, 3});
  const KForm b = KForm::basis(4, {0, 1, 2, 4});
  CHECK_THROWS_AS((void)wedge(a, b), std::invalid_argument);
  const std::array<double, 7> v = {1, 0, 0, 0, 0, 0, 0};
  KForm f0(0);
  f0[0] = 1.0;
  CHECK_THROWS_AS((void)interior(v, f0), std::invalid_argument);
  CHECK_THROWS_AS((void)inner(a, sigma_std(), Metric7::identity()), std::invalid_argument);
}
