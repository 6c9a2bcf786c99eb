#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <numbers>

#include "g2flow/lattice.hpp"
#include "g2flow/rng.hpp"

using namespace g2flow;
using namespace g2flow::ext;
using namespace g2flow::lat;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Grid grid3(int n = 16, Scheme sc = Scheme::spectral, double L = kTwoPi) {
  Grid g;
  g.m = 3;
  g.n = n;
  g.L = L;
  g.scheme = sc;
  return g;
}

double field_max(const FieldK& f) {
  double m = 0.0;
  for (double x : f.v) m = std::max(m, std::abs(x));
  return m;
}

double field_max_diff(const FieldK& a, const FieldK& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
  return m;
}

// band-limited random field: cos/sin waves with |k_a| <= kmax per axis
FieldK random_band_limited(const Grid& g, int degree, Rng rng, std::uint64_t stream,
                           int kmax = 2) {
  FieldK f(g, degree);
  const int nc = f.ncomp();
  std::vector<std::array<int, 3>> modes;
  for (int k0 = -kmax; k0 <= kmax; ++k0)
    for (int k1 = (g.m > 1 ? -kmax : 0); k1 <= (g.m > 1 ? kmax : 0); ++k1)
      for (int k2 = (g.m > 2 ? -kmax : 0); k2 <= (g.m > 2 ? kmax : 0); ++k2)
        modes.push_back({k0, k1, k2});
  std::uint64_t ctr = 0;
  std::vector<double> amp_cos(modes.size() * static_cast<std::size_t>(nc));
  std::vector<double> amp_sin(modes.size() * static_cast<std::size_t>(nc));
  for (std::size_t mi = 0; mi < modes.size(); ++mi)
    for (int c = 0; c < nc; ++c) {
      amp_cos[mi * static_cast<std::size_t>(nc) + static_cast<std::size_t>(c)] = rng.symmetric(stream, ctr++);
      amp_sin[mi * static_cast<std::size_t>(nc) + static_cast<std::size_t>(c)] = rng.symmetric(stream, ctr++);
    }
  const double unit = kTwoPi / g.L;
  for (std::size_t s = 0; s < g.sites(); ++s) {
    double xs[3] = {g.x(s, 0), g.m > 1 ? g.x(s, 1) : 0.0, g.m > 2 ? g.x(s, 2) : 0.0};
    double* p = f.site(s);
    for (std::size_t mi = 0; mi < modes.size(); ++mi) {
      const double ph = unit * (modes[mi][0] * xs[0] + modes[mi][1] * xs[1] + modes[mi][2] * xs[2]);
      const double cph = std::cos(ph), sph = std::sin(ph);
      for (int c = 0; c < nc; ++c)
        p[c] += amp_cos[mi * static_cast<std::size_t>(nc) + static_cast<std::size_t>(c)] * cph +
                amp_sin[mi * static_cast<std::size_t>(nc) + static_cast<std::size_t>(c)] * sph;
    }
  }
  const double scale = 1.0 / std::max(1.0, field_max(f));
  for (double& x : f.v) x *= scale;
  return f;
}

}  // namespace

TEST_CASE("grid bookkeeping") {
  Grid g = grid3(8);
  g.validate();
  CHECK(g.sites() == 512);
  CHECK(g.h() == doctest::Approx(kTwoPi / 8));
  int ic[3];
  g.site_coords(8 + 2 * 64 + 5, ic);
  CHECK(ic[0] == 5);
  CHECK(ic[1] == 1);
  CHECK(ic[2] == 2);
  CHECK(g.coords_site(ic) == 8 + 2 * 64 + 5);
  Grid bad = g;
  bad.n = 7;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("d: constant fields, analytic derivative, cochain property") {
  for (Scheme sc : {Scheme::spectral, Scheme::forward_diff}) {
    const Grid g = grid3(16, sc);
    const FieldK cf = constant_field(g, sigma_std());
    CHECK(field_max(d(cf)) <= 1e-14);

    // f = sin(x1) e^2  ->  df = cos(x1) e^{12}
    FieldK f(g, 1);
    for (std::size_t s = 0; s < g.sites(); ++s) f.site(s)[1] = std::sin(g.x(s, 0));
    const FieldK df = d(f);
    double worst = 0.0;
    for (std::size_t s = 0; s < g.sites(); ++s) {
      const KForm w = df.at(s);
      const double want01 = (sc == Scheme::spectral)
                                ? std::cos(g.x(s, 0))
                                : (std::sin(g.x(s, 0) + g.h()) - std::sin(g.x(s, 0))) / g.h();
      worst = std::max(worst, std::abs(w.coeff({0, 1}) - want01));
    }
    if (sc == Scheme::spectral) CHECK(worst <= 1e-12);
    else CHECK(worst <= 1e-12);  // compared against its own stencil

    Rng rng{5};
    for (int k = 0; k <= 5; ++k) {
      const FieldK rf = random_band_limited(g, k, rng, 10 + static_cast<std::uint64_t>(k), 2);
      CHECK(field_max(d(d(rf))) <= 1e-12 * (1.0 + field_max(rf)));
    }
  }
}

TEST_CASE("spectral d is exact on resolved trig polynomials; fd is first order") {
  double err_fd_prev = 0.0;
  for (int n : {8, 16, 32}) {
    Grid gs = grid3(n, Scheme::spectral);
    FieldK f(gs, 1);
    for (std::size_t s = 0; s < gs.sites(); ++s) f.site(s)[1] = std::sin(gs.x(s, 0));
    const FieldK df = d(f);
    double worst = 0.0;
    for (std::size_t s = 0; s < gs.sites(); ++s)
      worst = std::max(worst, std::abs(df.at(s).coeff({0, 1}) - std::cos(gs.x(s, 0))));
    CHECK(worst <= 1e-12);

    Grid gf = grid3(n, Scheme::forward_diff);
    FieldK f2(gf, 1);
    for (std::size_t s = 0; s < gf.sites(); ++s) f2.site(s)[1] = std::sin(gf.x(s, 0));
    const FieldK df2 = d(f2);
    double worst2 = 0.0;
    for (std::size_t s = 0; s < gf.sites(); ++s)
      worst2 = std::max(worst2, std::abs(df2.at(s).coeff({0, 1}) - std::cos(gf.x(s, 0))));
    if (err_fd_prev > 0.0) {
      // halving h should roughly halve the error
      CHECK(worst2 <= 0.65 * err_fd_prev);
    }
    err_fd_prev = worst2;
    CHECK(worst2 <= 0.5);  // coarse sanity at n=8
  }
}

TEST_CASE("discrete Leibniz rule with de-aliasing margin") {
  const Grid g = grid3(16, Scheme::spectral);
  Rng rng{7};
  // bandwidth n/4 = 4 > 2 used here; product stays resolved
  const FieldK fa = random_band_limited(g, 0, rng, 20, 2);
  const FieldK al = random_band_limited(g, 2, rng, 21, 2);
  // f·α
  FieldK fal(g, 2);
  for (std::size_t s = 0; s < g.sites(); ++s) {
    const double fs = fa.site(s)[0];
    for (int c = 0; c < 21; ++c) fal.site(s)[c] = fs * al.site(s)[c];
  }
  const FieldK lhs = d(fal);
  // df ∧ α + f dα
  const FieldK dfa = d(fa);
  FieldK rhs = pointwise_wedge(dfa, al);
  const FieldK dal = d(al);
  for (std::size_t s = 0; s < g.sites(); ++s) {
    const double fs = fa.site(s)[0];
    for (int c = 0; c < 35; ++c) rhs.site(s)[c] += fs * dal.site(s)[c];
  }
  CHECK(field_max_diff(lhs, rhs) <= 1e-12 * (1.0 + field_max(lhs)));
}

TEST_CASE("codifferential: flat torsion-free, adjointness, degree signs") {
  const Grid g = grid3(12);
  const MetricField mf = MetricField::flat_field(g);

  const FieldK cf = constant_field(g, sigma_std());
  CHECK(field_max(codifferential(cf, mf)) <= 1e-13);

  Rng rng{9};
  for (int k = 1; k <= 4; ++k) {
    const FieldK alpha = random_band_limited(g, k - 1, rng, 30 + static_cast<std::uint64_t>(k), 2);
    const FieldK beta = random_band_limited(g, k, rng, 40 + static_cast<std::uint64_t>(k), 2);
    const double a = l2_inner(d(alpha), beta, mf);
    const double b = l2_inner(alpha, codifferential(beta, mf), mf);
    CHECK(std::abs(a - b) <= 1e-10 * (1.0 + std::abs(a) + std::abs(b)));
  }

  // degree-7 field: d* = -*d* on odd degrees
  const FieldK top = random_band_limited(g, 7, rng, 50, 2);
  const FieldK lhs = codifferential(top, mf);
  FieldK rhs = star_field(d(star_field(top, mf)), mf);
  for (double& x : rhs.v) x = -x;
  CHECK(field_max_diff(lhs, rhs) <= 1e-14);

  CHECK_THROWS_AS((void)codifferential(constant_field(g, KForm(0)), mf), std::invalid_argument);
}

TEST_CASE("hodge laplacian: symbol on the flat torus") {
  const Grid g = grid3(16);
  const MetricField mf = MetricField::flat_field(g);

  CHECK(field_max(hodge_laplacian(constant_field(g, sigma_std()), mf)) <= 1e-12);

  // sin(x1) e^{234} -> 1·sin(x1) e^{234} at L = 2π
  FieldK f(g, 3);
  const int comp = [] {
    int idx[3] = {1, 2, 3};
    return mi_rank(3, idx);
  }();
  for (std::size_t s = 0; s < g.sites(); ++s) f.site(s)[comp] = std::sin(g.x(s, 0));
  const FieldK lap = hodge_laplacian(f, mf);
  CHECK(field_max_diff(lap, f) <= 1e-11);

  // harmonic (constant) part is annihilated
  Rng rng{11};
  FieldK rf = random_band_limited(g, 2, rng, 60, 2);
  axpy(rf, 1.0, constant_field(g, KForm::basis(2, {0, 1})));
  const FieldK lap2 = hodge_laplacian(rf, mf);
  const KForm zm = zero_mode(lap2);
  double zmax = 0.0;
  for (int c = 0; c < zm.n(); ++c) zmax = std::max(zmax, std::abs(zm[c]));
  CHECK(zmax <= 1e-12);
}

TEST_CASE("L2 structure and norms") {
  const Grid g = grid3(8);
  const MetricField mf = MetricField::flat_field(g);

  const FieldK e123 = constant_field(g, KForm::basis(3, {0, 1, 2}));
  CHECK(l2_inner(e123, e123, mf) == doctest::Approx(std::pow(kTwoPi, 3)).epsilon(1e-13));

  FieldK su(g, 2);
  for (std::size_t s = 0; s < g.sites(); ++s) su.site(s)[0] = std::sin(g.x(s, 0));
  CHECK(l2_inner(su, su, mf) == doctest::Approx(0.5 * std::pow(kTwoPi, 3)).epsilon(1e-13));

  CHECK(c0_norm(FieldK(g, 2), mf) == 0.0);
  CHECK(c0_norm(su, mf) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(volume(mf) == doctest::Approx(std::pow(kTwoPi, 3)).epsilon(1e-13));
}

TEST_CASE("zero mode bookkeeping") {
  const Grid g = grid3(8);
  KForm u = KForm::basis(2, {0, 3});
  u *= 2.5;
  const FieldK cf = constant_field(g, u);
  const KForm z = zero_mode(cf);
  CHECK(z.coeff({0, 3}) == doctest::Approx(2.5));

  Rng rng{13};
  const FieldK rf = random_band_limited(g, 2, rng, 70, 2);
  const KForm zd = zero_mode(d(rf));
  double m = 0.0;
  for (int c = 0; c < zd.n(); ++c) m = std::max(m, std::abs(zd[c]));
  CHECK(m <= 1e-13);

  FieldK sf = constant_field(g, sigma_std());
  for (std::size_t s = 0; s < g.sites(); ++s) sf.site(s)[0] += 0.1 * std::sin(g.x(s, 0));
  const KForm zs = zero_mode(sf);
  for (int c = 0; c < 35; ++c) CHECK(zs[c] == doctest::Approx(sigma_std()[c]).epsilon(1e-13));

  subtract_zero_mode(sf);
  const KForm z2 = zero_mode(sf);
  double m2 = 0.0;
  for (int c = 0; c < z2.n(); ++c) m2 = std::max(m2, std::abs(z2[c]));
  CHECK(m2 <= 1e-14);
}

TEST_CASE("spectral gap enumeration") {
  CHECK(spectrum_lambda0(grid3(16)) == doctest::Approx(1.0));
  CHECK(spectrum_lambda0(grid3(16, Scheme::spectral, std::numbers::pi)) == doctest::Approx(4.0));
  Grid g1;
  g1.m = 1;
  g1.n = 8;
  g1.L = kTwoPi;
  CHECK(spectrum_lambda0(g1) == doctest::Approx(1.0));
}

TEST_CASE("mode_scale implements the exact heat semigroup") {
  const Grid g = grid3(8);
  FieldK f(g, 1);
  for (std::size_t s = 0; s < g.sites(); ++s)
    f.site(s)[2] = std::sin(g.x(s, 0)) + 0.5 * std::cos(2.0 * g.x(s, 1));
  const double t = 0.37;
  FieldK heat = f;
  mode_scale(heat, [&](double k2) { return std::exp(-k2 * t); });
  double worst = 0.0;
  for (std::size_t s = 0; s < g.sites(); ++s) {
    const double want = std::exp(-t) * std::sin(g.x(s, 0)) +
                        0.5 * std::exp(-4.0 * t) * std::cos(2.0 * g.x(s, 1));
    worst = std::max(worst, std::abs(heat.site(s)[2] - want));
  }
  CHECK(worst <= 1e-13);
}

TEST_CASE("metric field and covariant derivative compatibility") {
  const Grid g = grid3(12);
  Rng rng{17};
  FieldK sigma = constant_field(g, sigma_std());
  const FieldK pert = random_band_limited(g, 3, rng, 80, 2);
  axpy(sigma, 0.05, pert);
  const MetricField mf = metric_field(sigma);
  CHECK(max_eig_ginv_bound(mf) >= 1.0 / 1.5);

  const auto gam = christoffels(mf);

  // metric compatibility: ∂_a g_{ij} = Γ^d_{ai} g_{dj} + Γ^d_{aj} g_{id}
  std::vector<double> garr(g.sites() * 49);
  for (std::size_t s = 0; s < g.sites(); ++s)
    std::memcpy(garr.data() + s * 49, mf.metric(s).g.data(), 49 * sizeof(double));
  std::vector<double> dg(g.sites() * 49);
  axis_derivative(g, garr.data(), dg.data(), 49, 0);
  double worst = 0.0;
  for (std::size_t s = 0; s < g.sites(); s += 7) {
    const double* G = gam.data() + s * 343;
    const auto& met = mf.metric(s).g;
    for (int i = 0; i < 7; ++i)
      for (int j = 0; j < 7; ++j) {
        double rhs = 0.0;
        for (int dd = 0; dd < 7; ++dd)
          rhs += G[(dd * 7 + 0) * 7 + i] * met[static_cast<std::size_t>(dd * 7 + j)] +
                 G[(dd * 7 + 0) * 7 + j] * met[static_cast<std::size_t>(i * 7 + dd)];
        worst = std::max(worst, std::abs(dg[s * 49 + static_cast<std::size_t>(i * 7 + j)] - rhs));
      }
  }
  CHECK(worst <= 1e-12);

  // flat background: covariant derivative reduces to plain derivatives
  const MetricField flat = MetricField::flat_field(g);
  const auto gam0 = christoffels(flat);
  const FieldK rf = random_band_limited(g, 3, rng, 90, 2);
  const auto cov = covariant_derivative(rf, flat, gam0);
  std::vector<double> plain(rf.v.size());
  axis_derivative(g, rf.v.data(), plain.data(), 35, 1);
  double worst2 = 0.0;
  for (std::size_t s = 0; s < g.sites(); ++s)
    for (int c = 0; c < 35; ++c)
      worst2 = std::max(worst2, std::abs(cov[(s * 7 + 1) * 35 + static_cast<std::size_t>(c)] -
                                         plain[s * 35 + static_cast<std::size_t>(c)]));
  CHECK(worst2 <= 1e-12);
}

TEST_CASE("snapshot round trip") {
  const Grid g = grid3(8);
  Rng rng{19};
  const FieldK f = random_band_limited(g, 3, rng, 100, 2);
  const char* path = "snapshot_test.g2f";
  save_field(path, f);
  const FieldK back = load_field(path);
  CHECK(back.k == f.k);
  CHECK(back.grid == f.grid);
  CHECK(field_max_diff(f, back) == 0.0);
  std::remove(path);
}
