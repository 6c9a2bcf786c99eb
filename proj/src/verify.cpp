#include "g2flow/verify.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "g2flow/parallel.hpp"
#include "g2flow/rng.hpp"

namespace g2flow::verify {

using ext::KForm;
using flow::Decomp3Field;
using lat::MetricField;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double field_linf(const FieldK& f) {
  return par::max(f.grid.sites(), [&](std::size_t s) {
    const double* p = f.site(s);
    double m = 0.0;
    for (int c = 0; c < f.ncomp(); ++c) m = std::max(m, std::abs(p[c]));
    return m;
  });
}

double rel_residual(const FieldK& lhs, const FieldK& rhs) {
  FieldK diff = lhs - rhs;
  const double scale = std::max({field_linf(lhs), field_linf(rhs), 1e-30});
  return field_linf(diff) / scale;
}

// band-limited random field on low modes, peak-normalized
FieldK random_low_mode(const Grid& g, int degree, std::uint64_t seed, int kmax = 2) {
  Rng rng{seed};
  FieldK f(g, degree);
  const int nc = f.ncomp();
  std::vector<std::array<int, 3>> modes;
  for (int k0 = -kmax; k0 <= kmax; ++k0)
    for (int k1 = (g.m > 1 ? -kmax : 0); k1 <= (g.m > 1 ? kmax : 0); ++k1)
      for (int k2 = (g.m > 2 ? -kmax : 0); k2 <= (g.m > 2 ? kmax : 0); ++k2) {
        if (k0 == 0 && k1 == 0 && k2 == 0) continue;
        if (k0 < 0 || (k0 == 0 && k1 < 0) || (k0 == 0 && k1 == 0 && k2 < 0)) continue;
        modes.push_back({k0, k1, k2});
      }
  const double unit = kTwoPi / g.L;
  par::for_each(g.sites(), [&](std::size_t s) {
    const double xs[3] = {g.x(s, 0), g.m > 1 ? g.x(s, 1) : 0.0, g.m > 2 ? g.x(s, 2) : 0.0};
    double* p = f.site(s);
    for (std::size_t mi = 0; mi < modes.size(); ++mi) {
      const double ph = unit * (modes[mi][0] * xs[0] + modes[mi][1] * xs[1] + modes[mi][2] * xs[2]);
      const double cph = std::cos(ph), sph = std::sin(ph);
      for (int c = 0; c < nc; ++c)
        p[c] += rng.symmetric(2 * mi, static_cast<std::uint64_t>(c)) * cph +
                rng.symmetric(2 * mi + 1, static_cast<std::uint64_t>(c)) * sph;
    }
  });
  const double m = field_linf(f);
  if (m > 0.0)
    for (double& x : f.v) x /= m;
  return f;
}

// test fixture shared by the identity checks
struct Fixture {
  Background bg;
  MetricField mf;          // alias of bg.mf0
  FieldK tau;              // τ of the background
  FieldK star_tau;         // *τ, degree 5
  std::vector<double> gamma;  // Christoffels
  std::vector<double> nabla_sigma;  // (∇_a σ)_I per site

  explicit Fixture(const BatteryConfig& cfg) {
    FieldK sigma0 = lat::constant_field(cfg.grid, ext::sigma_std());
    if (cfg.amplitude > 0.0)
      lat::axpy(sigma0, cfg.amplitude,
                flow::random_exact_perturbation(cfg.grid, cfg.seed, 1, 2));
    bg = Background::from(sigma0);
    mf = bg.mf0;
    tau = bg.tau0;
    star_tau = lat::star_field(tau, mf);
    gamma = lat::christoffels(mf);
    nabla_sigma = lat::covariant_derivative(bg.sigma0, mf, gamma);
  }

  // Σ_i e^i ∧ *(α ∧ *∇_{e_i}σ), degree 3
  FieldK nabla_sigma_sum(const FieldK& alpha) const {
    const Grid& g = bg.sigma0.grid;
    FieldK out(g, 3);
    par::for_each(g.sites(), [&](std::size_t s) {
      const ext::Metric7& m7 = mf.metric(s);
      const double* al = alpha.site(s);
      double star_ns[35], a5[21], s2[21], acc[35];
      for (int c = 0; c < 35; ++c) acc[c] = 0.0;
      for (int i = 0; i < 7; ++i) {
        const double* ns = nabla_sigma.data() + (s * 7 + static_cast<std::size_t>(i)) * 35;
        ext::hodge_star(3, ns, star_ns, m7);
        ext::wedge(1, al, 4, star_ns, a5);
        ext::hodge_star(5, a5, s2, m7);
        // e^i ∧ s2
        for (const auto& t : ext::wedge_table(1, 2))
          if (t.ia == i) acc[t.iout] += t.sign * s2[t.ib];
      }
      double* dst = out.site(s);
      for (int c = 0; c < 35; ++c) dst[c] = acc[c];
    });
    return out;
  }

  // sitewise front contraction σ ⌐ κ for a 4-form field κ
  FieldK sigma_contract(const FieldK& kappa4) const {
    const Grid& g = bg.sigma0.grid;
    FieldK out(g, 1);
    par::for_each(g.sites(), [&](std::size_t s) {
      ext::wedge_adjoint(bg.sigma0.site(s), kappa4.site(s), mf.metric(s), out.site(s));
    });
    return out;
  }

  // *(α ∧ *τ), degree 1
  FieldK alpha_star_tau(const FieldK& alpha) const {
    return lat::star_field(lat::pointwise_wedge(alpha, star_tau), mf);
  }

  // ξ(γ) = γ + *(σ∧γ) on 2-form fields
  FieldK xi(const FieldK& two) const {
    FieldK out = two;
    lat::axpy(out, 1.0, lat::star_field(lat::pointwise_wedge(bg.sigma0, two), mf));
    return out;
  }

  // *(*σ ∧ *(α∧*τ)), the recurring low-order 2-form
  FieldK low_order_two(const FieldK& alpha) const {
    const FieldK one = alpha_star_tau(alpha);
    return lat::star_field(lat::pointwise_wedge(bg.star_sigma0, one), mf);
  }

  // pointwise scalar (α∧*σ)·(*τ)
  FieldK alpha_dot_tau(const FieldK& alpha) const {
    const Grid& g = bg.sigma0.grid;
    const FieldK a5 = lat::pointwise_wedge(alpha, bg.star_sigma0);
    FieldK out(g, 0);
    par::for_each(g.sites(), [&](std::size_t s) {
      out.site(s)[0] = ext::inner(5, a5.site(s), star_tau.site(s), mf.metric(s));
    });
    return out;
  }

  FieldK scalar_times_sigma(const FieldK& f0) const {
    const Grid& g = bg.sigma0.grid;
    FieldK out(g, 3);
    par::for_each(g.sites(), [&](std::size_t s) {
      const double c = f0.site(s)[0];
      const double* sig = bg.sigma0.site(s);
      double* dst = out.site(s);
      for (int i = 0; i < 35; ++i) dst[i] = c * sig[i];
    });
    return out;
  }
};

FieldK project_field(g2::Proj label, const FieldK& f, const Fixture& fx) {
  FieldK out(f.grid, f.k);
  par::for_each(f.grid.sites(), [&](std::size_t s) {
    g2::G2Point p;
    p.sigma = fx.bg.sigma0.at(s);
    p.m = fx.mf.metric(s);
    p.dvol_coef = fx.mf.dvol(s);
    out.set(s, g2::project(label, f.at(s), p));
  });
  return out;
}

}  // namespace

FieldK adapted_differential(Adapted which, const FieldK& f, const Background& bg) {
  switch (which) {
    case Adapted::d77: {
      if (f.k != 1) throw std::invalid_argument("adapted_differential: d77 needs a 1-form");
      return flow::d77_field(f, bg);
    }
    case Adapted::d714: {
      if (f.k != 1) throw std::invalid_argument("adapted_differential: d714 needs a 1-form");
      const FieldK df = lat::d(f);
      FieldK out(f.grid, 2);
      par::for_each(f.grid.sites(), [&](std::size_t s) {
        g2::G2Point p;
        p.sigma = bg.sigma0.at(s);
        p.m = bg.mf0.metric(s);
        p.dvol_coef = bg.mf0.dvol(s);
        out.set(s, g2::project(g2::Proj::p2_14, df.at(s), p));
      });
      return out;
    }
    case Adapted::d71: {
      if (f.k != 1) throw std::invalid_argument("adapted_differential: d71 needs a 1-form");
      return lat::codifferential(f, bg.mf0);
    }
    case Adapted::d17: {
      if (f.k != 0) throw std::invalid_argument("adapted_differential: d17 needs a function");
      return lat::d(f);
    }
    case Adapted::d727: {
      if (f.k != 1) throw std::invalid_argument("adapted_differential: d727 needs a 1-form");
      const FieldK inner3 =
          lat::d(lat::star_field(lat::pointwise_wedge(f, bg.star_sigma0), bg.mf0));
      FieldK out(f.grid, 3);
      par::for_each(f.grid.sites(), [&](std::size_t s) {
        g2::G2Point p;
        p.sigma = bg.sigma0.at(s);
        p.m = bg.mf0.metric(s);
        p.dvol_coef = bg.mf0.dvol(s);
        out.set(s, g2::project(g2::Proj::p3_27, inner3.at(s), p));
      });
      return out;
    }
    case Adapted::d1427: {
      if (f.k != 2) throw std::invalid_argument("adapted_differential: d1427 needs a 2-form");
      const FieldK df = lat::d(f);
      FieldK out(f.grid, 3);
      par::for_each(f.grid.sites(), [&](std::size_t s) {
        g2::G2Point p;
        p.sigma = bg.sigma0.at(s);
        p.m = bg.mf0.metric(s);
        p.dvol_coef = bg.mf0.dvol(s);
        out.set(s, g2::project(g2::Proj::p3_27, df.at(s), p));
      });
      return out;
    }
    case Adapted::d147: {
      if (f.k != 2) throw std::invalid_argument("adapted_differential: d147 needs a 2-form");
      // flat-L² adjoint of d714 = d*_flat ∘ (pointwise transpose of π²₁₄)
      FieldK pt(f.grid, 2);
      par::for_each(f.grid.sites(), [&](std::size_t s) {
        g2::G2Point p;
        p.sigma = bg.sigma0.at(s);
        p.m = bg.mf0.metric(s);
        p.dvol_coef = bg.mf0.dvol(s);
        // transpose of the pointwise projection matrix w.r.t. the flat
        // component pairing: apply π to each basis 2-form and transpose
        const double* src = f.site(s);
        double* dst = pt.site(s);
        for (int r = 0; r < 21; ++r) dst[r] = 0.0;
        for (int c = 0; c < 21; ++c) {
          KForm basis(2);
          basis[c] = 1.0;
          const KForm img = g2::project(g2::Proj::p2_14, basis, p);
          for (int r = 0; r < 21; ++r) dst[c] += img[r] * src[r];
        }
      });
      return lat::codifferential(pt, MetricField::flat_field(f.grid));
    }
  }
  throw std::invalid_argument("adapted_differential: unknown label");
}

const std::vector<std::string>& identity_names() {
  static const std::vector<std::string> names = {
      "first_order_split", "first_order_xi",  "h_plus_codiff",      "hodge3_via_h",
      "coclosed_two7",     "dstar_seven_decomp", "hodge1_adapted",  "gauge_transfer",
  };
  return names;
}

IdentityReport check_identity(const std::string& name, const BatteryConfig& cfg) {
  cfg.grid.validate();
  const Fixture fx(cfg);
  const Grid& g = cfg.grid;
  const MetricField& mf = fx.mf;
  const Background& bg = fx.bg;

  FieldK lhs, rhs;

  if (name == "first_order_split") {
    // dα = ⅓*(d⁷₇α ∧ *σ) + d⁷₁₄α + ⅓*(*σ ∧ *(α∧*τ))
    const FieldK alpha = random_low_mode(g, 1, cfg.seed + 11);
    lhs = lat::d(alpha);
    const FieldK d77a = adapted_differential(Adapted::d77, alpha, bg);
    rhs = lat::star_field(lat::pointwise_wedge(d77a, bg.star_sigma0), mf);
    for (double& x : rhs.v) x /= 3.0;
    lat::axpy(rhs, 1.0, adapted_differential(Adapted::d714, alpha, bg));
    lat::axpy(rhs, -1.0 / 3.0, fx.low_order_two(alpha));
  } else if (name == "first_order_xi") {
    // dα = *(d⁷₇α ∧ *σ) − *(dα∧σ) + ⅓ξ(*(*σ∧*(α∧*τ)))
    const FieldK alpha = random_low_mode(g, 1, cfg.seed + 12);
    lhs = lat::d(alpha);
    const FieldK d77a = adapted_differential(Adapted::d77, alpha, bg);
    rhs = lat::star_field(lat::pointwise_wedge(d77a, bg.star_sigma0), mf);
    lat::axpy(rhs, -1.0, lat::star_field(lat::pointwise_wedge(lat::d(alpha), bg.sigma0), mf));
    lat::axpy(rhs, -1.0 / 3.0, fx.xi(fx.low_order_two(alpha)));
  } else if (name == "h_plus_codiff") {
    // (H + *d*)θ = 7/3*(df⁰∧*σ) + 2*(d⁷₇f¹∧*σ) − 2df¹ + ⅔ξ(*(*σ∧*(f¹∧*τ))) − 7/3 f⁰τ
    FieldK theta = random_low_mode(g, 3, cfg.seed + 13);
    lhs = flow::h_operator(theta, bg);
    // *d*θ = −codifferential on 3-forms
    lat::axpy(lhs, -1.0, lat::codifferential(theta, mf));
    const Decomp3Field dec = flow::decompose3_field(theta, bg);
    rhs = lat::star_field(lat::pointwise_wedge(lat::d(dec.f0), bg.star_sigma0), mf);
    for (double& x : rhs.v) x *= 7.0 / 3.0;
    const FieldK d77f1 = adapted_differential(Adapted::d77, dec.f1, bg);
    lat::axpy(rhs, 2.0, lat::star_field(lat::pointwise_wedge(d77f1, bg.star_sigma0), mf));
    lat::axpy(rhs, -2.0, lat::d(dec.f1));
    lat::axpy(rhs, -2.0 / 3.0, fx.xi(fx.low_order_two(dec.f1)));
    FieldK f0tau = fx.tau;
    par::for_each(g.sites(), [&](std::size_t s) {
      const double c = dec.f0.site(s)[0];
      double* p = f0tau.site(s);
      for (int i = 0; i < 21; ++i) p[i] *= c;
    });
    lat::axpy(rhs, -7.0 / 3.0, f0tau);
  } else if (name == "hodge3_via_h") {
    // Δθ = d(Hθ) − d(7/3(df⁰)♯⌟σ + 2(d⁷₇f¹)♯⌟σ) + d(7/3 f⁰τ − ⅔ξ(*(*σ∧*(f¹∧*τ))))
    FieldK theta = lat::constant_field(g, ext::sigma_std());
    for (double& x : theta.v) x *= 0.4;
    lat::axpy(theta, 1.0, flow::random_exact_perturbation(g, cfg.seed + 14, 1, 2));
    lhs = lat::hodge_laplacian(theta, mf);
    const Decomp3Field dec = flow::decompose3_field(theta, bg);
    rhs = lat::d(flow::h_operator(theta, bg));
    FieldK vec = lat::sharp(lat::d(dec.f0), mf);
    for (double& x : vec.v) x *= 7.0 / 3.0;
    const FieldK d77f1 = adapted_differential(Adapted::d77, dec.f1, bg);
    lat::axpy(vec, 2.0, lat::sharp(d77f1, mf));
    lat::axpy(rhs, -1.0, lat::d(lat::pointwise_interior(vec, bg.sigma0)));
    FieldK tail = fx.tau;
    par::for_each(g.sites(), [&](std::size_t s) {
      const double c = dec.f0.site(s)[0];
      double* p = tail.site(s);
      for (int i = 0; i < 21; ++i) p[i] *= 7.0 / 3.0 * c;
    });
    lat::axpy(tail, 2.0 / 3.0, fx.xi(fx.low_order_two(dec.f1)));
    lat::axpy(rhs, 1.0, lat::d(tail));
  } else if (name == "coclosed_two7") {
    // β = *(α∧*σ):  *d*β = ½σ⌐*dβ − ½σ⌐*(Σ e^i∧*(α∧*∇_{e_i}σ)) − *(α∧*τ)
    const FieldK alpha = random_low_mode(g, 1, cfg.seed + 15);
    const FieldK beta = lat::star_field(lat::pointwise_wedge(alpha, bg.star_sigma0), mf);
    lhs = lat::star_field(lat::d(lat::star_field(beta, mf)), mf);
    const FieldK dbeta = lat::d(beta);
    rhs = fx.sigma_contract(lat::star_field(dbeta, mf));
    for (double& x : rhs.v) x *= 0.5;
    lat::axpy(rhs, -0.5, fx.sigma_contract(lat::star_field(fx.nabla_sigma_sum(alpha), mf)));
    lat::axpy(rhs, 1.0, fx.alpha_star_tau(alpha));
  } else if (name == "dstar_seven_decomp") {
    // d*(α∧*σ) = −3/7(d⁷₁α)σ − ½*(d⁷₇α∧σ) + d⁷₂₇α + ζ(α)
    const FieldK alpha = random_low_mode(g, 1, cfg.seed + 16);
    lhs = lat::d(lat::star_field(lat::pointwise_wedge(alpha, bg.star_sigma0), mf));
    const FieldK d71a = adapted_differential(Adapted::d71, alpha, bg);
    rhs = fx.scalar_times_sigma(d71a);
    for (double& x : rhs.v) x *= -3.0 / 7.0;
    const FieldK d77a = adapted_differential(Adapted::d77, alpha, bg);
    lat::axpy(rhs, -0.5, lat::star_field(lat::pointwise_wedge(d77a, bg.sigma0), mf));
    lat::axpy(rhs, 1.0, adapted_differential(Adapted::d727, alpha, bg));
    // ζ(α): the scalar part plus the Λ³₇ images of the displayed 1-forms
    FieldK zeta = fx.scalar_times_sigma(fx.alpha_dot_tau(alpha));
    for (double& x : zeta.v) x *= 1.0 / 7.0;
    const FieldK w1 = fx.sigma_contract(lat::star_field(fx.nabla_sigma_sum(alpha), mf));
    lat::axpy(zeta, -0.25, lat::star_field(lat::pointwise_wedge(w1, bg.sigma0), mf));
    const FieldK w2 = fx.alpha_star_tau(alpha);
    lat::axpy(zeta, 0.5, lat::star_field(lat::pointwise_wedge(w2, bg.sigma0), mf));
    lat::axpy(rhs, 1.0, zeta);
  } else if (name == "hodge1_adapted") {
    // Δα = (d¹₇d⁷₁ + d⁷₇d⁷₇)α + ⅓*d*ξ(*(*σ∧*(α∧*τ)))
    const FieldK alpha = random_low_mode(g, 1, cfg.seed + 17);
    lhs = lat::hodge_laplacian(alpha, mf);
    rhs = adapted_differential(Adapted::d17, adapted_differential(Adapted::d71, alpha, bg), bg);
    lat::axpy(rhs, 1.0,
              adapted_differential(Adapted::d77, adapted_differential(Adapted::d77, alpha, bg), bg));
    // *d* on 2-forms is the codifferential (even degree)
    lat::axpy(rhs, -1.0 / 3.0, lat::codifferential(fx.xi(fx.low_order_two(alpha)), mf));
  } else if (name == "gauge_transfer") {
    // Δ_σσ + d(X(θ)⌟σ) = −Δ₀θ − dΦ(θ)
    FieldK sigma = bg.sigma0;
    lat::axpy(sigma, std::max(cfg.amplitude, 1e-3),
              flow::random_exact_perturbation(g, cfg.seed + 18, 1, 2));
    const MetricField mfs = lat::metric_field(sigma);
    lhs = flow::gauged_flow_rhs(sigma, mfs, bg);
    const FieldK theta = sigma - bg.sigma0;
    rhs = lat::hodge_laplacian(theta, mf);
    lat::axpy(rhs, 1.0, lat::d(flow::phi_gauge(sigma, mfs, bg)));
    for (double& x : rhs.v) x = -x;
  } else {
    throw std::invalid_argument("check_identity: unknown identity " + name);
  }

  IdentityReport rep;
  rep.name = name;
  rep.m = g.m;
  rep.n = g.n;
  rep.L = g.L;
  rep.amplitude = cfg.amplitude;
  rep.residual = rel_residual(lhs, rhs);
  rep.tolerance = cfg.tolerance;
  rep.pass = rep.residual <= rep.tolerance;
  return rep;
}

std::vector<IdentityReport> run_battery(const BatteryConfig& cfg) {
  std::vector<IdentityReport> out;
  for (const auto& name : identity_names()) out.push_back(check_identity(name, cfg));
  return out;
}

std::string report_json(const std::vector<IdentityReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) {
    arr.push_back({{"name", r.name},
                   {"m", r.m},
                   {"n", r.n},
                   {"L", r.L},
                   {"amplitude", r.amplitude},
                   {"residual", r.residual},
                   {"tolerance", r.tolerance},
                   {"pass", r.pass}});
  }
  return arr.dump(2);
}

// --- Moser ------------------------------------------------------------------------------

double moser_constant_cn(int n, int terms) {
  if (n < 3) throw std::invalid_argument("moser_constant_cn: need n >= 3");
  const double x = 1.0 / (1.0 + 2.0 / n);
  double s1 = 0.0;
  double xp = 1.0;
  for (int i = 1; i <= terms; ++i) {
    xp *= x;
    s1 += 2.0 * i * xp;
  }
  double s2 = 0.0;
  for (int i = 0; i <= terms; ++i) s2 += (i + 1) * std::pow(2.0, -i - 2.0);
  return 4.0 * std::pow(1.0 + 2.0 / n, s1) * std::pow(2.0, (n + 2) * s2);
}

namespace {

double lp_norm_p(const FieldK& f, double p, double cell) {
  return cell * par::sum(f.grid.sites(), [&](std::size_t s) {
    return std::pow(std::abs(f.site(s)[0]), p);
  });
}

double grad_sq(const FieldK& f) {
  const Grid& g = f.grid;
  const double cell = std::pow(g.h(), g.m);
  std::vector<double> df(f.v.size());
  double total = 0.0;
  for (int a = 0; a < g.m; ++a) {
    lat::axis_derivative(g, f.v.data(), df.data(), 1, a);
    total += cell * par::sum(g.sites(), [&](std::size_t s) { return df[s] * df[s]; });
  }
  return total;
}

}  // namespace

double estimate_sobolev_cs(const Grid& g, std::uint64_t seed) {
  const int n = g.m;
  if (n < 3) throw std::invalid_argument("estimate_sobolev_cs: need m >= 3");
  const double V = g.active_volume();
  const double cell = std::pow(g.h(), g.m);
  const double p = 2.0 * n / (n - 2.0);
  double best = 0.0;
  for (int trial = 0; trial < 60; ++trial) {
    FieldK f = random_low_mode(g, 0, seed + 1000 * static_cast<std::uint64_t>(trial) + 1, 2);
    if (trial % 3 == 1) {
      // concentrated bump profile
      const double w = 0.15 + 0.1 * (trial % 5);
      for (std::size_t s = 0; s < g.sites(); ++s) {
        double r2 = 0.0;
        for (int a = 0; a < g.m; ++a) {
          double dx = g.x(s, a) - g.L / 2.0;
          r2 += dx * dx;
        }
        f.site(s)[0] = std::exp(-r2 / (2.0 * w * w * g.L * g.L));
      }
    }
    const double lp = std::pow(lp_norm_p(f, p, cell), (n - 2.0) / n);
    const double l2 = lp_norm_p(f, 2.0, cell);
    const double den = grad_sq(f);
    if (den <= 1e-14) continue;
    const double ratio = (lp - std::pow(V, -2.0 / n) * l2) / den;
    best = std::max(best, ratio);
  }
  return 4.0 * std::max(best, 1e-6);
}

MoserReport moser_check(const MoserConfig& cfg) {
  cfg.grid.validate();
  const Grid& g = cfg.grid;
  const int n = g.m;
  if (n < 3) throw std::invalid_argument("moser_check: need m >= 3");
  if (cfg.b < 0.0) throw std::invalid_argument("moser_check: b must be nonnegative");

  // nonnegative initial data
  FieldK f0(g, 0);
  if (cfg.profile == MoserProfile::constant) {
    for (std::size_t s = 0; s < g.sites(); ++s) f0.site(s)[0] = 1.0;
  } else if (cfg.profile == MoserProfile::bump) {
    for (std::size_t s = 0; s < g.sites(); ++s) {
      double r2 = 0.0;
      for (int a = 0; a < g.m; ++a) {
        double dx = g.x(s, a) - g.L / 2.0;
        r2 += dx * dx;
      }
      f0.site(s)[0] = std::exp(-r2 / 0.08);
    }
  } else {
    f0 = random_low_mode(g, 0, cfg.seed, 3);
    double mn = 1e300;
    for (double x : f0.v) mn = std::min(mn, x);
    for (double& x : f0.v) x += -mn + 0.05;
  }
  for (double x : f0.v)
    if (x < 0.0) throw std::invalid_argument("moser_check: negative initial data");

  const double V = g.active_volume();
  const double cell = std::pow(g.h(), g.m);
  const double cs = cfg.cs > 0.0 ? cfg.cs : estimate_sobolev_cs(g, cfg.seed + 7);
  const double cn = moser_constant_cn(n);

  // exact evolution f(t) = e^{bt}·heat(t)f0; space-time L¹ by trapezoid
  const int nt = std::max(16, cfg.time_samples);
  std::vector<double> l1(static_cast<std::size_t>(nt) + 1);
  std::vector<double> sup(static_cast<std::size_t>(nt) + 1);
  for (int j = 0; j <= nt; ++j) {
    const double t = cfg.T * j / nt;
    FieldK f = f0;
    lat::mode_scale(f, [&](double k2) { return std::exp((cfg.b - k2) * t); });
    double mx = 0.0, s1 = 0.0;
    for (double x : f.v) {
      mx = std::max(mx, std::abs(x));
      s1 += std::abs(x);
    }
    l1[static_cast<std::size_t>(j)] = cell * s1;
    sup[static_cast<std::size_t>(j)] = mx;
  }
  double spacetime_l1 = 0.0;
  for (int j = 0; j < nt; ++j)
    spacetime_l1 += 0.5 * (l1[static_cast<std::size_t>(j)] + l1[static_cast<std::size_t>(j) + 1]) *
                    (cfg.T / nt);

  MoserReport rep;
  rep.cs_used = cs;
  rep.cn = cn;
  const double bfac = std::max(cfg.b, n / 4.0 * std::pow(1.0 + n / 2.0, 2.0));
  const double base = cn * bfac * bfac * std::pow(cfg.T, (n + 2.0) / 2.0) *
                      std::pow(std::max(cs, cfg.T * std::pow(V, -2.0 / n)), n / 2.0) *
                      spacetime_l1;
  for (int j = 1; j <= nt; ++j) {
    const double t = cfg.T * j / nt;
    double lhs = 0.0;
    for (int q = j; q <= nt; ++q) lhs = std::max(lhs, sup[static_cast<std::size_t>(q)]);
    const double rhs = std::pow(t, -(n + 2.0) / 4.0) * base;
    rep.max_ratio = std::max(rep.max_ratio, lhs / rhs);
  }
  rep.pass = rep.max_ratio <= 1.0;
  return rep;
}

// --- smoothing probe -----------------------------------------------------------------------

SmoothingReport smoothing_probe(const Grid& g, double eps_time, const flow::LinearPhi& phi,
                                std::uint64_t seed, int steps) {
  // high-mode-rich closed initial data: d of per-site white noise
  Rng rng{seed};
  FieldK beta(g, 2);
  for (std::size_t s = 0; s < g.sites(); ++s)
    for (int c = 0; c < 21; ++c)
      beta.site(s)[c] = rng.symmetric(s, static_cast<std::uint64_t>(c));
  FieldK gam = lat::d(beta);

  const int max_k2 = 3 * (g.n / 2 - 1) * (g.n / 2 - 1);
  const auto before = lat::mode_energy_by_shell(gam, max_k2);

  const FieldK zero_alpha(g, 3);
  if (steps > 0 && eps_time > 0.0) {
    const double dt = eps_time / steps;
    for (int i = 0; i < steps; ++i) linear_parabolic_step(gam, phi, zero_alpha, dt, 1e9);
  }
  const auto after = lat::mode_energy_by_shell(gam, max_k2);

  SmoothingReport rep;
  double peak = 0.0;
  for (double e : before) peak = std::max(peak, e);
  rep.pass = true;
  for (int k2 = 1; k2 <= max_k2; ++k2) {
    const double b = before[static_cast<std::size_t>(k2)];
    if (b <= 1e-12 * peak) continue;  // empty shell
    const double ratio = after[static_cast<std::size_t>(k2)] / b;
    const double heat = std::exp(-2.0 * k2 * eps_time);
    rep.shell_ratio.push_back(ratio);
    rep.heat_ratio.push_back(heat);
    const double fac = heat > 1e-300 ? std::max(ratio / heat, heat / std::max(ratio, 1e-300)) : 1.0;
    // only meaningful where the heat factor is resolvable above roundoff
    if (heat > 1e-10) {
      rep.max_factor = std::max(rep.max_factor, fac);
      if (fac > 2.0) rep.pass = false;
    }
  }
  return rep;
}

}  // namespace g2flow::verify
