#include "g2flow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "g2flow/parallel.hpp"
#include "g2flow/rng.hpp"

namespace g2flow::flow {

using ext::KForm;
using ext::Metric7;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kRk4Stability = 2.785;  // real-axis stability extent of classical RK4

bool is_constant_std(const FieldK& sigma0) {
  const KForm& s = ext::sigma_std();
  for (std::size_t site = 0; site < sigma0.grid.sites(); ++site) {
    const double* p = sigma0.site(site);
    for (int c = 0; c < 35; ++c)
      if (p[c] != s[c]) return false;
  }
  return true;
}

double field_linf(const FieldK& f) {
  return par::max(f.grid.sites(), [&](std::size_t s) {
    const double* p = f.site(s);
    double m = 0.0;
    for (int c = 0; c < f.ncomp(); ++c) m = std::max(m, std::abs(p[c]));
    return m;
  });
}

// scalar-field multiply: out = c · f, c degree 0
FieldK scalar_mul(const FieldK& c0, const FieldK& f) {
  FieldK out = f;
  par::for_each(f.grid.sites(), [&](std::size_t s) {
    const double c = c0.site(s)[0];
    double* p = out.site(s);
    for (int i = 0; i < f.ncomp(); ++i) p[i] *= c;
  });
  return out;
}

}  // namespace

Background Background::from(const FieldK& sigma0) {
  Background bg;
  bg.sigma0 = sigma0;
  bg.mf0 = lat::metric_field(sigma0);
  bg.flat = is_constant_std(sigma0);
  if (bg.flat) bg.mf0.flat = true;
  bg.star_sigma0 = lat::star_field(sigma0, bg.mf0);
  bg.tau0 = torsion(sigma0, bg.mf0);
  return bg;
}

FieldK torsion(const FieldK& sigma, const MetricField& mf) {
  return lat::codifferential(sigma, mf);
}

FieldK laplacian_flow_rhs(const FieldK& sigma, const MetricField& mf) {
  return lat::d(torsion(sigma, mf));
}

Decomp3Field decompose3_field(const FieldK& theta, const Background& bg) {
  Decomp3Field out{FieldK(theta.grid, 0), FieldK(theta.grid, 1), FieldK(theta.grid, 3)};
  if (bg.flat) {
    // all stars collapse to the Euclidean sign tables
    const KForm& sig = ext::sigma_std();
    par::for_each(theta.grid.sites(), [&](std::size_t s) {
      const double* th = theta.site(s);
      double f0 = 0.0;
      for (int c = 0; c < 35; ++c) f0 += th[c] * sig[c];
      f0 /= 7.0;
      out.f0.site(s)[0] = f0;
      // f1 = −¼·wedge_adjoint(σ, *θ) = ¼·*(σ ∧ θ)  (** = id)
      double s6[7], f1[7];
      ext::wedge(3, sig.c.data(), 3, th, s6);
      ext::star_euclid(6, s6, f1);
      double* f1o = out.f1.site(s);
      for (int i = 0; i < 7; ++i) f1o[i] = 0.25 * f1[i];
      // f3 = θ − f0 σ − *(f1 ∧ σ)
      double w4[35], f3s[35];
      ext::wedge(1, f1o, 3, sig.c.data(), w4);
      ext::star_euclid(4, w4, f3s);
      double* f3o = out.f3.site(s);
      for (int c = 0; c < 35; ++c) f3o[c] = th[c] - f0 * sig[c] - f3s[c];
    });
    return out;
  }
  par::for_each(theta.grid.sites(), [&](std::size_t s) {
    g2::G2Point p;
    p.sigma = bg.sigma0.at(s);
    p.m = bg.mf0.metric(s);
    p.dvol_coef = bg.mf0.dvol(s);
    const g2::Decomposition3 dec = g2::decompose3(theta.at(s), p);
    out.f0.site(s)[0] = dec.f0;
    out.f1.set(s, dec.f1);
    out.f3.set(s, dec.f3);
  });
  return out;
}

FieldK d77_field(const FieldK& alpha, const Background& bg) {
  return lat::star_field(lat::d(lat::pointwise_wedge(alpha, bg.star_sigma0)), bg.mf0);
}

FieldK gauge_field_X(const FieldK& theta, const Background& bg) {
  const Decomp3Field dec = decompose3_field(theta, bg);
  FieldK oneform = lat::d(dec.f0);
  for (double& x : oneform.v) x *= 7.0 / 3.0;
  lat::axpy(oneform, 2.0, d77_field(dec.f1, bg));
  return lat::sharp(oneform, bg.mf0);
}

FieldK gauged_flow_rhs(const FieldK& sigma, const MetricField& mf, const Background& bg) {
  const FieldK theta = sigma - bg.sigma0;
  const FieldK X = gauge_field_X(theta, bg);
  FieldK rhs = laplacian_flow_rhs(sigma, mf);
  lat::axpy(rhs, 1.0, lat::d(lat::pointwise_interior(X, sigma)));
  return rhs;
}

FieldK phi_gauge(const FieldK& sigma, const MetricField& mf, const Background& bg) {
  const FieldK theta = sigma - bg.sigma0;
  const Decomp3Field dec = decompose3_field(theta, bg);

  // w = *_σσ − *₀σ0 and its first-order part P; q is the quadratic remainder
  const FieldK hitchin = lat::star_field(sigma, mf);
  const FieldK w = hitchin - bg.star_sigma0;
  FieldK u = scalar_mul(dec.f0, bg.sigma0);
  for (double& x : u.v) x *= 4.0 / 3.0;
  lat::axpy(u, 1.0, lat::star_field(lat::pointwise_wedge(dec.f1, bg.sigma0), bg.mf0));
  lat::axpy(u, -1.0, dec.f3);
  const FieldK P = lat::star_field(u, bg.mf0);
  const FieldK q = w - P;

  // −τ0
  FieldK phi = bg.tau0;
  for (double& x : phi.v) x = -x;

  // (*_σ − *₀) d(*_σσ − *₀σ0)
  const FieldK dw = lat::d(w);
  lat::axpy(phi, 1.0, lat::star_field(dw, mf));
  lat::axpy(phi, -1.0, lat::star_field(dw, bg.mf0));

  // (*₀ − *_σ) *₀ τ0
  const FieldK s5 = lat::star_field(bg.tau0, bg.mf0);
  lat::axpy(phi, 1.0, lat::star_field(s5, bg.mf0));
  lat::axpy(phi, -1.0, lat::star_field(s5, mf));

  // *₀ d q
  lat::axpy(phi, 1.0, lat::star_field(lat::d(q), bg.mf0));

  // −7/3 (df⁰)♯ ⌟ θ − 2 (d⁷₇f¹)♯ ⌟ θ
  const FieldK df0s = lat::sharp(lat::d(dec.f0), bg.mf0);
  lat::axpy(phi, -7.0 / 3.0, lat::pointwise_interior(df0s, theta));
  const FieldK d77s = lat::sharp(d77_field(dec.f1, bg), bg.mf0);
  lat::axpy(phi, -2.0, lat::pointwise_interior(d77s, theta));

  // (2/3) ξ₀( *₀(*₀σ0 ∧ *₀(f¹ ∧ *₀τ0)) )
  const FieldK u6 = lat::pointwise_wedge(dec.f1, lat::star_field(bg.tau0, bg.mf0));
  const FieldK u1 = lat::star_field(u6, bg.mf0);
  const FieldK u2 = lat::star_field(lat::pointwise_wedge(bg.star_sigma0, u1), bg.mf0);
  FieldK xi2 = u2;
  lat::axpy(xi2, 1.0, lat::star_field(lat::pointwise_wedge(bg.sigma0, u2), bg.mf0));
  lat::axpy(phi, -2.0 / 3.0, xi2);

  // −7/3 f⁰ τ0
  lat::axpy(phi, -7.0 / 3.0, scalar_mul(dec.f0, bg.tau0));
  return phi;
}

FieldK h_operator(const FieldK& theta, const Background& bg) {
  const Decomp3Field dec = decompose3_field(theta, bg);
  FieldK u = scalar_mul(dec.f0, bg.sigma0);
  for (double& x : u.v) x *= 4.0 / 3.0;
  lat::axpy(u, 1.0, lat::star_field(lat::pointwise_wedge(dec.f1, bg.sigma0), bg.mf0));
  lat::axpy(u, -1.0, dec.f3);
  return lat::star_field(lat::d(lat::star_field(u, bg.mf0)), bg.mf0);
}

// --- total torsion proportionality ------------------------------------------------

TorsionProportionality total_torsion_check(const FieldK& sigma) {
  const MetricField mf = lat::metric_field(sigma);
  const FieldK tau = torsion(sigma, mf);
  const FieldK star_sig = lat::star_field(sigma, mf);
  const auto gam = lat::christoffels(mf);
  const auto nabla = lat::covariant_derivative(sigma, mf, gam);

  const std::size_t nsites = sigma.grid.sites();
  // K[(s,a)][I] = Σ_{j,l} τ̃_{aj} g^{jl} (e_l ⌟ *σ)_I
  std::vector<double> K(nsites * 7 * 35, 0.0);
  par::for_each(nsites, [&](std::size_t s) {
    const double* tv = tau.site(s);
    const auto& gi = mf.metric(s).ginv;
    // antisymmetric matrix of τ
    double tm[49] = {0};
    for (int r = 0; r < 21; ++r) {
      int idx[2];
      ext::mi_unrank(2, r, idx);
      tm[idx[0] * 7 + idx[1]] = tv[r];
      tm[idx[1] * 7 + idx[0]] = -tv[r];
    }
    double contr[35];
    std::array<double, 7> el{};
    for (int l = 0; l < 7; ++l) {
      el.fill(0.0);
      el[static_cast<std::size_t>(l)] = 1.0;
      ext::interior(el.data(), 4, star_sig.site(s), contr);
      for (int a = 0; a < 7; ++a) {
        double coef = 0.0;
        for (int j = 0; j < 7; ++j) coef += tm[a * 7 + j] * gi[static_cast<std::size_t>(j * 7 + l)];
        if (coef == 0.0) continue;
        double* dst = K.data() + (s * 7 + static_cast<std::size_t>(a)) * 35;
        for (int c = 0; c < 35; ++c) dst[c] += coef * contr[c];
      }
    }
  });

  double nk = 0.0, nn = 0.0, dot = 0.0, nsig = 0.0;
  for (std::size_t i = 0; i < K.size(); ++i) {
    nk += K[i] * K[i];
    nn += nabla[i] * nabla[i];
    dot += nabla[i] * K[i];
  }
  for (double x : sigma.v) nsig += x * x;
  TorsionProportionality out;
  // torsion-free inputs: both sides are roundoff noise, c = 0 by convention
  const double floor2 = 1e-20 * (7.0 * nsig / 35.0);
  if (nk <= floor2 || nn <= floor2) return out;
  out.factor = dot / nk;
  double res2 = 0.0;
  for (std::size_t i = 0; i < K.size(); ++i) {
    const double r = nabla[i] - out.factor * K[i];
    res2 += r * r;
  }
  out.residual = std::sqrt(res2 / nn);
  return out;
}

// --- stepping ---------------------------------------------------------------------

double stable_dt(const FlowState& st, const MetricField& mf) {
  const Grid& g = st.sigma.grid;
  if (st.policy.dt_fixed > 0.0) return st.policy.dt_fixed;
  if (st.policy.integrator == Integrator::imex) return st.policy.cfl * g.h();
  const double kmax = (kTwoPi / g.L) * (g.n / 2 - 1);
  const double k2max = g.m * kmax * kmax;
  return st.policy.cfl * kRk4Stability / (lat::max_eig_ginv_bound(mf) * k2max);
}

namespace {

void metric_or_abort_into(const FieldK& sigma, MetricField& mf, const char* where) {
  std::size_t bad = 0;
  if (!lat::try_metric_field(sigma, mf, &bad))
    throw FlowAbort(std::string(where) + ": positivity lost at site " + std::to_string(bad));
}

MetricField metric_or_abort(const FieldK& sigma, const char* where) {
  MetricField mf;
  metric_or_abort_into(sigma, mf, where);
  return mf;
}

FieldK eval_rhs(const FlowState& st, const FieldK& sigma, const MetricField& mf) {
  return st.kind == RhsKind::plain ? laplacian_flow_rhs(sigma, mf)
                                   : gauged_flow_rhs(sigma, mf, st.bg);
}

void heat_semigroup(FieldK& f, double t) {
  lat::mode_scale(f, [t](double k2) { return std::exp(-k2 * t); });
}

}  // namespace

void step(FlowState& st, double t_stop) {
  if (st.scratch.size() < 2) st.scratch.resize(2);
  MetricField& mf = st.scratch[0];
  metric_or_abort_into(st.sigma, mf, "step");
  double dt = stable_dt(st, mf);
  if (t_stop > 0.0 && st.t + dt > t_stop) dt = t_stop - st.t;
  if (!(dt > 0.0)) throw FlowAbort("step: time step underflow");

  if (st.policy.integrator == Integrator::rk4) {
    MetricField& mfs = st.scratch[1];
    const FieldK k1 = eval_rhs(st, st.sigma, mf);
    FieldK s2 = st.sigma;
    lat::axpy(s2, 0.5 * dt, k1);
    metric_or_abort_into(s2, mfs, "step/rk4-2");
    const FieldK k2 = eval_rhs(st, s2, mfs);
    FieldK s3 = st.sigma;
    lat::axpy(s3, 0.5 * dt, k2);
    metric_or_abort_into(s3, mfs, "step/rk4-3");
    const FieldK k3 = eval_rhs(st, s3, mfs);
    FieldK s4 = st.sigma;
    lat::axpy(s4, dt, k3);
    metric_or_abort_into(s4, mfs, "step/rk4-4");
    const FieldK k4 = eval_rhs(st, s4, mfs);
    lat::axpy(st.sigma, dt / 6.0, k1);
    lat::axpy(st.sigma, dt / 3.0, k2);
    lat::axpy(st.sigma, dt / 3.0, k3);
    lat::axpy(st.sigma, dt / 6.0, k4);
  } else {
    if (st.kind != RhsKind::gauged)
      throw std::invalid_argument("step: the imex integrator supports the gauged flow only");
    // Lawson/Heun: exact flat heat semigroup, second-order explicit remainder
    const FieldK theta = st.sigma - st.bg.sigma0;
    const MetricField flat = MetricField::flat_field(st.sigma.grid);
    FieldK k1 = eval_rhs(st, st.sigma, mf);
    lat::axpy(k1, 1.0, lat::hodge_laplacian(theta, flat));
    FieldK etheta = theta;
    heat_semigroup(etheta, dt);
    FieldK ek1 = k1;
    heat_semigroup(ek1, dt);
    FieldK theta_star = etheta;
    lat::axpy(theta_star, dt, ek1);
    FieldK sigma_star = st.bg.sigma0;
    lat::axpy(sigma_star, 1.0, theta_star);
    MetricField& mf_star = st.scratch[1];
    metric_or_abort_into(sigma_star, mf_star, "step/imex-predictor");
    FieldK k2 = eval_rhs(st, sigma_star, mf_star);
    lat::axpy(k2, 1.0, lat::hodge_laplacian(theta_star, flat));
    FieldK theta_next = etheta;
    lat::axpy(theta_next, 0.5 * dt, ek1);
    lat::axpy(theta_next, 0.5 * dt, k2);
    st.sigma = st.bg.sigma0;
    lat::axpy(st.sigma, 1.0, theta_next);
  }

  if (!st.sigma.finite()) throw FlowAbort("step: non-finite field values");
  st.t += dt;
}

// --- diagnostics and the batch runner ------------------------------------------------

void write_csv(const std::string& path, const DiagnosticsSeries& s) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_csv: cannot open " + path);
  os << "t,torsion_l2,theta_l2,theta_c0,volume,closedness_residual,zero_mode_drift,fitted_rate\n";
  char buf[512];
  for (const auto& r : s.records) {
    std::snprintf(buf, sizeof(buf),
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.t, r.torsion_l2,
                  r.theta_l2, r.theta_c0, r.volume, r.closedness_residual, r.zero_mode_drift,
                  r.fitted_rate);
    os << buf;
  }
}

FieldK random_exact_perturbation(const Grid& g, std::uint64_t seed, int mode_min_sq,
                                 int mode_max_sq) {
  Rng rng{seed};
  const int kmax = static_cast<int>(std::sqrt(static_cast<double>(mode_max_sq))) + 1;
  std::vector<std::array<int, 3>> modes;
  for (int k0 = -kmax; k0 <= kmax; ++k0)
    for (int k1 = (g.m > 1 ? -kmax : 0); k1 <= (g.m > 1 ? kmax : 0); ++k1)
      for (int k2 = (g.m > 2 ? -kmax : 0); k2 <= (g.m > 2 ? kmax : 0); ++k2) {
        const int s2 = k0 * k0 + k1 * k1 + k2 * k2;
        if (s2 < mode_min_sq || s2 > mode_max_sq) continue;
        // one representative per antipodal pair
        if (k0 < 0) continue;
        if (k0 == 0 && k1 < 0) continue;
        if (k0 == 0 && k1 == 0 && k2 < 0) continue;
        modes.push_back({k0, k1, k2});
      }
  if (modes.empty())
    throw std::invalid_argument("random_exact_perturbation: empty mode window");

  FieldK beta(g, 2);
  const double unit = kTwoPi / g.L;
  par::for_each(g.sites(), [&](std::size_t s) {
    const double xs[3] = {g.x(s, 0), g.m > 1 ? g.x(s, 1) : 0.0, g.m > 2 ? g.x(s, 2) : 0.0};
    double* p = beta.site(s);
    for (std::size_t mi = 0; mi < modes.size(); ++mi) {
      const double ph = unit * (modes[mi][0] * xs[0] + modes[mi][1] * xs[1] + modes[mi][2] * xs[2]);
      const double cph = std::cos(ph), sph = std::sin(ph);
      for (int c = 0; c < 21; ++c) {
        const double a = rng.symmetric(2 * mi, static_cast<std::uint64_t>(c));
        const double b = rng.symmetric(2 * mi + 1, static_cast<std::uint64_t>(c));
        p[c] += a * cph + b * sph;
      }
    }
  });
  FieldK theta = lat::d(beta);
  const double m = field_linf(theta);
  if (m <= 0.0) throw std::invalid_argument("random_exact_perturbation: degenerate draw");
  for (double& x : theta.v) x /= m;
  return theta;
}

namespace {

void fit_rate(DiagnosticsSeries& s) {
  // least-squares slope of log theta_l2 over the final half of the samples
  const std::size_t nrec = s.records.size();
  if (nrec < 4) return;
  const std::size_t lo = nrec / 2;
  double st = 0, sy = 0, stt = 0, sty = 0, cnt = 0, syy = 0;
  for (std::size_t i = lo; i < nrec; ++i) {
    const double y = std::log(std::max(1e-300, s.records[i].theta_l2));
    const double t = s.records[i].t;
    st += t;
    sy += y;
    stt += t * t;
    sty += t * y;
    syy += y * y;
    cnt += 1;
  }
  const double den = cnt * stt - st * st;
  if (den <= 0.0) return;
  const double slope = (cnt * sty - st * sy) / den;
  s.fitted_rate = -2.0 * slope;  // decay rate of the squared L² norm
  const double mean_y = sy / cnt;
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = lo; i < nrec; ++i) {
    const double y = std::log(std::max(1e-300, s.records[i].theta_l2));
    const double t = s.records[i].t;
    const double yhat = mean_y + slope * (t - st / cnt);
    ss_res += (y - yhat) * (y - yhat);
    ss_tot += (y - mean_y) * (y - mean_y);
  }
  s.fit_residual = ss_tot > 0 ? std::sqrt(ss_res / ss_tot) : 0.0;
}

// multilinear periodic interpolation of an ncomp field at active coords y
void interp_field(const FieldK& f, const double* y, double* out) {
  const Grid& g = f.grid;
  const int m = g.m;
  const int nc = f.ncomp();
  const double invh = 1.0 / g.h();
  int base[3] = {0, 0, 0};
  double frac[3] = {0, 0, 0};
  for (int a = 0; a < m; ++a) {
    const double u = y[a] * invh;
    const double fl = std::floor(u);
    base[a] = static_cast<int>(fl);
    frac[a] = u - fl;
  }
  for (int c = 0; c < nc; ++c) out[c] = 0.0;
  const int corners = 1 << m;
  for (int corner = 0; corner < corners; ++corner) {
    double wgt = 1.0;
    int ic[3] = {0, 0, 0};
    for (int a = 0; a < m; ++a) {
      const int hi = (corner >> a) & 1;
      wgt *= hi ? frac[a] : 1.0 - frac[a];
      ic[a] = base[a] + hi;
    }
    if (wgt == 0.0) continue;
    const std::size_t s = g.coords_site(ic);
    const double* p = f.site(s);
    for (int c = 0; c < nc; ++c) out[c] += wgt * p[c];
  }
}

void advance_gauge_map(GaugeMap& map, const FieldK& x_now, const FieldK& x_next, double dt) {
  const Grid& g = map.grid;
  FieldK x_mid = x_now;
  lat::axpy(x_mid, 1.0, x_next);
  for (double& v : x_mid.v) v *= 0.5;
  par::for_each(g.sites(), [&](std::size_t s) {
    double* u = map.disp.data() + s * 7;
    double y[3], k1[7], k2[7], k3[7], k4[7], probe[3];
    for (int a = 0; a < g.m; ++a) y[a] = g.x(s, a) + u[a];
    interp_field(x_now, y, k1);
    for (int a = 0; a < g.m; ++a) probe[a] = y[a] - 0.5 * dt * k1[a];
    interp_field(x_mid, probe, k2);
    for (int a = 0; a < g.m; ++a) probe[a] = y[a] - 0.5 * dt * k2[a];
    interp_field(x_mid, probe, k3);
    for (int a = 0; a < g.m; ++a) probe[a] = y[a] - dt * k3[a];
    interp_field(x_next, probe, k4);
    for (int c = 0; c < 7; ++c)
      u[c] -= dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
  });
  map.t += dt;
}

}  // namespace

GaugeMap integrate_gauge_diffeo(const std::function<const FieldK&(int)>& x_at_step,
                                int nsteps, double dt, const Grid& g) {
  GaugeMap map;
  map.grid = g;
  map.disp.assign(g.sites() * 7, 0.0);
  for (int j = 0; j < nsteps; ++j) advance_gauge_map(map, x_at_step(j), x_at_step(j + 1), dt);
  return map;
}

FieldK pullback_field(const GaugeMap& map, const FieldK& f) {
  const Grid& g = map.grid;
  // discrete Jacobian of the displacement: du[r][a] for active a
  std::vector<std::vector<double>> du(static_cast<std::size_t>(g.m));
  for (int a = 0; a < g.m; ++a) {
    du[static_cast<std::size_t>(a)].assign(g.sites() * 7, 0.0);
    lat::axis_derivative(g, map.disp.data(), du[static_cast<std::size_t>(a)].data(), 7, a);
  }
  FieldK out(g, f.k);
  std::vector<std::uint8_t> ok(g.sites(), 1);
  par::for_each(g.sites(), [&](std::size_t s) {
    double J[49];
    for (int r = 0; r < 7; ++r)
      for (int c = 0; c < 7; ++c) J[r * 7 + c] = (r == c) ? 1.0 : 0.0;
    for (int a = 0; a < g.m; ++a)
      for (int r = 0; r < 7; ++r)
        J[r * 7 + a] += du[static_cast<std::size_t>(a)][s * 7 + static_cast<std::size_t>(r)];
    // Jacobian must stay invertible; test the active block determinant
    double det = 1.0;
    {
      double M[9];
      for (int r = 0; r < g.m; ++r)
        for (int c = 0; c < g.m; ++c) M[r * g.m + c] = J[r * 7 + c];
      if (g.m == 1) det = M[0];
      else if (g.m == 2) det = M[0] * M[3] - M[1] * M[2];
      else if (g.m == 3)
        det = M[0] * (M[4] * M[8] - M[5] * M[7]) - M[1] * (M[3] * M[8] - M[5] * M[6]) +
              M[2] * (M[3] * M[7] - M[4] * M[6]);
    }
    if (!(std::abs(det) > 1e-12)) {
      ok[s] = 0;
      return;
    }
    double y[3], vals[35];
    const double* u = map.disp.data() + s * 7;
    for (int a = 0; a < g.m; ++a) y[a] = g.x(s, a) + u[a];
    interp_field(f, y, vals);
    ext::pullback(J, f.k, vals, out.site(s));
  });
  for (std::size_t s = 0; s < g.sites(); ++s)
    if (!ok[s]) throw FlowAbort("pullback_field: degenerate Jacobian at site " + std::to_string(s));
  return out;
}

FlowResult run_flow(const FlowConfig& cfg) {
  cfg.grid.validate();
  FlowResult res;
  const FieldK sigma0 = lat::constant_field(cfg.grid, ext::sigma_std());
  FlowState st;
  st.bg = Background::from(sigma0);
  st.kind = cfg.kind;
  st.policy = cfg.policy;
  st.t = 0.0;

  if (!cfg.initial_snapshot.empty()) {
    st.sigma = lat::load_field(cfg.initial_snapshot);
    if (!(st.sigma.grid == cfg.grid) || st.sigma.k != 3)
      throw std::invalid_argument("run_flow: snapshot grid/degree mismatch");
  } else {
    const FieldK theta0 = random_exact_perturbation(cfg.grid, cfg.seed, cfg.mode_min_sq,
                                                    cfg.mode_max_sq);
    st.sigma = sigma0;
    lat::axpy(st.sigma, cfg.amplitude, theta0);
  }
  res.sigma_initial = st.sigma;
  res.bg = st.bg;
  res.lambda0 = lat::spectrum_lambda0(cfg.grid);

  const KForm zm0 = lat::zero_mode(st.sigma);
  const MetricField flat = MetricField::flat_field(cfg.grid);
  if (cfg.track_gauge_map) {
    res.gauge_map = GaugeMap{cfg.grid, std::vector<double>(cfg.grid.sites() * 7, 0.0), 0.0};
  }

  double init_torsion = -1.0;
  double theta0_l2sq = 0.0;
  double prev_volume = 0.0;
  bool have_prev_volume = false;

  auto record = [&](const MetricField& mf_sigma) {
    DiagRecord r;
    r.t = st.t;
    const FieldK tau = torsion(st.sigma, mf_sigma);
    r.torsion_l2 = lat::l2_norm(tau, st.bg.mf0);
    const FieldK theta = st.sigma - st.bg.sigma0;
    r.theta_l2 = lat::l2_norm(theta, st.bg.mf0);
    r.theta_c0 = lat::c0_norm(theta, st.bg.mf0);
    r.volume = lat::volume(mf_sigma);
    r.closedness_residual = lat::c0_norm(lat::d(st.sigma), flat);
    const KForm zm = lat::zero_mode(st.sigma);
    double drift = 0.0;
    for (int c = 0; c < 35; ++c) drift = std::max(drift, std::abs(zm[c] - zm0[c]));
    r.zero_mode_drift = drift;
    res.series.records.push_back(r);
    fit_rate(res.series);
    res.series.records.back().fitted_rate = res.series.fitted_rate;
    if (init_torsion < 0.0) {
      init_torsion = r.torsion_l2;
      theta0_l2sq = r.theta_l2 * r.theta_l2;
    }
    if (r.t >= 0.5 &&
        r.theta_l2 * r.theta_l2 > std::exp(-res.lambda0 * r.t) * theta0_l2sq * (1.0 + 1e-9))
      res.paper_bound_satisfied = false;
    if (have_prev_volume && r.volume < prev_volume - 1e-12 * std::max(1.0, prev_volume))
      res.volume_monotone = false;
    prev_volume = r.volume;
    have_prev_volume = true;
  };

  FieldK x_prev(cfg.grid, 1);
  if (cfg.track_gauge_map) x_prev = gauge_field_X(st.sigma - st.bg.sigma0, st.bg);

  try {
    MetricField mf;
    metric_or_abort_into(st.sigma, mf, "run_flow/init");
    record(mf);
    int step_index = 0;
    while (st.t < cfg.t_end - 1e-12) {
      const double t_before = st.t;
      step(st, cfg.t_end);
      ++step_index;
      if (cfg.track_gauge_map) {
        const FieldK x_next = gauge_field_X(st.sigma - st.bg.sigma0, st.bg);
        advance_gauge_map(*res.gauge_map, x_prev, x_next, st.t - t_before);
        x_prev = x_next;
      }
      const bool due = (step_index % std::max(1, cfg.record_every)) == 0 || st.t >= cfg.t_end;
      if (due) {
        metric_or_abort_into(st.sigma, mf, "run_flow/record");
        record(mf);
        if (cfg.torsion_floor > 0.0 && res.series.records.back().torsion_l2 < cfg.torsion_floor)
          break;
      }
    }
  } catch (const FlowAbort& e) {
    res.aborted = true;
    res.abort_reason = e.what();
  }
  res.sigma_final = st.sigma;
  fit_rate(res.series);
  return res;
}

// --- linear parabolic solver ----------------------------------------------------------

double LinearPhi::phi1_c0_bound() const {
  double fro = 0.0;
  for (double x : a1) fro += x * x;
  fro = std::sqrt(fro);
  double worst = 0.0;
  for (std::size_t a = 0; a < c1.size(); ++a)
    worst = std::max(worst, field_linf(c1[a]));
  return worst * fro * static_cast<double>(c1.size());
}

LinearPhi LinearPhi::none(const Grid& g) {
  LinearPhi p;
  p.c0 = FieldK(g, 0);
  p.c1.assign(static_cast<std::size_t>(g.m), FieldK(g, 0));
  p.a0.assign(21 * 35, 0.0);
  p.a1.assign(21 * 35, 0.0);
  return p;
}

LinearPhi LinearPhi::random(const Grid& g, std::uint64_t seed, double amp0, double amp1) {
  Rng rng{seed};
  LinearPhi p = none(g);
  for (std::size_t i = 0; i < p.a0.size(); ++i) {
    p.a0[i] = rng.symmetric(1, i);
    p.a1[i] = rng.symmetric(2, i);
  }
  // normalize mixing matrices to unit Frobenius norm
  double f0 = 0.0, f1 = 0.0;
  for (std::size_t i = 0; i < p.a0.size(); ++i) {
    f0 += p.a0[i] * p.a0[i];
    f1 += p.a1[i] * p.a1[i];
  }
  for (std::size_t i = 0; i < p.a0.size(); ++i) {
    p.a0[i] /= std::sqrt(f0);
    p.a1[i] /= std::sqrt(f1);
  }
  const double unit = kTwoPi / g.L;
  for (std::size_t s = 0; s < g.sites(); ++s) {
    const double x0 = g.x(s, 0);
    const double x1 = g.m > 1 ? g.x(s, 1) : 0.0;
    p.c0.site(s)[0] = amp0 * (std::cos(unit * x0) + 0.5 * std::sin(unit * (x0 + x1)));
    for (int a = 0; a < g.m; ++a)
      p.c1[static_cast<std::size_t>(a)].site(s)[0] =
          amp1 / static_cast<double>(g.m) *
          (std::sin(unit * x0 + 0.7 * a) + 0.5 * std::cos(unit * x1 + 0.3 * a));
  }
  return p;
}

FieldK apply_linear_phi(const LinearPhi& phi, const FieldK& gamma) {
  const Grid& g = gamma.grid;
  FieldK out(g, 2);
  std::vector<double> dg(gamma.v.size());
  // zeroth order
  par::for_each(g.sites(), [&](std::size_t s) {
    const double c = phi.c0.site(s)[0];
    const double* src = gamma.site(s);
    double* dst = out.site(s);
    for (int r = 0; r < 21; ++r) {
      double acc = 0.0;
      const double* row = phi.a0.data() + static_cast<std::size_t>(r) * 35;
      for (int q = 0; q < 35; ++q) acc += row[q] * src[q];
      dst[r] += c * acc;
    }
  });
  // first order
  for (int a = 0; a < g.m; ++a) {
    lat::axis_derivative(g, gamma.v.data(), dg.data(), 35, a);
    par::for_each(g.sites(), [&](std::size_t s) {
      const double c = phi.c1[static_cast<std::size_t>(a)].site(s)[0];
      if (c == 0.0) return;
      const double* src = dg.data() + s * 35;
      double* dst = out.site(s);
      for (int r = 0; r < 21; ++r) {
        double acc = 0.0;
        const double* row = phi.a1.data() + static_cast<std::size_t>(r) * 35;
        for (int q = 0; q < 35; ++q) acc += row[q] * src[q];
        dst[r] += c * acc;
      }
    });
  }
  return out;
}

bool linear_parabolic_step(FieldK& gamma, const LinearPhi& phi, const FieldK& alpha,
                           double dt, double margin) {
  const bool warn = phi.phi1_c0_bound() > margin;
  // N(γ) = α − d(Φ(γ))
  FieldK k1 = alpha - lat::d(apply_linear_phi(phi, gamma));
  FieldK eg = gamma;
  heat_semigroup(eg, dt);
  FieldK ek1 = k1;
  heat_semigroup(ek1, dt);
  FieldK gstar = eg;
  lat::axpy(gstar, dt, ek1);
  const FieldK k2 = alpha - lat::d(apply_linear_phi(phi, gstar));
  gamma = eg;
  lat::axpy(gamma, 0.5 * dt, ek1);
  lat::axpy(gamma, 0.5 * dt, k2);
  return warn;
}

}  // namespace g2flow::flow
