#include "g2flow/lattice.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>

#include "g2flow/parallel.hpp"

namespace g2flow::lat {

using ext::comp_count;

namespace {

// per-(n, L, scheme) derivative machinery, built once
struct DerivCache {
  int n;
  std::vector<double> D;                         // spectral derivative matrix, row-major n×n
  std::vector<std::complex<double>> W, Winv;     // DFT matrices
  std::vector<double> kappa;                     // mode wavenumbers 2πk/L, index 0..n-1
};

const DerivCache& deriv_cache(const Grid& g) {
  static std::map<std::tuple<int, std::uint64_t>, DerivCache> cache;
  static std::mutex mu;
  std::uint64_t lbits;
  static_assert(sizeof(double) == sizeof(std::uint64_t));
  std::memcpy(&lbits, &g.L, sizeof(lbits));
  const auto key = std::make_tuple(g.n, lbits);
  std::scoped_lock lock(mu);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  DerivCache c;
  c.n = g.n;
  const int n = g.n;
  const double two_pi = 2.0 * std::numbers::pi;
  c.D.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int j = 0; j < n; ++j)
    for (int l = 0; l < n; ++l) {
      double s = 0.0;
      for (int k = 1; k <= n / 2 - 1; ++k)
        s += (two_pi * k / g.L) * std::sin(two_pi * k * (j - l) / n);
      c.D[static_cast<std::size_t>(j) * n + l] = -2.0 * s / n;
    }
  c.W.assign(static_cast<std::size_t>(n) * n, {});
  c.Winv.assign(static_cast<std::size_t>(n) * n, {});
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      const double ang = -two_pi * j * k / n;
      c.W[static_cast<std::size_t>(j) * n + k] = {std::cos(ang), std::sin(ang)};
      c.Winv[static_cast<std::size_t>(j) * n + k] = {std::cos(ang) / n, -std::sin(ang) / n};
    }
  c.kappa.assign(static_cast<std::size_t>(n), 0.0);
  for (int k = 0; k < n; ++k) {
    const int kk = k <= n / 2 ? k : k - n;
    c.kappa[static_cast<std::size_t>(k)] = two_pi * kk / g.L;
  }
  return cache.emplace(key, std::move(c)).first->second;
}

std::size_t ipow(int n, int m) {
  std::size_t r = 1;
  for (int i = 0; i < m; ++i) r *= static_cast<std::size_t>(n);
  return r;
}

}  // namespace

std::size_t Grid::sites() const { return ipow(n, m); }

double Grid::active_volume() const { return std::pow(L, m); }

void Grid::site_coords(std::size_t s, int* ic) const {
  for (int a = 0; a < m; ++a) {
    ic[a] = static_cast<int>(s % static_cast<std::size_t>(n));
    s /= static_cast<std::size_t>(n);
  }
}

std::size_t Grid::coords_site(const int* ic) const {
  std::size_t s = 0;
  for (int a = m - 1; a >= 0; --a) {
    int w = ic[a] % n;
    if (w < 0) w += n;
    s = s * static_cast<std::size_t>(n) + static_cast<std::size_t>(w);
  }
  return s;
}

double Grid::x(std::size_t s, int axis) const {
  for (int a = 0; a < axis; ++a) s /= static_cast<std::size_t>(n);
  return h() * static_cast<double>(s % static_cast<std::size_t>(n));
}

void Grid::validate() const {
  if (m < 1 || m > 7) throw std::invalid_argument("Grid: m must be in 1..7");
  if (n < 4) throw std::invalid_argument("Grid: n must be >= 4");
  if (scheme == Scheme::spectral && n % 2 != 0)
    throw std::invalid_argument("Grid: spectral scheme needs even n");
  if (!(L > 0.0)) throw std::invalid_argument("Grid: period must be positive");
}

FieldK::FieldK(const Grid& g, int degree) : grid(g), k(degree) {
  v.assign(g.sites() * static_cast<std::size_t>(comp_count(degree)), 0.0);
}

KForm FieldK::at(std::size_t s) const {
  KForm f(k);
  const double* p = site(s);
  for (int i = 0; i < ncomp(); ++i) f[i] = p[i];
  return f;
}

void FieldK::set(std::size_t s, const KForm& f) {
  double* p = site(s);
  for (int i = 0; i < ncomp(); ++i) p[i] = f[i];
}

bool FieldK::finite() const {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

namespace {
constexpr std::size_t kElemChunk = 8192;

template <class F>
void elementwise(std::size_t size, F&& body) {
  const std::size_t chunks = (size + kElemChunk - 1) / kElemChunk;
  par::for_each(chunks, [&](std::size_t c) {
    const std::size_t lo = c * kElemChunk;
    const std::size_t hi = std::min(size, lo + kElemChunk);
    for (std::size_t i = lo; i < hi; ++i) body(i);
  });
}
}  // namespace

FieldK operator+(const FieldK& a, const FieldK& b) {
  FieldK out = a;
  elementwise(out.v.size(), [&](std::size_t i) { out.v[i] += b.v[i]; });
  return out;
}

FieldK operator-(const FieldK& a, const FieldK& b) {
  FieldK out = a;
  elementwise(out.v.size(), [&](std::size_t i) { out.v[i] -= b.v[i]; });
  return out;
}

FieldK operator*(double s, FieldK a) {
  elementwise(a.v.size(), [&](std::size_t i) { a.v[i] *= s; });
  return a;
}

void axpy(FieldK& y, double a, const FieldK& x) {
  elementwise(y.v.size(), [&](std::size_t i) { y.v[i] += a * x.v[i]; });
}

FieldK constant_field(const Grid& g, const KForm& f) {
  FieldK out(g, f.k);
  par::for_each(g.sites(), [&](std::size_t s) { out.set(s, f); });
  return out;
}

MetricField MetricField::flat_field(const Grid& g) {
  MetricField mf;
  mf.grid = g;
  mf.flat = true;
  g2::MetricVolume mv;
  mv.metric = Metric7::identity();
  mv.dvol_coef = 1.0;
  mf.pt.assign(g.sites(), mv);
  return mf;
}

bool try_metric_field(const FieldK& sigma, MetricField& out, std::size_t* bad_site) {
  out.grid = sigma.grid;
  out.flat = false;
  // resize (not assign) so a reused buffer keeps its pages warm
  out.pt.resize(sigma.grid.sites());
  std::vector<std::uint8_t> ok(sigma.grid.sites(), 1);
  par::for_each(sigma.grid.sites(), [&](std::size_t s) {
    if (!g2::try_metric_from_sigma(sigma.site(s), 1.0, out.pt[s])) ok[s] = 0;
  });
  for (std::size_t s = 0; s < ok.size(); ++s)
    if (!ok[s]) {
      if (bad_site) *bad_site = s;
      return false;
    }
  return true;
}

MetricField metric_field(const FieldK& sigma) {
  MetricField mf;
  std::size_t bad = 0;
  if (!try_metric_field(sigma, mf, &bad))
    throw ext::NotPositiveError("metric_field: sigma not positive at site " + std::to_string(bad));
  return mf;
}

double max_eig_ginv_bound(const MetricField& mf) {
  return par::max(mf.pt.size(), [&](std::size_t s) {
    const auto& gi = mf.pt[s].metric.ginv;
    double worst = 0.0;
    for (int r = 0; r < 7; ++r) {
      double row = 0.0;
      for (int c = 0; c < 7; ++c) row += std::abs(gi[static_cast<std::size_t>(r * 7 + c)]);
      worst = std::max(worst, row);
    }
    return worst;
  });
}

void axis_derivative(const Grid& g, const double* in, double* out, int ncomp, int axis) {
  const int n = g.n;
  const std::size_t nsites = g.sites();
  const std::size_t lines = nsites / static_cast<std::size_t>(n);
  const std::size_t stride_sites = ipow(n, axis);
  const std::size_t low_span = stride_sites;  // sites with smaller axis index

  if (g.scheme == Scheme::forward_diff) {
    const double invh = 1.0 / g.h();
    par::for_each(lines, [&](std::size_t line) {
      const std::size_t low = line % low_span;
      const std::size_t high = line / low_span;
      const std::size_t base = low + high * low_span * static_cast<std::size_t>(n);
      for (int j = 0; j < n; ++j) {
        const std::size_t sj = base + static_cast<std::size_t>(j) * stride_sites;
        const std::size_t sj1 = base + static_cast<std::size_t>((j + 1) % n) * stride_sites;
        for (int c = 0; c < ncomp; ++c)
          out[sj * static_cast<std::size_t>(ncomp) + static_cast<std::size_t>(c)] =
              (in[sj1 * static_cast<std::size_t>(ncomp) + static_cast<std::size_t>(c)] -
               in[sj * static_cast<std::size_t>(ncomp) + static_cast<std::size_t>(c)]) *
              invh;
      }
    });
    return;
  }

  const auto& dc = deriv_cache(g);
  par::for_each(lines, [&](std::size_t line) {
    const std::size_t low = line % low_span;
    const std::size_t high = line / low_span;
    const std::size_t base = low + high * low_span * static_cast<std::size_t>(n);
    std::vector<double> tmp(static_cast<std::size_t>(n));
    for (int c = 0; c < ncomp; ++c) {
      for (int l = 0; l < n; ++l)
        tmp[static_cast<std::size_t>(l)] =
            in[(base + static_cast<std::size_t>(l) * stride_sites) * static_cast<std::size_t>(ncomp) +
               static_cast<std::size_t>(c)];
      for (int j = 0; j < n; ++j) {
        const double* row = dc.D.data() + static_cast<std::size_t>(j) * n;
        double s = 0.0;
        for (int l = 0; l < n; ++l) s += row[l] * tmp[static_cast<std::size_t>(l)];
        out[(base + static_cast<std::size_t>(j) * stride_sites) * static_cast<std::size_t>(ncomp) +
            static_cast<std::size_t>(c)] = s;
      }
    }
  });
}

FieldK d(const FieldK& f) {
  if (f.k >= 7) throw std::invalid_argument("d: degree-7 input");
  FieldK out(f.grid, f.k + 1);
  const int nc_in = f.ncomp();
  std::vector<double> da(f.v.size());
  // insertion tables e^a ∧ e^J per axis
  for (int a = 0; a < f.grid.m; ++a) {
    axis_derivative(f.grid, f.v.data(), da.data(), nc_in, a);
    std::vector<std::pair<int, double>> ins(static_cast<std::size_t>(nc_in), {-1, 0.0});
    for (const auto& t : ext::wedge_table(1, f.k))
      if (t.ia == a) ins[t.ib] = {t.iout, static_cast<double>(t.sign)};
    const int nc_out = out.ncomp();
    par::for_each(f.grid.sites(), [&](std::size_t s) {
      const double* src = da.data() + s * static_cast<std::size_t>(nc_in);
      double* dst = out.site(s);
      for (int c = 0; c < nc_in; ++c)
        if (ins[static_cast<std::size_t>(c)].first >= 0)
          dst[ins[static_cast<std::size_t>(c)].first] += ins[static_cast<std::size_t>(c)].second * src[c];
      (void)nc_out;
    });
  }
  return out;
}

FieldK star_field(const FieldK& f, const MetricField& mf, int orient) {
  FieldK out(f.grid, 7 - f.k);
  if (mf.flat) {
    const auto tab = ext::star_table(f.k);
    par::for_each(f.grid.sites(), [&](std::size_t s) {
      const double* src = f.site(s);
      double* dst = out.site(s);
      for (std::size_t i = 0; i < tab.size(); ++i)
        dst[tab[i].iout] = orient * tab[i].sign * src[i];
    });
    return out;
  }
  par::for_each(f.grid.sites(), [&](std::size_t s) {
    ext::hodge_star(f.k, f.site(s), out.site(s), mf.metric(s), orient);
  });
  return out;
}

FieldK codifferential(const FieldK& f, const MetricField& mf) {
  if (f.k < 1) throw std::invalid_argument("codifferential: degree-0 input");
  const double sgn = (f.k % 2 == 0) ? 1.0 : -1.0;
  FieldK out = star_field(d(star_field(f, mf)), mf);
  for (double& x : out.v) x *= sgn;
  return out;
}

FieldK hodge_laplacian(const FieldK& f, const MetricField& mf) {
  FieldK out(f.grid, f.k);
  if (f.k >= 1) out = d(codifferential(f, mf));
  if (f.k <= 6) {
    const FieldK dstar_d = codifferential(d(f), mf);
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += dstar_d.v[i];
  }
  return out;
}

FieldK pointwise_wedge(const FieldK& a, const FieldK& b) {
  FieldK out(a.grid, a.k + b.k);
  par::for_each(a.grid.sites(), [&](std::size_t s) {
    ext::wedge(a.k, a.site(s), b.k, b.site(s), out.site(s));
  });
  return out;
}

FieldK pointwise_interior(const FieldK& vec7, const FieldK& a) {
  FieldK out(a.grid, a.k - 1);
  par::for_each(a.grid.sites(), [&](std::size_t s) {
    ext::interior(vec7.site(s), a.k, a.site(s), out.site(s));
  });
  return out;
}

FieldK sharp(const FieldK& oneform, const MetricField& mf) {
  FieldK out(oneform.grid, 1);
  par::for_each(oneform.grid.sites(), [&](std::size_t s) {
    const double* a = oneform.site(s);
    const auto& gi = mf.metric(s).ginv;
    double* dst = out.site(s);
    for (int i = 0; i < 7; ++i) {
      double acc = 0.0;
      for (int j = 0; j < 7; ++j) acc += gi[static_cast<std::size_t>(i * 7 + j)] * a[j];
      dst[i] = acc;
    }
  });
  return out;
}

double l2_inner(const FieldK& a, const FieldK& b, const MetricField& mf) {
  if (a.k != b.k || !(a.grid == b.grid)) throw std::invalid_argument("l2_inner: shape mismatch");
  const double cell = std::pow(a.grid.h(), a.grid.m);
  if (mf.flat) {
    return cell * par::sum(a.grid.sites(), [&](std::size_t s) {
      return ext::inner_euclid(a.k, a.site(s), b.site(s));
    });
  }
  return cell * par::sum(a.grid.sites(), [&](std::size_t s) {
    return ext::inner(a.k, a.site(s), b.site(s), mf.metric(s)) * mf.dvol(s);
  });
}

double l2_norm(const FieldK& a, const MetricField& mf) {
  return std::sqrt(std::max(0.0, l2_inner(a, a, mf)));
}

double c0_norm(const FieldK& a, const MetricField& mf) {
  if (mf.flat) {
    return std::sqrt(par::max(a.grid.sites(), [&](std::size_t s) {
      return ext::inner_euclid(a.k, a.site(s), a.site(s));
    }));
  }
  return std::sqrt(par::max(a.grid.sites(), [&](std::size_t s) {
    return ext::inner(a.k, a.site(s), a.site(s), mf.metric(s));
  }));
}

double volume(const MetricField& mf) {
  const double cell = std::pow(mf.grid.h(), mf.grid.m);
  return cell * par::sum(mf.pt.size(), [&](std::size_t s) { return mf.dvol(s); });
}

KForm zero_mode(const FieldK& f) {
  KForm out(f.k);
  const int nc = f.ncomp();
  const double inv = 1.0 / static_cast<double>(f.grid.sites());
  for (int c = 0; c < nc; ++c)
    out[c] = inv * par::sum(f.grid.sites(), [&](std::size_t s) { return f.site(s)[c]; });
  return out;
}

void subtract_zero_mode(FieldK& f) {
  const KForm z = zero_mode(f);
  par::for_each(f.grid.sites(), [&](std::size_t s) {
    double* p = f.site(s);
    for (int c = 0; c < f.ncomp(); ++c) p[c] -= z[c];
  });
}

double spectrum_lambda0(const Grid& g) {
  const int kmax = g.n / 2 - 1;
  const double unit = 2.0 * std::numbers::pi / g.L;
  double best = -1.0;
  std::vector<int> k(static_cast<std::size_t>(g.m), -kmax);
  while (true) {
    double k2 = 0.0;
    bool zero = true;
    for (int a = 0; a < g.m; ++a) {
      k2 += static_cast<double>(k[static_cast<std::size_t>(a)]) * k[static_cast<std::size_t>(a)];
      if (k[static_cast<std::size_t>(a)] != 0) zero = false;
    }
    if (!zero) {
      const double lam = unit * unit * k2;
      if (best < 0.0 || lam < best) best = lam;
    }
    int a = 0;
    while (a < g.m && ++k[static_cast<std::size_t>(a)] > kmax) {
      k[static_cast<std::size_t>(a)] = -kmax;
      ++a;
    }
    if (a == g.m) break;
  }
  return best;
}

void mode_scale(FieldK& f, const std::function<double(double)>& scale) {
  const Grid& g = f.grid;
  const auto& dc = deriv_cache(g);
  const int n = g.n;
  const int nc = f.ncomp();
  const std::size_t nsites = g.sites();
  std::vector<std::complex<double>> buf(nsites);
  std::vector<std::complex<double>> line(static_cast<std::size_t>(n));
  for (int c = 0; c < nc; ++c) {
    for (std::size_t s = 0; s < nsites; ++s) buf[s] = f.v[s * static_cast<std::size_t>(nc) + static_cast<std::size_t>(c)];
    // forward transforms along every active axis
    for (int a = 0; a < g.m; ++a) {
      const std::size_t stride = ipow(n, a);
      const std::size_t lines = nsites / static_cast<std::size_t>(n);
      for (std::size_t li = 0; li < lines; ++li) {
        const std::size_t low = li % stride;
        const std::size_t high = li / stride;
        const std::size_t base = low + high * stride * static_cast<std::size_t>(n);
        for (int l = 0; l < n; ++l) line[static_cast<std::size_t>(l)] = buf[base + static_cast<std::size_t>(l) * stride];
        for (int j = 0; j < n; ++j) {
          std::complex<double> acc = 0.0;
          const std::complex<double>* row = dc.W.data() + static_cast<std::size_t>(j) * n;
          for (int l = 0; l < n; ++l) acc += row[l] * line[static_cast<std::size_t>(l)];
          buf[base + static_cast<std::size_t>(j) * stride] = acc;
        }
      }
    }
    // scale each mode by scale(|κ|²)
    for (std::size_t s = 0; s < nsites; ++s) {
      std::size_t t = s;
      double k2 = 0.0;
      for (int a = 0; a < g.m; ++a) {
        const int idx = static_cast<int>(t % static_cast<std::size_t>(n));
        t /= static_cast<std::size_t>(n);
        const double kap = dc.kappa[static_cast<std::size_t>(idx)];
        k2 += kap * kap;
      }
      buf[s] *= scale(k2);
    }
    // inverse transforms
    for (int a = 0; a < g.m; ++a) {
      const std::size_t stride = ipow(n, a);
      const std::size_t lines = nsites / static_cast<std::size_t>(n);
      for (std::size_t li = 0; li < lines; ++li) {
        const std::size_t low = li % stride;
        const std::size_t high = li / stride;
        const std::size_t base = low + high * stride * static_cast<std::size_t>(n);
        for (int l = 0; l < n; ++l) line[static_cast<std::size_t>(l)] = buf[base + static_cast<std::size_t>(l) * stride];
        for (int j = 0; j < n; ++j) {
          std::complex<double> acc = 0.0;
          const std::complex<double>* row = dc.Winv.data() + static_cast<std::size_t>(j) * n;
          for (int l = 0; l < n; ++l) acc += row[l] * line[static_cast<std::size_t>(l)];
          buf[base + static_cast<std::size_t>(j) * stride] = acc;
        }
      }
    }
    for (std::size_t s = 0; s < nsites; ++s) f.v[s * static_cast<std::size_t>(nc) + static_cast<std::size_t>(c)] = buf[s].real();
  }
}

std::vector<double> mode_energy_by_shell(const FieldK& f, int max_k2) {
  const Grid& g = f.grid;
  const auto& dc = deriv_cache(g);
  const int n = g.n;
  const int nc = f.ncomp();
  const std::size_t nsites = g.sites();
  std::vector<double> shells(static_cast<std::size_t>(max_k2) + 1, 0.0);
  const double unit = 2.0 * std::numbers::pi / g.L;
  std::vector<std::complex<double>> buf(nsites);
  std::vector<std::complex<double>> line(static_cast<std::size_t>(n));
  for (int c = 0; c < nc; ++c) {
    for (std::size_t s = 0; s < nsites; ++s) buf[s] = f.v[s * static_cast<std::size_t>(nc) + static_cast<std::size_t>(c)];
    for (int a = 0; a < g.m; ++a) {
      const std::size_t stride = ipow(n, a);
      const std::size_t lines = nsites / static_cast<std::size_t>(n);
      for (std::size_t li = 0; li < lines; ++li) {
        const std::size_t low = li % stride;
        const std::size_t high = li / stride;
        const std::size_t base = low + high * stride * static_cast<std::size_t>(n);
        for (int l = 0; l < n; ++l) line[static_cast<std::size_t>(l)] = buf[base + static_cast<std::size_t>(l) * stride];
        for (int j = 0; j < n; ++j) {
          std::complex<double> acc = 0.0;
          const std::complex<double>* row = dc.W.data() + static_cast<std::size_t>(j) * n;
          for (int l = 0; l < n; ++l) acc += row[l] * line[static_cast<std::size_t>(l)];
          buf[base + static_cast<std::size_t>(j) * stride] = acc;
        }
      }
    }
    const double norm = 1.0 / static_cast<double>(nsites);
    for (std::size_t s = 0; s < nsites; ++s) {
      std::size_t t = s;
      double k2 = 0.0;
      for (int a = 0; a < g.m; ++a) {
        const int idx = static_cast<int>(t % static_cast<std::size_t>(n));
        t /= static_cast<std::size_t>(n);
        const double kap = dc.kappa[static_cast<std::size_t>(idx)] / unit;
        k2 += kap * kap;
      }
      const int shell = static_cast<int>(std::lround(k2));
      if (shell <= max_k2)
        shells[static_cast<std::size_t>(shell)] += std::norm(buf[s]) * norm * norm;
    }
  }
  return shells;
}

std::vector<double> christoffels(const MetricField& mf) {
  const Grid& g = mf.grid;
  const std::size_t nsites = g.sites();
  // flat-lattice componentwise derivatives of g along each active axis
  std::vector<double> garr(nsites * 49);
  par::for_each(nsites, [&](std::size_t s) {
    std::memcpy(garr.data() + s * 49, mf.metric(s).g.data(), 49 * sizeof(double));
  });
  std::vector<std::vector<double>> dg(static_cast<std::size_t>(g.m));
  for (int a = 0; a < g.m; ++a) {
    dg[static_cast<std::size_t>(a)].assign(nsites * 49, 0.0);
    axis_derivative(g, garr.data(), dg[static_cast<std::size_t>(a)].data(), 49, a);
  }
  std::vector<double> out(nsites * 343, 0.0);
  par::for_each(nsites, [&](std::size_t s) {
    const auto& gi = mf.metric(s).ginv;
    auto dgat = [&](int a, int i, int j) -> double {
      if (a >= g.m) return 0.0;
      return dg[static_cast<std::size_t>(a)][s * 49 + static_cast<std::size_t>(i * 7 + j)];
    };
    double* G = out.data() + s * 343;
    for (int c = 0; c < 7; ++c)
      for (int a = 0; a < 7; ++a)
        for (int b = 0; b < 7; ++b) {
          double acc = 0.0;
          for (int dd = 0; dd < 7; ++dd)
            acc += gi[static_cast<std::size_t>(c * 7 + dd)] *
                   (dgat(a, b, dd) + dgat(b, a, dd) - dgat(dd, a, b));
          G[(c * 7 + a) * 7 + b] = 0.5 * acc;
        }
  });
  return out;
}

std::vector<double> covariant_derivative(const FieldK& f, const MetricField& mf,
                                         const std::vector<double>& gamma) {
  const Grid& g = f.grid;
  const std::size_t nsites = g.sites();
  const int nc = f.ncomp();
  const int k = f.k;
  std::vector<double> out(nsites * 7 * static_cast<std::size_t>(nc), 0.0);
  // plain derivatives first
  std::vector<double> da(f.v.size());
  for (int a = 0; a < g.m; ++a) {
    axis_derivative(g, f.v.data(), da.data(), nc, a);
    par::for_each(nsites, [&](std::size_t s) {
      double* dst = out.data() + (s * 7 + static_cast<std::size_t>(a)) * static_cast<std::size_t>(nc);
      const double* src = da.data() + s * static_cast<std::size_t>(nc);
      for (int c = 0; c < nc; ++c) dst[c] = src[c];
    });
  }
  (void)mf;
  // Christoffel corrections: (∇_a ω)_I -= Γ^d_{a i_r} ω_{I[r→d]}
  par::for_each(nsites, [&](std::size_t s) {
    const double* G = gamma.data() + s * 343;
    const double* w = f.site(s);
    for (int a = 0; a < 7; ++a) {
      double* dst = out.data() + (s * 7 + static_cast<std::size_t>(a)) * static_cast<std::size_t>(nc);
      for (int I = 0; I < nc; ++I) {
        int idx[7];
        ext::mi_unrank(k, I, idx);
        double corr = 0.0;
        for (int r = 0; r < k; ++r) {
          const int ir = idx[r];
          for (int dd = 0; dd < 7; ++dd) {
            const double gam = G[(dd * 7 + a) * 7 + ir];
            if (gam == 0.0) continue;
            int jdx[7];
            for (int q = 0; q < k; ++q) jdx[q] = idx[q];
            jdx[r] = dd;
            const ext::RankedIndex ri = ext::mi_sort(k, jdx);
            if (ri.sign != 0) corr += gam * ri.sign * w[ri.rank];
          }
        }
        dst[I] -= corr;
      }
    }
  });
  return out;
}

void save_field(const std::string& path, const FieldK& f) {
  nlohmann::json hdr;
  hdr["m"] = f.grid.m;
  hdr["n"] = f.grid.n;
  hdr["L"] = f.grid.L;
  hdr["degree"] = f.k;
  hdr["component_order"] = "lex";
  hdr["scheme"] = f.grid.scheme == Scheme::spectral ? "spectral" : "forward-difference";
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_field: cannot open " + path);
  const std::string h = hdr.dump();
  os << h << '\n';
  os.write(reinterpret_cast<const char*>(f.v.data()),
           static_cast<std::streamsize>(f.v.size() * sizeof(double)));
  if (!os) throw std::runtime_error("save_field: write failed for " + path);
}

FieldK load_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_field: cannot open " + path);
  std::string line;
  std::getline(is, line);
  const nlohmann::json hdr = nlohmann::json::parse(line);
  Grid g;
  g.m = hdr.at("m").get<int>();
  g.n = hdr.at("n").get<int>();
  g.L = hdr.at("L").get<double>();
  g.scheme = hdr.value("scheme", "spectral") == std::string("forward-difference")
                 ? Scheme::forward_diff
                 : Scheme::spectral;
  g.validate();
  FieldK f(g, hdr.at("degree").get<int>());
  is.read(reinterpret_cast<char*>(f.v.data()),
          static_cast<std::streamsize>(f.v.size() * sizeof(double)));
  if (is.gcount() != static_cast<std::streamsize>(f.v.size() * sizeof(double)))
    throw std::runtime_error("load_field: truncated payload in " + path);
  return f;
}

}  // namespace g2flow::lat
