#include "g2flow/reference.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace g2flow::ref {

using ext::comp_count;

namespace {

std::size_t ipow(int n, int m) {
  std::size_t r = 1;
  for (int i = 0; i < m; ++i) r *= static_cast<std::size_t>(n);
  return r;
}

}  // namespace

void axis_derivative(const Grid& g, const double* in, double* out, int ncomp, int axis) {
  const int n = g.n;
  const std::size_t nsites = g.sites();
  const std::size_t stride = ipow(n, axis);
  const std::size_t lines = nsites / static_cast<std::size_t>(n);

  if (g.scheme == lat::Scheme::forward_diff) {
    const double invh = 1.0 / g.h();
    for (std::size_t li = 0; li < lines; ++li) {
      const std::size_t low = li % stride;
      const std::size_t high = li / stride;
      const std::size_t base = low + high * stride * static_cast<std::size_t>(n);
      for (int j = 0; j < n; ++j)
        for (int c = 0; c < ncomp; ++c) {
          const std::size_t sj = base + static_cast<std::size_t>(j) * stride;
          const std::size_t s1 = base + static_cast<std::size_t>((j + 1) % n) * stride;
          out[sj * static_cast<std::size_t>(ncomp) + static_cast<std::size_t>(c)] =
              (in[s1 * static_cast<std::size_t>(ncomp) + static_cast<std::size_t>(c)] -
               in[sj * static_cast<std::size_t>(ncomp) + static_cast<std::size_t>(c)]) *
              invh;
        }
    }
    return;
  }

  // explicit complex DFT, derivative in mode space, inverse transform
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<std::complex<double>> hat(static_cast<std::size_t>(n));
  std::vector<std::complex<double>> line(static_cast<std::size_t>(n));
  for (std::size_t li = 0; li < lines; ++li) {
    const std::size_t low = li % stride;
    const std::size_t high = li / stride;
    const std::size_t base = low + high * stride * static_cast<std::size_t>(n);
    for (int c = 0; c < ncomp; ++c) {
      for (int l = 0; l < n; ++l)
        line[static_cast<std::size_t>(l)] =
            in[(base + static_cast<std::size_t>(l) * stride) * static_cast<std::size_t>(ncomp) +
               static_cast<std::size_t>(c)];
      for (int k = 0; k < n; ++k) {
        std::complex<double> acc = 0.0;
        for (int l = 0; l < n; ++l)
          acc += line[static_cast<std::size_t>(l)] *
                 std::polar(1.0, -two_pi * k * l / n);
        hat[static_cast<std::size_t>(k)] = acc / static_cast<double>(n);
      }
      for (int k = 0; k < n; ++k) {
        const int kk = k <= n / 2 ? k : k - n;
        const double kappa = (std::abs(kk) == n / 2) ? 0.0 : two_pi * kk / g.L;
        hat[static_cast<std::size_t>(k)] *= std::complex<double>(0.0, kappa);
      }
      for (int j = 0; j < n; ++j) {
        std::complex<double> acc = 0.0;
        for (int k = 0; k < n; ++k)
          acc += hat[static_cast<std::size_t>(k)] * std::polar(1.0, two_pi * k * j / n);
        out[(base + static_cast<std::size_t>(j) * stride) * static_cast<std::size_t>(ncomp) +
            static_cast<std::size_t>(c)] = acc.real();
      }
    }
  }
}

FieldK d(const FieldK& f) {
  if (f.k >= 7) throw std::invalid_argument("ref::d: degree-7 input");
  FieldK out(f.grid, f.k + 1);
  const int nc_in = f.ncomp();
  std::vector<double> da(f.v.size());
  for (int a = 0; a < f.grid.m; ++a) {
    ref::axis_derivative(f.grid, f.v.data(), da.data(), nc_in, a);
    for (std::size_t s = 0; s < f.grid.sites(); ++s) {
      const double* src = da.data() + s * static_cast<std::size_t>(nc_in);
      double* dst = out.site(s);
      for (const auto& t : ext::wedge_table(1, f.k))
        if (t.ia == a) dst[t.iout] += t.sign * src[t.ib];
    }
  }
  return out;
}

FieldK star_field(const FieldK& f, const MetricField& mf, int orient) {
  FieldK out(f.grid, 7 - f.k);
  for (std::size_t s = 0; s < f.grid.sites(); ++s)
    ext::hodge_star(f.k, f.site(s), out.site(s), mf.metric(s), orient);
  return out;
}

FieldK torsion(const FieldK& sigma, const MetricField& mf) {
  FieldK out = ref::star_field(ref::d(ref::star_field(sigma, mf)), mf);
  for (double& x : out.v) x = -x;
  return out;
}

MetricField metric_field(const FieldK& sigma) {
  MetricField mf;
  mf.grid = sigma.grid;
  mf.flat = false;
  mf.pt.assign(sigma.grid.sites(), {});
  for (std::size_t s = 0; s < sigma.grid.sites(); ++s)
    if (!g2::try_metric_from_sigma(sigma.site(s), 1.0, mf.pt[s]))
      throw ext::NotPositiveError("ref::metric_field: not positive at site " + std::to_string(s));
  return mf;
}

double l2_inner(const FieldK& a, const FieldK& b, const MetricField& mf) {
  const double cell = std::pow(a.grid.h(), a.grid.m);
  double acc = 0.0;
  for (std::size_t s = 0; s < a.grid.sites(); ++s)
    acc += ext::inner(a.k, a.site(s), b.site(s), mf.metric(s)) * mf.dvol(s);
  return acc * cell;
}

}  // namespace g2flow::ref
