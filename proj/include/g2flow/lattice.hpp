#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "g2flow/exterior.hpp"
#include "g2flow/g2point.hpp"

// Discrete exterior calculus for form-valued fields on a flat periodic box
// with m <= 7 active dimensions; fields are constant in the remaining
// directions. Derivatives are spectral (default) or forward differences.

namespace g2flow::lat {

using ext::KForm;
using ext::Metric7;

enum class Scheme { spectral, forward_diff };

struct Grid {
  int m = 3;
  int n = 16;
  double L = 6.283185307179586476925286766559;
  Scheme scheme = Scheme::spectral;

  std::size_t sites() const;
  double h() const { return L / n; }
  double active_volume() const;  // (L)^m
  // lattice coordinates of a site (active axes only, values in [0,n))
  void site_coords(std::size_t s, int* ic) const;
  std::size_t coords_site(const int* ic) const;
  double x(std::size_t s, int axis) const;  // coordinate of site along axis
  void validate() const;                    // throws std::invalid_argument
  bool operator==(const Grid&) const = default;
};

struct FieldK {
  Grid grid;
  int k = 0;
  std::vector<double> v;  // site-major: v[s*ncomp + c]

  FieldK() = default;
  FieldK(const Grid& g, int degree);
  int ncomp() const { return ext::comp_count(k); }
  double* site(std::size_t s) { return v.data() + s * static_cast<std::size_t>(ncomp()); }
  const double* site(std::size_t s) const { return v.data() + s * static_cast<std::size_t>(ncomp()); }
  KForm at(std::size_t s) const;
  void set(std::size_t s, const KForm& f);
  bool finite() const;
};

// field arithmetic
FieldK operator+(const FieldK& a, const FieldK& b);
FieldK operator-(const FieldK& a, const FieldK& b);
FieldK operator*(double s, FieldK a);
void axpy(FieldK& y, double a, const FieldK& x);  // y += a x

// constant field with value f
FieldK constant_field(const Grid& g, const KForm& f);

struct MetricField {
  Grid grid;
  std::vector<g2::MetricVolume> pt;  // metric + dvol per site
  bool flat = false;

  static MetricField flat_field(const Grid& g);
  const Metric7& metric(std::size_t s) const { return pt[s].metric; }
  double dvol(std::size_t s) const { return pt[s].dvol_coef; }
};

// induced metric field of a positive sigma field; throws NotPositiveError
// naming the first bad site
MetricField metric_field(const FieldK& sigma);
bool try_metric_field(const FieldK& sigma, MetricField& out, std::size_t* bad_site = nullptr);

// conservative upper bound for max_site lambda_max(g^{-1}) (Gershgorin)
double max_eig_ginv_bound(const MetricField& mf);

// --- derivatives --------------------------------------------------------------

// derivative of an ncomp-channel array along active axis `axis`
void axis_derivative(const Grid& g, const double* in, double* out, int ncomp, int axis);

// exterior differential; error on degree-7 input
FieldK d(const FieldK& f);

// pointwise Hodge star
FieldK star_field(const FieldK& f, const MetricField& mf, int orient = +1);

// codifferential (-1)^k * d * ; error on degree-0 input
FieldK codifferential(const FieldK& f, const MetricField& mf);

// dd* + d*d
FieldK hodge_laplacian(const FieldK& f, const MetricField& mf);

// --- pointwise lifts ------------------------------------------------------------

FieldK pointwise_wedge(const FieldK& a, const FieldK& b);
// X is a 7-channel vector field in the coordinate frame
FieldK pointwise_interior(const FieldK& vec7, const FieldK& a);
// raise the index of a 1-form field (7 channels) through mf
FieldK sharp(const FieldK& oneform, const MetricField& mf);

// --- L2 structure ----------------------------------------------------------------

double l2_inner(const FieldK& a, const FieldK& b, const MetricField& mf);
double l2_norm(const FieldK& a, const MetricField& mf);
double c0_norm(const FieldK& a, const MetricField& mf);
double volume(const MetricField& mf);  // ∫ dvol over the active box

KForm zero_mode(const FieldK& f);  // componentwise lattice average
void subtract_zero_mode(FieldK& f);

// first eigenvalue of the flat Hodge Laplacian on nonzero resolved modes
double spectrum_lambda0(const Grid& g);

// --- Fourier utilities -----------------------------------------------------------

// multiply every Fourier mode of every component by scale(|2πk/L|²)
void mode_scale(FieldK& f, const std::function<double(double)>& scale);

// energy (sum of |coef|²·) of Fourier modes grouped by integer |k|²
std::vector<double> mode_energy_by_shell(const FieldK& f, int max_k2);

// --- covariant derivative ----------------------------------------------------------

// Christoffels of the varying metric, flat lattice derivatives of g:
// out[s*343 + (c*7+a)*7 + b] = Γ^c_{ab}
std::vector<double> christoffels(const MetricField& mf);

// Levi-Civita covariant derivative of a k-form field:
// out[(s*7 + a)*ncomp + I] = (∇_a ω)_I
std::vector<double> covariant_derivative(const FieldK& f, const MetricField& mf,
                                         const std::vector<double>& gamma);

// --- snapshots ----------------------------------------------------------------------

// JSON header line {m,n,L,degree,component_order:"lex"} + little-endian doubles
void save_field(const std::string& path, const FieldK& f);
FieldK load_field(const std::string& path);

}  // namespace g2flow::lat
