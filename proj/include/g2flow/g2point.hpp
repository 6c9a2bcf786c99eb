#pragma once

#include "g2flow/exterior.hpp"

// Pointwise G2-structure algebra: positivity, induced metric and volume,
// irreducible projections, and the nonlinear dual map σ ↦ *_σ σ with its
// derivative.

namespace g2flow::g2 {

using ext::KForm;
using ext::Metric7;
using ext::NotPositiveError;

// B(u,v) = ((e_u ⌟ s) ∧ (e_v ⌟ s) ∧ s) / e^{1...7}, assembled from a static
// cubic coefficient table (sign bookkeeping done once).
void sigma_bilinear(const double* s3, double B[49]);

// Induced metric and volume from a positive 3-form. refvol_coef is the
// coefficient ω of the reference volume Ω = ω·e^{1...7} (ω ≠ 0).
// Throws NotPositiveError when s is not positive.
struct MetricVolume {
  Metric7 metric;
  double dvol_coef;  // dvol = dvol_coef · e^{1...7}
};
MetricVolume metric_from_sigma(const double* s3, double refvol_coef = 1.0);
bool try_metric_from_sigma(const double* s3, double refvol_coef, MetricVolume& out);

bool is_positive(const double* s3);
inline bool is_positive(const KForm& s) { return is_positive(s.c.data()); }

struct G2Point {
  KForm sigma;  // degree 3, positive
  Metric7 m;
  double dvol_coef = 1.0;

  static G2Point from(const KForm& sigma);  // throws NotPositiveError
  static bool try_from(const KForm& sigma, G2Point& out);

  KForm star(const KForm& a) const { return ext::hodge_star(a, m); }
  KForm star_sigma() const { return ext::hodge_star(sigma, m); }
};

enum class Proj { p3_1, p3_7, p3_27, p2_7, p2_14 };

KForm project(Proj label, const KForm& gamma, const G2Point& p);

// γ = f0·σ + *(f1 ∧ σ) + f3 with f3 in the 27-dimensional component
struct Decomposition3 {
  double f0 = 0.0;
  KForm f1{1};
  KForm f3{3};
};
Decomposition3 decompose3(const KForm& gamma, const G2Point& p);
KForm recompose3(const Decomposition3& d, const G2Point& p);

// ξ(γ) = γ + *(σ ∧ γ) on 2-forms; equals 3·π²₇
KForm xi(const KForm& gamma2, const G2Point& p);

// the nonlinear map s ↦ *_s s
KForm hitchin_dual(const KForm& s3);

// directional derivative of hitchin_dual at p.sigma in direction θ:
// *(4/3 f0 σ + *(f1 ∧ σ) − f3)
KForm d_hitchin_dual(const G2Point& p, const KForm& theta3);

}  // namespace g2flow::g2
