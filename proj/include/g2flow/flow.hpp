#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "g2flow/lattice.hpp"

// Torsion, the Laplacian flow and its reference-gauged variant, the linear
// parabolic solver, and the gauge-diffeomorphism ODE.

namespace g2flow::flow {

using lat::FieldK;
using lat::Grid;
using lat::MetricField;

// reference structure σ0 with cached derived fields
struct Background {
  FieldK sigma0;
  MetricField mf0;
  FieldK star_sigma0;  // *₀σ0, degree 4
  FieldK tau0;         // adjoint torsion of σ0, degree 2
  bool flat = false;   // constant standard form

  static Background from(const FieldK& sigma0);
};

// τ = −*d*σ (degree 2); mf must be the metric field of sigma
FieldK torsion(const FieldK& sigma, const MetricField& mf);

// least-squares proportionality between ∇σ and the contraction of τ with *σ;
// the scalar is measured, not assumed (embedding normalizations differ by
// convention). residual is relative; factor 0 when both sides vanish.
struct TorsionProportionality {
  double factor = 0.0;
  double residual = 0.0;
};
TorsionProportionality total_torsion_check(const FieldK& sigma);

// dτ, an exact 3-form field
FieldK laplacian_flow_rhs(const FieldK& sigma, const MetricField& mf);

// sitewise decomposition of a 3-form field against the background
struct Decomp3Field {
  FieldK f0;  // degree 0
  FieldK f1;  // degree 1
  FieldK f3;  // degree 3
};
Decomp3Field decompose3_field(const FieldK& theta, const Background& bg);

// d⁷₇ on 1-form fields at the background: *₀ d (α ∧ *₀σ0)
FieldK d77_field(const FieldK& alpha, const Background& bg);

// X(θ) = (7/3 df⁰ + 2 d⁷₇f¹)♯ as a 7-channel coordinate vector field
FieldK gauge_field_X(const FieldK& theta, const Background& bg);

// dτ_σ + d(X(σ−σ0) ⌟ σ)
FieldK gauged_flow_rhs(const FieldK& sigma, const MetricField& mf, const Background& bg);

// the explicit gauge remainder Φ(θ): the gauged flow equals −Δ₀θ − dΦ
FieldK phi_gauge(const FieldK& sigma, const MetricField& mf, const Background& bg);

// H(θ) = *₀ d *₀ (4/3 f⁰σ0 + *₀(f¹∧σ0) − f³), degree 2
FieldK h_operator(const FieldK& theta, const Background& bg);

// --- time integration -----------------------------------------------------------

enum class Integrator { rk4, imex };
enum class RhsKind { plain, gauged };

struct StepPolicy {
  Integrator integrator = Integrator::rk4;
  double cfl = 0.4;
  double dt_fixed = 0.0;  // > 0 overrides the CFL policy
};

struct FlowAbort : std::runtime_error {
  explicit FlowAbort(const std::string& what) : std::runtime_error(what) {}
};

struct FlowState {
  FieldK sigma;
  Background bg;
  double t = 0.0;
  RhsKind kind = RhsKind::gauged;
  StepPolicy policy;
  std::vector<MetricField> scratch;  // reused metric buffers, managed by step()
};

// stable time step for the current metric under the policy
double stable_dt(const FlowState& st, const MetricField& mf);

// advance one step, clamped so that t never exceeds t_stop (t_stop <= 0
// disables the clamp); throws FlowAbort on positivity loss or non-finite
// values
void step(FlowState& st, double t_stop = 0.0);

// --- diagnostics ------------------------------------------------------------------

struct DiagRecord {
  double t = 0.0;
  double torsion_l2 = 0.0;
  double theta_l2 = 0.0;
  double theta_c0 = 0.0;
  double volume = 0.0;
  double closedness_residual = 0.0;
  double zero_mode_drift = 0.0;
  double fitted_rate = 0.0;  // decay rate of ∫|θ|², running fit
};

struct DiagnosticsSeries {
  std::vector<DiagRecord> records;
  double fitted_rate = 0.0;  // final fit over the last half of the samples
  double fit_residual = 0.0;
};

void write_csv(const std::string& path, const DiagnosticsSeries& s);

// --- batch runner ------------------------------------------------------------------

struct FlowConfig {
  Grid grid;
  RhsKind kind = RhsKind::gauged;
  StepPolicy policy;
  std::uint64_t seed = 1;
  double amplitude = 1e-3;
  int mode_min_sq = 1;  // perturbation mode window for |k|²
  int mode_max_sq = 2;
  double t_end = 8.0;
  double torsion_floor = 0.0;  // absolute stop threshold, 0 disables
  int record_every = 5;
  std::string initial_snapshot;  // optional σ1 from file (lattice format)
  bool track_gauge_map = false;  // integrate the diffeomorphism ODE alongside
};

struct GaugeMap {
  Grid grid;
  std::vector<double> disp;  // 7 channels per site: φ(x) = x + u(x)
  double t = 0.0;
};

struct FlowResult {
  DiagnosticsSeries series;
  FieldK sigma_final;
  FieldK sigma_initial;
  Background bg;
  bool aborted = false;
  std::string abort_reason;
  double lambda0 = 0.0;
  bool paper_bound_satisfied = true;  // ∫|θ(t)|² ≤ e^{−λ0 t}∫|θ0|² for t ≥ 0.5
  bool volume_monotone = true;        // nondecreasing within 1e−12 per step
  std::optional<GaugeMap> gauge_map;
};

FlowResult run_flow(const FlowConfig& cfg);

// σ0 + amplitude·dβ with β seeded and band-limited to the given |k|² window
FieldK random_exact_perturbation(const Grid& g, std::uint64_t seed, int mode_min_sq,
                                 int mode_max_sq);

// --- linear parabolic solver ----------------------------------------------------------

// Φ(γ) = c0(x)·A0 γ + Σ_a c1_a(x)·A1 ∂_a γ with fixed mixing matrices and
// smooth scalar coefficient fields
struct LinearPhi {
  FieldK c0;                  // degree-0 field
  std::vector<FieldK> c1;     // one degree-0 field per active axis
  std::vector<double> a0;     // 21×35 row-major
  std::vector<double> a1;     // 21×35 row-major
  double phi1_c0_bound() const;
  static LinearPhi none(const Grid& g);
  static LinearPhi random(const Grid& g, std::uint64_t seed, double amp0, double amp1);
};

FieldK apply_linear_phi(const LinearPhi& phi, const FieldK& gamma);

// one step of ∂γ/∂t + Δγ + d(Φ(γ)) = α on the flat background (exact
// Fourier semigroup for Δ, explicit second-order treatment of the rest);
// returns true when the ellipticity margin was violated (warning)
bool linear_parabolic_step(FieldK& gamma, const LinearPhi& phi, const FieldK& alpha,
                           double dt, double margin);

// --- gauge diffeomorphism ODE -----------------------------------------------------------

// φ̇ = −X(t)(φ), φ(0) = id; X(j) supplies the vector field at time j·dt
GaugeMap integrate_gauge_diffeo(const std::function<const FieldK&(int)>& x_at_step,
                                int nsteps, double dt, const Grid& g);

// (φ*f)(p) = (dφ_p)* f(φ(p)) with periodic multilinear interpolation
FieldK pullback_field(const GaugeMap& map, const FieldK& f);

}  // namespace g2flow::flow
