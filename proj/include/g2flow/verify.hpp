#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "g2flow/flow.hpp"

// The identity battery: every displayed differential identity evaluated as a
// residual on randomized closed backgrounds, plus the scalar maximum
// principle and spectral-gap checks.

namespace g2flow::verify {

using flow::Background;
using lat::FieldK;
using lat::Grid;

// --- adapted differentials -------------------------------------------------------

enum class Adapted {
  d77,    // 1-form -> 1-form, *d(α∧*σ)
  d714,   // 1-form -> Λ²₁₄ part of dα
  d71,    // 1-form -> function, −*d*α
  d17,    // function -> 1-form, df
  d727,   // 1-form -> Λ³₂₇ part of d*(α∧*σ)
  d1427,  // Λ²₁₄ -> Λ³₂₇ part of dβ
  d147,   // Λ²₁₄ -> 1-form, discrete L²-adjoint of d714 on the flat background
};

FieldK adapted_differential(Adapted which, const FieldK& f, const Background& bg);

// --- identity battery ---------------------------------------------------------------

struct IdentityReport {
  std::string name;
  int m = 0;
  int n = 0;
  double L = 0.0;
  double amplitude = 0.0;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct BatteryConfig {
  Grid grid;
  double amplitude = 1e-2;  // background torsion amplitude; 0 gives the flat case
  std::uint64_t seed = 1;
  double tolerance = 1e-6;
};

const std::vector<std::string>& identity_names();
IdentityReport check_identity(const std::string& name, const BatteryConfig& cfg);
std::vector<IdentityReport> run_battery(const BatteryConfig& cfg);
std::string report_json(const std::vector<IdentityReport>& reports);

// --- Moser maximum principle ----------------------------------------------------------

// the dimensional constant of the sup bound, evaluated by partial sums
double moser_constant_cn(int n, int terms = 200);

// smallest C with (∫|f|^{2n/(n−2)})^{(n−2)/n} ≤ C∫|∇f|² + V^{−2/n}∫f²,
// estimated by Rayleigh-quotient maximization over low modes, times safety 4
double estimate_sobolev_cs(const Grid& g, std::uint64_t seed);

enum class MoserProfile { random, bump, constant };

struct MoserConfig {
  Grid grid;
  double b = 0.0;  // zeroth-order coefficient, >= 0
  double T = 1.0;
  double cs = 0.0;  // 0 = estimate from the grid
  std::uint64_t seed = 1;
  int time_samples = 64;
  MoserProfile profile = MoserProfile::random;
};

struct MoserReport {
  double max_ratio = 0.0;  // sup LHS/RHS over sampled times; theorem demands <= 1
  double cs_used = 0.0;
  double cn = 0.0;
  bool pass = false;
};

MoserReport moser_check(const MoserConfig& cfg);

// --- time-interior smoothing probe ------------------------------------------------------

struct SmoothingReport {
  std::vector<double> shell_ratio;  // mode-shell energy at t = eps over t = 0
  std::vector<double> heat_ratio;   // pure-heat prediction e^{−2k²ε}
  double max_factor = 0.0;          // worst multiplicative deviation from heat
  bool pass = false;                // within factor 2 of heat on energetic shells
};

SmoothingReport smoothing_probe(const Grid& g, double eps_time, const flow::LinearPhi& phi,
                                std::uint64_t seed, int steps);

}  // namespace g2flow::verify
