// g2flow: configuration-driven batch runner for the G2 lattice laboratory.
//
//   g2flow <check-identities|flow|spectrum|moser|heat> --config <path> [--out <path>]
//
// Exit codes: 0 pass, 1 check/run failure, 2 invalid input.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "g2flow/flow.hpp"
#include "g2flow/verify.hpp"

using nlohmann::json;
using namespace g2flow;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("malformed config: " + std::string(e.what()));
  }
}

template <class T>
T field_or(const json& j, const char* section, const char* key, T fallback) {
  if (!j.contains(section)) return fallback;
  const json& s = j.at(section);
  if (!s.contains(key)) return fallback;
  try {
    return s.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config field ") + section + "." + key + ": " + e.what());
  }
}

lat::Grid parse_grid(const json& j) {
  lat::Grid g;
  g.m = field_or(j, "grid", "m", 3);
  g.n = field_or(j, "grid", "n", 16);
  g.L = field_or(j, "grid", "L", 6.283185307179586476925286766559);
  const std::string deriv = field_or<std::string>(j, "grid", "derivative", "spectral");
  if (deriv == "spectral")
    g.scheme = lat::Scheme::spectral;
  else if (deriv == "forward-difference")
    g.scheme = lat::Scheme::forward_diff;
  else
    throw ConfigError("grid.derivative must be 'spectral' or 'forward-difference'");
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return g;
}

json grid_json(const lat::Grid& g) {
  return {{"m", g.m},
          {"n", g.n},
          {"L", g.L},
          {"derivative", g.scheme == lat::Scheme::spectral ? "spectral" : "forward-difference"}};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open output file: " + path);
  os << text << '\n';
}

int cmd_check_identities(const json& cfg, const std::string& out) {
  verify::BatteryConfig bc;
  bc.grid = parse_grid(cfg);
  bc.seed = field_or<std::uint64_t>(cfg, "perturbation", "seed", 1);
  const std::string background = field_or<std::string>(cfg, "battery", "background", "torsioned");
  if (background == "torsioned")
    bc.amplitude = field_or(cfg, "battery", "amplitude", 1e-2);
  else if (background == "flat")
    bc.amplitude = 0.0;
  else
    throw ConfigError("battery.background must be 'torsioned' or 'flat'");
  bc.tolerance = field_or(cfg, "battery", "tolerance", background == "flat" ? 1e-10 : 1e-6);

  const auto reports = verify::run_battery(bc);
  json out_doc;
  out_doc["config"] = {{"grid", grid_json(bc.grid)},
                       {"battery",
                        {{"background", background},
                         {"amplitude", bc.amplitude},
                         {"tolerance", bc.tolerance},
                         {"seed", bc.seed}}}};
  out_doc["identities"] = json::parse(verify::report_json(reports));
  bool all = true;
  for (const auto& r : reports) all = all && r.pass;
  out_doc["pass"] = all;
  const std::string path = out.empty() ? "identities.json" : out;
  write_text(path, out_doc.dump(2));
  std::printf("%zu identities checked, %s -> %s\n", reports.size(), all ? "pass" : "FAIL",
              path.c_str());
  return all ? 0 : 1;
}

int cmd_flow(const json& cfg, const std::string& out) {
  flow::FlowConfig fc;
  fc.grid = parse_grid(cfg);
  const std::string gauge = field_or<std::string>(cfg, "flow", "gauge", "gauged");
  if (gauge == "gauged")
    fc.kind = flow::RhsKind::gauged;
  else if (gauge == "plain")
    fc.kind = flow::RhsKind::plain;
  else
    throw ConfigError("flow.gauge must be 'plain' or 'gauged'");
  fc.t_end = field_or(cfg, "flow", "t_end", 8.0);
  fc.torsion_floor = field_or(cfg, "flow", "floor", 0.0);
  if (fc.t_end < 0.0) throw ConfigError("flow.t_end must be nonnegative");
  fc.seed = field_or<std::uint64_t>(cfg, "perturbation", "seed", 1);
  fc.amplitude = field_or(cfg, "perturbation", "amplitude", 1e-3);
  fc.mode_min_sq = field_or(cfg, "perturbation", "mode_min_sq", 1);
  fc.mode_max_sq = field_or(cfg, "perturbation", "mode_max_sq", 2);
  if (fc.amplitude <= 0.0 || fc.amplitude > 0.2)
    throw ConfigError("perturbation.amplitude must be in (0, 0.2]");
  const std::string integ = field_or<std::string>(cfg, "scheme", "integrator", "rk4");
  if (integ == "rk4")
    fc.policy.integrator = flow::Integrator::rk4;
  else if (integ == "imex")
    fc.policy.integrator = flow::Integrator::imex;
  else
    throw ConfigError("scheme.integrator must be 'rk4' or 'imex'");
  fc.policy.cfl = field_or(cfg, "scheme", "cfl", fc.policy.integrator == flow::Integrator::rk4 ? 0.4 : 0.1);
  fc.policy.dt_fixed = field_or(cfg, "scheme", "dt", 0.0);
  fc.record_every = field_or(cfg, "scheme", "record_every", 5);
  fc.initial_snapshot = field_or<std::string>(cfg, "flow", "initial_snapshot", "");

  const std::string summary_path = out.empty() ? "flow_summary.json" : out;
  const std::string csv_path = field_or<std::string>(cfg, "output", "csv", summary_path + ".csv");

  json summary;
  summary["config"] = {
      {"grid", grid_json(fc.grid)},
      {"flow", {{"gauge", gauge}, {"t_end", fc.t_end}, {"floor", fc.torsion_floor}}},
      {"scheme",
       {{"integrator", integ},
        {"cfl", fc.policy.cfl},
        {"dt", fc.policy.dt_fixed},
        {"record_every", fc.record_every}}},
      {"perturbation",
       {{"seed", fc.seed},
        {"amplitude", fc.amplitude},
        {"mode_min_sq", fc.mode_min_sq},
        {"mode_max_sq", fc.mode_max_sq}}}};

  if (fc.t_end == 0.0) {
    flow::DiagnosticsSeries empty;
    flow::write_csv(csv_path, empty);
    summary["records"] = 0;
    summary["fitted_rate"] = 0.0;
    write_text(summary_path, summary.dump(2));
    std::printf("t_end = 0: empty series -> %s\n", csv_path.c_str());
    return 0;
  }

  const flow::FlowResult res = flow::run_flow(fc);
  flow::write_csv(csv_path, res.series);

  summary["records"] = res.series.records.size();
  summary["fitted_rate"] = res.series.fitted_rate;
  summary["fit_residual"] = res.series.fit_residual;
  summary["lambda0"] = res.lambda0;
  summary["paper_bound_satisfied"] = res.paper_bound_satisfied;
  summary["volume_monotone"] = res.volume_monotone;
  if (!res.series.records.empty()) {
    summary["final_torsion_l2"] = res.series.records.back().torsion_l2;
    summary["initial_torsion_l2"] = res.series.records.front().torsion_l2;
    summary["zero_mode_drift"] = res.series.records.back().zero_mode_drift;
    summary["final_closedness_residual"] = res.series.records.back().closedness_residual;
  }
  summary["aborted"] = res.aborted;
  if (res.aborted) {
    summary["abort_reason"] = res.abort_reason;
    const std::string snap = summary_path + ".lastgood.g2f";
    lat::save_field(snap, res.sigma_final);
    summary["last_good_snapshot"] = snap;
  }
  write_text(summary_path, summary.dump(2));
  std::printf("flow (%s, %s): %zu records, fitted rate %.4f -> %s\n", gauge.c_str(), integ.c_str(),
              res.series.records.size(), res.series.fitted_rate, summary_path.c_str());
  return res.aborted ? 1 : 0;
}

int cmd_spectrum(const json& cfg, const std::string& out) {
  const lat::Grid g = parse_grid(cfg);
  json doc;
  doc["config"] = {{"grid", grid_json(g)}};
  doc["lambda0"] = lat::spectrum_lambda0(g);
  const std::string path = out.empty() ? "spectrum.json" : out;
  write_text(path, doc.dump(2));
  std::printf("lambda0 = %.12g -> %s\n", doc["lambda0"].get<double>(), path.c_str());
  return 0;
}

int cmd_moser(const json& cfg, const std::string& out) {
  verify::MoserConfig mc;
  mc.grid = parse_grid(cfg);
  mc.b = field_or(cfg, "moser", "b", 0.0);
  mc.T = field_or(cfg, "moser", "T", 1.0);
  mc.cs = field_or(cfg, "moser", "cs", 0.0);
  mc.time_samples = field_or(cfg, "moser", "time_samples", 64);
  const int seeds = field_or(cfg, "moser", "seeds", 50);
  const std::string profile = field_or<std::string>(cfg, "moser", "profile", "random");
  if (profile == "random")
    mc.profile = verify::MoserProfile::random;
  else if (profile == "bump")
    mc.profile = verify::MoserProfile::bump;
  else if (profile == "constant")
    mc.profile = verify::MoserProfile::constant;
  else
    throw ConfigError("moser.profile must be random|bump|constant");
  if (mc.b < 0.0 || mc.T <= 0.0 || seeds < 1) throw ConfigError("bad moser parameters");

  double worst = 0.0;
  bool all = true;
  double cs_used = 0.0, cn = 0.0;
  for (int s = 0; s < seeds; ++s) {
    mc.seed = static_cast<std::uint64_t>(s + 1);
    const verify::MoserReport r = verify::moser_check(mc);
    worst = std::max(worst, r.max_ratio);
    all = all && r.pass;
    cs_used = r.cs_used;
    cn = r.cn;
  }
  json doc;
  doc["config"] = {{"grid", grid_json(mc.grid)},
                   {"moser",
                    {{"b", mc.b},
                     {"T", mc.T},
                     {"profile", profile},
                     {"seeds", seeds},
                     {"time_samples", mc.time_samples}}}};
  doc["max_ratio"] = worst;
  doc["cs_used"] = cs_used;
  doc["cn"] = cn;
  doc["pass"] = all;
  const std::string path = out.empty() ? "moser.json" : out;
  write_text(path, doc.dump(2));
  std::printf("moser: max ratio %.3e over %d seeds, %s -> %s\n", worst, seeds,
              all ? "pass" : "FAIL", path.c_str());
  return all ? 0 : 1;
}

int cmd_heat(const json& cfg, const std::string& out) {
  const lat::Grid g = parse_grid(cfg);
  const int steps = field_or(cfg, "heat", "steps", 1000);
  const double dt = field_or(cfg, "heat", "dt", 2e-3);
  const double margin = field_or(cfg, "heat", "margin", 0.1);
  const double amp0 = field_or(cfg, "heat", "phi_amp0", 0.05);
  const double amp1 = field_or(cfg, "heat", "phi_amp1", 0.02);
  const double alpha_amp = field_or(cfg, "heat", "alpha_amplitude", 0.1);
  const std::uint64_t seed = field_or<std::uint64_t>(cfg, "perturbation", "seed", 1);
  if (steps < 1 || dt <= 0.0) throw ConfigError("bad heat parameters");

  const flow::LinearPhi phi = flow::LinearPhi::random(g, seed, amp0, amp1);
  lat::FieldK gamma = flow::random_exact_perturbation(g, seed + 1, 1, 3);
  lat::FieldK alpha = flow::random_exact_perturbation(g, seed + 2, 1, 2);
  for (double& x : alpha.v) x *= alpha_amp;

  const lat::MetricField flat = lat::MetricField::flat_field(g);
  double worst_closed = 0.0;
  bool warned = false;
  for (int i = 0; i < steps; ++i)
    warned = flow::linear_parabolic_step(gamma, phi, alpha, dt, margin) || warned;
  worst_closed = lat::c0_norm(lat::d(gamma), flat);
  const ext::KForm zm = lat::zero_mode(gamma);
  double zmax = 0.0;
  for (int c = 0; c < 35; ++c) zmax = std::max(zmax, std::abs(zm[c]));

  json doc;
  doc["config"] = {{"grid", grid_json(g)},
                   {"heat",
                    {{"steps", steps},
                     {"dt", dt},
                     {"margin", margin},
                     {"phi_amp0", amp0},
                     {"phi_amp1", amp1},
                     {"alpha_amplitude", alpha_amp},
                     {"seed", seed}}}};
  doc["closedness_residual"] = worst_closed;
  doc["zero_mode"] = zmax;
  doc["phi1_bound"] = phi.phi1_c0_bound();
  doc["margin_warning"] = warned;
  const bool pass = worst_closed <= 1e-10 && zmax <= 1e-12;
  doc["pass"] = pass;
  const std::string path = out.empty() ? "heat.json" : out;
  write_text(path, doc.dump(2));
  std::printf("heat: d-residual %.3e, zero mode %.3e, %s -> %s\n", worst_closed, zmax,
              pass ? "pass" : "FAIL", path.c_str());
  return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for closed G2-structures on flat periodic domains"};
  app.require_subcommand(1);

  std::string config_path, out_path;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--out", out_path, "output path for the JSON report");
  };
  CLI::App* c_id = app.add_subcommand("check-identities", "run the differential-identity battery");
  CLI::App* c_flow = app.add_subcommand("flow", "integrate the (gauged) Laplacian flow");
  CLI::App* c_spec = app.add_subcommand("spectrum", "spectral gap of the flat Hodge Laplacian");
  CLI::App* c_moser = app.add_subcommand("moser", "scalar L1 maximum-principle check");
  CLI::App* c_heat = app.add_subcommand("heat", "linear parabolic solver preservation check");
  for (CLI::App* sub : {c_id, c_flow, c_spec, c_moser, c_heat}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    const json cfg = load_config(config_path);
    if (c_id->parsed()) return cmd_check_identities(cfg, out_path);
    if (c_flow->parsed()) return cmd_flow(cfg, out_path);
    if (c_spec->parsed()) return cmd_spectrum(cfg, out_path);
    if (c_moser->parsed()) return cmd_moser(cfg, out_path);
    if (c_heat->parsed()) return cmd_heat(cfg, out_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
