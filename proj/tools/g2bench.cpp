// Benchmark comparing the OpenMP kernels against the serial reference
// implementations.
//
//   g2bench [n] [m] [reps]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "g2flow/flow.hpp"
#include "g2flow/parallel.hpp"
#include "g2flow/reference.hpp"

using namespace g2flow;
using namespace g2flow::lat;

namespace {

double time_of(const std::function<void()>& body, int reps) {
  body();  // warm tables
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) body();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count() / reps;
}

void row(const char* name, double serial, double parallel) {
  std::printf("%-22s %10.2f ms %10.2f ms %8.2fx\n", name, serial * 1e3, parallel * 1e3,
              serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
  Grid g;
  g.m = argc > 2 ? std::atoi(argv[2]) : 3;
  g.n = argc > 1 ? std::atoi(argv[1]) : 16;
  g.L = 2.0 * std::numbers::pi;
  const int reps = argc > 3 ? std::atoi(argv[3]) : 5;
  g.validate();

  FieldK sigma = constant_field(g, ext::sigma_std());
  axpy(sigma, 1e-2, flow::random_exact_perturbation(g, 1, 1, 2));
  const MetricField mf = metric_field(sigma);
  const flow::Background bg = flow::Background::from(constant_field(g, ext::sigma_std()));

  std::printf("grid m=%d n=%d (%zu sites), %d threads, %d reps\n", g.m, g.n, g.sites(),
              par::max_threads(), reps);
  std::printf("%-22s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

  std::vector<double> buf(sigma.v.size());
  row("axis derivative",
      time_of([&] { ref::axis_derivative(g, sigma.v.data(), buf.data(), 35, 0); }, reps),
      time_of([&] { lat::axis_derivative(g, sigma.v.data(), buf.data(), 35, 0); }, reps));

  row("exterior differential", time_of([&] { (void)ref::d(sigma); }, reps),
      time_of([&] { (void)lat::d(sigma); }, reps));

  row("metric field", time_of([&] { (void)ref::metric_field(sigma); }, reps),
      time_of([&] { (void)lat::metric_field(sigma); }, reps));

  row("hodge star (deg 3)", time_of([&] { (void)ref::star_field(sigma, mf); }, reps),
      time_of([&] { (void)lat::star_field(sigma, mf); }, reps));

  row("torsion", time_of([&] { (void)ref::torsion(sigma, mf); }, reps),
      time_of([&] { (void)flow::torsion(sigma, mf); }, reps));

  // whole right-hand sides: reference = serial mode of the same kernels
  row("plain flow rhs",
      time_of(
          [&] {
            par::set_enabled(false);
            (void)flow::laplacian_flow_rhs(sigma, mf);
            par::set_enabled(true);
          },
          reps),
      time_of([&] { (void)flow::laplacian_flow_rhs(sigma, mf); }, reps));

  row("gauged flow rhs",
      time_of(
          [&] {
            par::set_enabled(false);
            (void)flow::gauged_flow_rhs(sigma, mf, bg);
            par::set_enabled(true);
          },
          reps),
      time_of([&] { (void)flow::gauged_flow_rhs(sigma, mf, bg); }, reps));

  return 0;
}
