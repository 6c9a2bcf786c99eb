#pragma once

#include <cstddef>
#include <vector>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace g2flow::par {

// Runtime switch so tests can force the serial path on the same build.
bool enabled();
void set_enabled(bool on);
int max_threads();

// Data-parallel loop over [0, count). Bodies must be independent per index.
template <class F>
void for_each(std::size_t count, F&& body) {
#if defined(_OPENMP)
  if (enabled()) {
    #pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(count); ++i)
      body(static_cast<std::size_t>(i));
    return;
  }
#endif
  for (std::size_t i = 0; i < count; ++i) body(i);
}

// Deterministic sum reduction: fixed chunking independent of thread count,
// partials combined in index order, so results do not depend on scheduling.
template <class F>
double sum(std::size_t count, F&& term) {
  constexpr std::size_t kChunks = 256;
  if (count == 0) return 0.0;
  const std::size_t chunks = count < kChunks ? count : kChunks;
  const std::size_t per = (count + chunks - 1) / chunks;
  std::vector<double> partial(chunks, 0.0);
  for_each(chunks, [&](std::size_t c) {
    const std::size_t lo = c * per;
    const std::size_t hi = lo + per < count ? lo + per : count;
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += term(i);
    partial[c] = s;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

template <class F>
double max(std::size_t count, F&& term) {
  constexpr std::size_t kChunks = 256;
  if (count == 0) return 0.0;
  const std::size_t chunks = count < kChunks ? count : kChunks;
  const std::size_t per = (count + chunks - 1) / chunks;
  std::vector<double> partial(chunks, 0.0);
  for_each(chunks, [&](std::size_t c) {
    const std::size_t lo = c * per;
    const std::size_t hi = lo + per < count ? lo + per : count;
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double t = term(i);
      if (t > s) s = t;
    }
    partial[c] = s;
  });
  double total = 0.0;
  for (double p : partial)
    if (p > total) total = p;
  return total;
}

}  // namespace g2flow::par
