#pragma once

#include "g2flow/lattice.hpp"

// Plain serial reference implementations of the hot kernels. They are coded
// independently of the OpenMP paths (the spectral derivative goes through an
// explicit complex DFT instead of the precomputed real matrix) and exist so
// the parallel kernels can be tested against them and benchmarked.

namespace g2flow::ref {

using lat::FieldK;
using lat::Grid;
using lat::MetricField;

void axis_derivative(const Grid& g, const double* in, double* out, int ncomp, int axis);
FieldK d(const FieldK& f);
FieldK star_field(const FieldK& f, const MetricField& mf, int orient = +1);
FieldK torsion(const FieldK& sigma, const MetricField& mf);
MetricField metric_field(const FieldK& sigma);
double l2_inner(const FieldK& a, const FieldK& b, const MetricField& mf);

}  // namespace g2flow::ref
