#pragma once

#include <vector>

#include "pbs/types.hpp"

namespace pbs {

/// B-spline basis description.
///
/// Open (cyclic = false): clamped knot vector on [lo, hi] with `knots` the
/// interior breakpoints, strictly inside (lo, hi). Basis count is
/// knots.size() + degree + 1.
///
/// Cyclic: `knots` are the breakpoints of one period inside [lo, hi), where
/// hi = lo + period. Basis count equals knots.size(), which must exceed the
/// degree. Function q is supported on breakpoints q .. q + degree + 1, taken
/// modulo the period.
struct SplineBasisSpec {
  int degree = 3;
  std::vector<double> knots;
  double lo = 0.0;
  double hi = 1.0;
  bool cyclic = false;

  /// Uniformly spaced interior knots yielding `basis_count` functions.
  static SplineBasisSpec open_uniform(int degree, int basis_count, double lo, double hi);
  /// `basis_count` uniformly spaced breakpoints starting at lo.
  static SplineBasisSpec cyclic_uniform(int degree, int basis_count, double lo, double period);

  int basis_count() const noexcept;
  double period() const noexcept { return hi - lo; }
};

void validate_spline(const SplineBasisSpec& spec);

/// Cox-de Boor values of every basis function at x; x must lie in [lo, hi].
Vector bspline_basis(const SplineBasisSpec& spec, double x);

/// Periodic basis values; any real x is reduced modulo the period.
Vector cyclic_bspline_basis(const SplineBasisSpec& spec, double x);

/// Dispatches on spec.cyclic.
Vector evaluate_basis(const SplineBasisSpec& spec, double x);

}  // namespace pbs
