#include "pbs/spline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pbs/error.hpp"

namespace pbs {

namespace {

// Nonzero basis functions N_{span-degree..span} at x for knot vector `t`
// (The NURBS Book, algorithm A2.2). t[span] <= x <= t[span + 1].
std::vector<double> nonzero_basis(const std::vector<double>& t, std::size_t span, int degree,
                                  double x) {
  const auto d = static_cast<std::size_t>(degree);
  std::vector<double> n(d + 1, 0.0), left(d + 1, 0.0), right(d + 1, 0.0);
  n[0] = 1.0;
  for (std::size_t j = 1; j <= d; ++j) {
    left[j] = x - t[span + 1 - j];
    right[j] = t[span + j] - x;
    double saved = 0.0;
    for (std::size_t r = 0; r < j; ++r) {
      const double temp = n[r] / (right[r + 1] + left[j - r]);
      n[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    n[j] = saved;
  }
  return n;
}

}  // namespace

SplineBasisSpec SplineBasisSpec::open_uniform(int degree, int basis_count, double lo, double hi) {
  SplineBasisSpec spec;
  spec.degree = degree;
  spec.lo = lo;
  spec.hi = hi;
  spec.cyclic = false;
  const int interior = basis_count - degree - 1;
  if (interior < 0) fail(ErrorCode::InvalidArgument, "basis count must exceed the degree");
  for (int k = 1; k <= interior; ++k) spec.knots.push_back(lo + (hi - lo) * k / (interior + 1));
  validate_spline(spec);
  return spec;
}

SplineBasisSpec SplineBasisSpec::cyclic_uniform(int degree, int basis_count, double lo,
                                                double period) {
  SplineBasisSpec spec;
  spec.degree = degree;
  spec.lo = lo;
  spec.hi = lo + period;
  spec.cyclic = true;
  for (int k = 0; k < basis_count; ++k) spec.knots.push_back(lo + period * k / basis_count);
  validate_spline(spec);
  return spec;
}

int SplineBasisSpec::basis_count() const noexcept {
  return cyclic ? static_cast<int>(knots.size()) : static_cast<int>(knots.size()) + degree + 1;
}

void validate_spline(const SplineBasisSpec& spec) {
  if (spec.degree < 0 || spec.degree > 5) fail(ErrorCode::InvalidArgument, "spline degree must be in 0..5");
  if (!std::isfinite(spec.lo) || !std::isfinite(spec.hi) || !(spec.lo < spec.hi))
    fail(ErrorCode::InvalidArgument, "spline domain must satisfy lo < hi");
  for (std::size_t k = 0; k < spec.knots.size(); ++k) {
    const double t = spec.knots[k];
    if (k > 0 && !(spec.knots[k - 1] < t))
      fail(ErrorCode::InvalidArgument, "spline knots must be strictly increasing");
    const bool inside = spec.cyclic ? (t >= spec.lo && t < spec.hi) : (t > spec.lo && t < spec.hi);
    if (!inside) fail(ErrorCode::InvalidArgument, "spline knot outside the domain");
  }
  if (spec.cyclic && static_cast<int>(spec.knots.size()) <= spec.degree)
    fail(ErrorCode::InvalidArgument, "cyclic basis needs more breakpoints than its degree");
}

Vector bspline_basis(const SplineBasisSpec& spec, double x) {
  if (spec.cyclic) fail(ErrorCode::InvalidArgument, "bspline_basis called with a cyclic spec");
  validate_spline(spec);
  if (!(x >= spec.lo && x <= spec.hi)) {
    std::ostringstream msg;
    msg << "x=" << x << " outside spline domain [" << spec.lo << ", " << spec.hi << "]";
    fail(ErrorCode::InvalidArgument, msg.str());
  }
  const int d = spec.degree;
  const int count = spec.basis_count();
  std::vector<double> t;
  t.reserve(static_cast<std::size_t>(count + d + 1));
  t.insert(t.end(), static_cast<std::size_t>(d + 1), spec.lo);
  t.insert(t.end(), spec.knots.begin(), spec.knots.end());
  t.insert(t.end(), static_cast<std::size_t>(d + 1), spec.hi);

  // Span index s in [d, count - 1] with t[s] <= x < t[s + 1]; x = hi uses the last span.
  std::size_t span = static_cast<std::size_t>(count - 1);
  if (x < spec.hi) {
    const auto it = std::upper_bound(t.begin() + d, t.begin() + count, x);
    span = static_cast<std::size_t>(it - t.begin()) - 1;
  }
  const auto values = nonzero_basis(t, span, d, x);
  Vector out = Vector::Zero(count);
  for (int r = 0; r <= d; ++r) out(static_cast<Index>(span) - d + r) = values[static_cast<std::size_t>(r)];
  return out;
}

Vector cyclic_bspline_basis(const SplineBasisSpec& spec, double x) {
  if (!spec.cyclic) fail(ErrorCode::InvalidArgument, "cyclic_bspline_basis needs a cyclic spec");
  validate_spline(spec);
  if (!std::isfinite(x)) fail(ErrorCode::InvalidArgument, "x must be finite");
  const int d = spec.degree;
  const int q = spec.basis_count();
  const double period = spec.period();
  const double origin = spec.knots.front();

  double xw = std::fmod(x - origin, period);
  if (xw < 0.0) xw += period;
  if (xw >= period) xw = 0.0;
  xw += origin;

  // Extended knots tau_k = knots[k mod q] + period * floor(k / q) for
  // k = -d .. q + d, stored at offset d.
  std::vector<double> tau(static_cast<std::size_t>(q + 2 * d + 1));
  for (int k = -d; k <= q + d; ++k) {
    const int wrapped = ((k % q) + q) % q;
    const int turns = (k - wrapped) / q;
    tau[static_cast<std::size_t>(k + d)] = spec.knots[static_cast<std::size_t>(wrapped)] + period * turns;
  }
  // Span s in [0, q - 1] with tau_s <= xw < tau_{s+1}.
  int s = q - 1;
  for (int k = 0; k < q; ++k) {
    if (xw < tau[static_cast<std::size_t>(k + 1 + d)]) {
      s = k;
      break;
    }
  }
  const auto values = nonzero_basis(tau, static_cast<std::size_t>(s + d), d, xw);
  Vector out = Vector::Zero(q);
  for (int r = 0; r <= d; ++r) {
    const int k = s - d + r;
    out(((k % q) + q) % q) += values[static_cast<std::size_t>(r)];
  }
  return out;
}

Vector evaluate_basis(const SplineBasisSpec& spec, double x) {
  return spec.cyclic ? cyclic_bspline_basis(spec, x) : bspline_basis(spec, x);
}

}  // namespace pbs
