#pragma once

// Closed-form bounds: stick goodness, block niceness, the optimal window
// lengths, the domination density, the typed-particle drift bounds and the
// extinction threshold q0(d). Templated on the scalar so the threshold and
// the 4-block value can be cross-checked in quad precision.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "bslab/stats.hpp"

namespace bslab {

using Quad = boost::multiprecision::cpp_bin_float_quad;

namespace detail {

inline void check_p(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must lie in (0,1)");
}
inline void check_d(int d) {
  if (d < 2) throw std::invalid_argument("degree d must be at least 2");
}

template <class Real>
Real clip01(Real v) {
  return v < Real(0) ? Real(0) : (v > Real(1) ? Real(1) : v);
}

}  // namespace detail

/// P(stick of length L is A-good) with |A| = a.
template <class Real = double>
Real stick_good_lb(Real L, Real q, int a) {
  using std::exp;
  using std::pow;
  if (L < Real(0) || q < Real(0) || q > Real(1) || a < 0) throw std::invalid_argument("stick_good_lb: bad input");
  return exp(-L * (Real(1) - pow(q, a)));
}

/// Unclipped 2-block lower bound.
template <class Real = double>
Real block2_nice_raw(Real L, Real p, int d) {
  using std::exp;
  const Real q = Real(1) - p;
  const Real s = exp(-L * (Real(1) - q * q)) - exp(-L);
  return exp(-Real(2) * L * Real(d - 1) * p) * s * s;
}

template <class Real = double>
Real block2_nice_lb(Real L, Real p, int d) {
  detail::check_d(d);
  return detail::clip01(block2_nice_raw(L, p, d));
}

/// Window length maximising the 2-block bound.
template <class Real = double>
Real hat_L(Real p, int d) {
  using std::log;
  detail::check_d(d);
  const Real q = Real(1) - p;
  return log(Real(1) + q * q / ((q + Real(d)) * p)) / (q * q);
}

template <class Real = double>
Real theta_4block(Real L, Real p, int d) {
  using std::exp;
  detail::check_d(d);
  const Real q = Real(1) - p;
  const Real q2 = q * q, q3 = q2 * q;
  const Real rate = Real(2) * q3 / Real(3) + Real(4) * q2 / Real(3) + Real(4 * d - 6) * q - Real(4 * d - 2);
  const Real a = exp(L * q2 / Real(3)) - Real(1);
  const Real b = exp(L * q3 / Real(3)) - Real(1);
  return exp(rate * L) * a * a * b * b * b * b;
}

template <class Real = double>
Real tilde_L(Real p, int d) {
  using std::log;
  detail::check_d(d);
  return Real(3) * log(Real(1) / (Real(2) * p * Real(d)));
}

/// 1 - 3 sqrt(2(d+1) p ln(1/p)); may leave [0,1] for large p.
template <class Real = double>
Real domination_density_raw(Real p, int d) {
  using std::log;
  using std::sqrt;
  return Real(1) - Real(3) * sqrt(Real(2) * Real(d + 1) * p * log(Real(1) / p));
}

// ---------------------------------------------------------------------------
// Extinction threshold

template <class Real = double>
Real T1(Real q, int d) {
  using std::pow;
  return (q * Real(d + 1) - Real(1)) / (Real(d) * q * q + q * (Real(1) - pow(Real(1) - q, d)));
}

template <class Real = double>
Real T2(Real q, int d) {
  using std::pow;
  return (Real(2) - q * Real(d + 1)) / (Real(1) + Real(d) * (Real(1) - q - q * q) + q * pow(Real(1) - q, d));
}

/// Upper limit on h keeping the m >= 1 type-2 bound monotone in m.
template <class Real = double>
Real h_side_limit(Real q, int d) {
  return Real(1) / (q + Real(d) - Real(d) * q);
}

template <class Real = double>
struct HWindow {
  Real lo{};
  Real hi{};
  bool empty() const { return !(lo < hi); }
  Real midpoint() const { return (lo + hi) / Real(2); }
};

/// Admissible h: both drift bounds negative, h below the side limit, h in
/// (0,1). The type-2 bound is linear in h with slope `type2_h_slope`; T2 is
/// its root, an upper limit only while that slope is positive.
template <class Real = double>
Real type2_h_slope(Real q, int d) {
  using std::pow;
  return Real(1) + Real(d) * (Real(1) - q - q * q) + q * pow(Real(1) - q, d);
}

template <class Real = double>
HWindow<Real> h_window(Real q, int d) {
  detail::check_d(d);
  const Real t1 = T1(q, d);
  HWindow<Real> w;
  w.lo = t1 > Real(0) ? t1 : Real(0);
  w.hi = std::min(Real(1), h_side_limit(q, d));
  const Real slope = type2_h_slope(q, d);
  const Real offset = q * Real(d + 1) - Real(2);
  if (slope > Real(0)) w.hi = std::min(w.hi, T2(q, d));
  else if (!(offset < Real(0))) w.hi = w.lo;
  return w;
}

template <class Real = double>
bool window_open(Real q, int d) {
  return !h_window(q, d).empty();
}

/// sup{q > 1/(d+1): the h window is open}. A coarse scan locates the last
/// admissible grid point, then bisection refines the boundary.
template <class Real = double>
Real q0(int d, int bisection_steps = 200) {
  detail::check_d(d);
  const Real start = Real(1) / Real(d + 1);
  const int grid = 20000;
  const Real step = (Real(1) - start) / Real(grid);
  int last = 0;
  for (int i = 1; i < grid; ++i)
    if (window_open(start + step * Real(i), d)) last = i;
  Real lo = start + step * Real(last), hi = lo + step;
  for (int i = 0; i < bisection_steps; ++i) {
    const Real mid = (lo + hi) / Real(2);
    if (mid == lo || mid == hi) break;
    (window_open(mid, d) ? lo : hi) = mid;
  }
  return (lo + hi) / Real(2);
}

/// Threshold from the simpler argument with h = 1/(d^2+3): smaller root of
/// 2h q^2 - (d+1) q + 1 = 0.
template <class Real = double>
Real q0_simple(int d) {
  using std::sqrt;
  detail::check_d(d);
  const Real h = Real(1) / Real(d * d + 3);
  const Real a = Real(d + 1);
  return Real(1) / (a - Real(4) * h / (a + sqrt(a * a - Real(8) * h)));
}

/// q0(2) as a trigonometric closed form.
inline double q0_closed_form_d2() {
  const double pi = std::acos(-1.0);
  return 7.0 / 3.0 - 2.0 * std::sqrt(19.0) / 3.0 * std::sin(std::atan(9.0 * std::sqrt(107.0) / 137.0) / 3.0 + pi / 6.0);
}

// ---------------------------------------------------------------------------
// Drift bounds for f(n1, n2) = n1 + (1-h) n2

template <class Real = double>
Real type2_progeny_lb(Real q, int d) {
  using std::pow;
  return Real(d) * q * q + q * (Real(1) - pow(Real(1) - q, d));
}

template <class Real = double>
Real drift_type1_bound(Real q, int d, Real h) {
  return q * Real(d + 1) - h * type2_progeny_lb(q, d) - Real(1);
}

/// Type-2 bound with m particle neighbours (before minimising over m).
template <class Real = double>
Real drift_type2_bound_m(Real q, int d, Real h, int m) {
  return q * Real(d + 1) - h * type2_progeny_lb(q, d) - Real(m) * (Real(1) - h * (Real(d) + q - Real(d) * q)) -
         Real(1) + h;
}

/// Type-2 bound at m = 1, valid for every m >= 1 when h < 1/(q+d-dq).
template <class Real = double>
Real drift_type2_bound(Real q, int d, Real h) {
  using std::pow;
  return q * Real(d + 1) - Real(2) + h * (Real(1) + Real(d) * (Real(1) - q - q * q) + q * pow(Real(1) - q, d));
}

/// Upper bound on E[change in #zeros].
inline double n_drift_bound(double q, int d, std::size_t n1, std::size_t n2) {
  if (n1 + n2 == 0) throw std::invalid_argument("n_drift_bound: no zeros");
  return double(d + 1) * q - 1.0 - double(n2) / double(n1 + n2);
}

/// Drift bound of the simpler argument (any max degree d).
inline double simple_drift_bound(double q, int d, double h, std::size_t n1, std::size_t n2) {
  if (n1 + n2 == 0) throw std::invalid_argument("simple_drift_bound: no zeros");
  const double frac = double(n2) / double(n1 + n2);
  return double(d + 1) * q - 1.0 - 2.0 * h * q * q - frac * (1.0 - h * (1.0 + double(d * d) + 2.0 * q * q));
}

/// Bounds on E[change in #type-2] after a type-1 / type-2 update.
inline double type2_change_lb_after_type1(double q) { return 2.0 * q * q; }
inline double type2_change_lb_after_type2(int d) { return -(1.0 + double(d * d)); }

/// Bound on |f(next) - f(now)| for one update on a graph of max degree d.
inline double increment_bound(int d, double h) {
  return double(d + 1) + h * double(d) * double(d - 1) + 1.0;
}

struct DriftBounds {
  double type1 = 0.0;
  std::optional<double> type2;  // omitted when h violates the side condition
  std::string note;
};

inline DriftBounds drift_bounds(double q, int d, double h) {
  detail::check_d(d);
  DriftBounds b;
  b.type1 = drift_type1_bound(q, d, h);
  if (h < h_side_limit(q, d)) b.type2 = drift_type2_bound(q, d, h);
  else b.note = "h >= 1/(q+d-dq): type-2 bound not applicable";
  return b;
}

// ---------------------------------------------------------------------------
// Reports

struct BoundReport {
  std::string formula;
  std::vector<std::pair<std::string, double>> inputs;
  double value = 0.0;
  std::vector<std::string> flags;

  std::string inputs_string() const {
    std::string s;
    for (const auto& [k, v] : inputs) {
      if (!s.empty()) s += ';';
      s += k + '=' + fmt_num(v);
    }
    return s;
  }
  std::string flags_string() const {
    std::string s;
    for (const auto& f : flags) {
      if (!s.empty()) s += ';';
      s += f;
    }
    return s;
  }
};

inline BoundReport report_block2(double L, double p, int d) {
  detail::check_p(p);
  BoundReport r{"block2_nice_lb", {{"L", L}, {"p", p}, {"d", double(d)}}, 0.0, {}};
  const double raw = block2_nice_raw(L, p, d);
  if (raw < 0.0 || raw > 1.0) r.flags.push_back("clipped");
  r.value = detail::clip01(raw);
  return r;
}

inline BoundReport report_theta(double L, double p, int d, bool constant_degree = true) {
  detail::check_p(p);
  BoundReport r{"theta_4block", {{"L", L}, {"p", p}, {"d", double(d)}}, 0.0, {}};
  const double raw = theta_4block(L, p, d);
  if (raw < 0.0 || raw > 1.0) r.flags.push_back("clipped");
  if (!constant_degree) r.flags.push_back("conservative_max_degree");
  r.value = detail::clip01(raw);
  return r;
}

inline BoundReport report_domination(double p, int d) {
  detail::check_p(p);
  BoundReport r{"domination_density", {{"p", p}, {"d", double(d)}}, domination_density_raw(p, d), {}};
  if (r.value < 0.0 || r.value > 1.0) r.flags.push_back("out_of_range");
  return r;
}

inline BoundReport report_stick(double L, double q, int a) {
  return {"stick_good_lb", {{"L", L}, {"q", q}, {"a", double(a)}}, stick_good_lb(L, q, a), {}};
}

inline BoundReport report_hat_L(double p, int d) {
  detail::check_p(p);
  return {"hat_L", {{"p", p}, {"d", double(d)}}, hat_L(p, d), {}};
}

inline BoundReport report_tilde_L(double p, int d) {
  detail::check_p(p);
  BoundReport r{"tilde_L", {{"p", p}, {"d", double(d)}}, tilde_L(p, d), {}};
  if (r.value <= 0.0) r.flags.push_back("nonpositive");
  return r;
}

inline void write_formula_csv(std::ostream& out, const std::vector<BoundReport>& rows) {
  out << "formula,inputs,value,flags\n";
  for (const auto& r : rows) out << r.formula << ',' << r.inputs_string() << ',' << fmt_num(r.value) << ',' << r.flags_string() << '\n';
}

}  // namespace bslab
