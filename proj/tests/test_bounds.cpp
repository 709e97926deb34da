#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "bslab/bounds.hpp"

using namespace bslab;

TEST(Stick, Values) {
  EXPECT_EQ(stick_good_lb(0.0, 0.4, 3), 1.0);
  EXPECT_EQ(stick_good_lb(5.0, 1.0, 2), 1.0);
  EXPECT_DOUBLE_EQ(stick_good_lb(2.0, 0.9, 1), std::exp(-2.0 * 0.1));
  EXPECT_THROW(stick_good_lb(-1.0, 0.5, 1), std::invalid_argument);
}

TEST(Block2, RangeAndOptimalWindow) {
  const double p = 0.01, L = hat_L(p, 2);
  const double v = block2_nice_lb(L, p, 2);
  EXPECT_GT(v, 0.0);
  EXPECT_LE(v, 1.0);
  // grid-search oracle around the optimum
  for (double dl = -2.0; dl <= 2.0; dl += 1e-3) EXPECT_LE(block2_nice_lb(L + dl, p, 2), v + 1e-9);
  for (double pp : {0.3, 0.05, 1e-3})
    for (int d : {2, 3, 4}) {
      const double Lh = hat_L(pp, d);
      EXPECT_LE(block2_nice_lb(Lh * 1.01, pp, d), block2_nice_lb(Lh, pp, d) + 1e-12);
      EXPECT_LE(block2_nice_lb(Lh * 0.99, pp, d), block2_nice_lb(Lh, pp, d) + 1e-12);
    }
}

TEST(Block2, AsymptoticExpansion) {
  double prev = 0.0;
  for (double p : {1e-3, 1e-4, 1e-5}) {
    const double v = block2_nice_lb(hat_L(p, 2), p, 2);
    const double r = std::abs(v - (1.0 - 2.0 * 3.0 * p * std::log(1.0 / p))) / p;
    EXPECT_LT(r, 5.0) << p;
    if (prev > 0.0) {
      EXPECT_LT(r, prev * 1.5);
    }
    prev = r;
  }
}

TEST(HatL, LogRatioAndMonotone) {
  EXPECT_NEAR(hat_L(1e-6, 2) / std::log(1.0 / (3.0 * 1e-6)), 1.0, 0.05);
  double prev = hat_L(1e-4, 2);
  for (double p = 2e-4; p < 0.1; p *= 1.5) {
    const double cur = hat_L(p, 2);
    EXPECT_LT(cur, prev);
    prev = cur;
  }
}

TEST(Theta, ReferenceValueAndQuad) {
  const double v = theta_4block(14.0, 0.0015, 2);
  EXPECT_GT(v, 0.726);
  EXPECT_LT(v, 0.74);
  const Quad vq = theta_4block<Quad>(Quad(14), Quad("0.0015"), 2);
  EXPECT_NEAR(v, vq.convert_to<double>(), 1e-13);
  EXPECT_LT(theta_4block(1e-6, 0.01, 2), 1e-20);
}

TEST(Theta, AsymptoticAndApproximateOptimality) {
  double prev = 0.0;
  for (double p : {1e-4, 1e-5, 1e-6}) {
    const double v = theta_4block(tilde_L(p, 2), p, 2);
    const double r = std::abs(v - (1.0 - 12.0 * 3.0 * p * std::log(1.0 / p))) / p;
    EXPECT_LT(r, 100.0) << p;
    if (prev > 0.0) {
      EXPECT_LT(r, prev * 1.5);
    }
    prev = r;
  }
  for (double p : {1e-3, 1e-4, 1e-5})
    for (int d : {2, 4}) {
      double best = 0.0;
      for (double L = 0.05; L < 80.0; L += 0.01) best = std::max(best, theta_4block(L, p, d));
      EXPECT_GE(theta_4block(tilde_L(p, d), p, d), 0.98 * best) << p << ' ' << d;
    }
}

TEST(Domination, RangeFlag) {
  // 1 - 3 sqrt(6e-6 ln 1e6) = 0.97269...
  EXPECT_NEAR(domination_density_raw(1e-6, 2), 1.0 - 3.0 * std::sqrt(6e-6 * std::log(1e6)), 1e-15);
  EXPECT_GT(domination_density_raw(1e-6, 2), 0.97);
  EXPECT_GT(domination_density_raw(1e-8, 2), 0.996);
  EXPECT_TRUE(report_domination(1e-6, 2).flags.empty());
  const auto bad = report_domination(0.1, 4);
  ASSERT_EQ(bad.flags.size(), 1u);
  EXPECT_EQ(bad.flags[0], "out_of_range");
  // Density stays below the 2-block asymptote 1 - 2(d+1) p ln(1/p).
  for (double p = 1e-8; p < 1e-2; p *= 3)
    for (int d : {2, 3, 4})
      EXPECT_LT(domination_density_raw(p, d), 1.0 - 2.0 * (d + 1) * p * std::log(1.0 / p) + 1e-12);
}

TEST(Threshold, T1T2AndWindow) {
  for (int d : {2, 3, 4}) EXPECT_NEAR(T1(1.0 / (d + 1), d), 0.0, 1e-15);
  for (int d : {2, 4}) {
    const double q = 1.0 / (d + 1);
    EXPECT_GT(T2(q, d), 0.0);
    EXPECT_GT(h_side_limit(q, d), 0.0);
    EXPECT_FALSE(h_window(q, d).empty());
  }
  EXPECT_TRUE(h_window(0.9, 2).empty());
}

TEST(Threshold, Q0) {
  EXPECT_NEAR(q0(2), 0.412, 5e-4);
  EXPECT_NEAR(q0(2), q0_closed_form_d2(), 1e-9);
  EXPECT_NEAR(q0(4), 0.2145549758, 1e-9);
  EXPECT_NEAR(q0<Quad>(4).convert_to<double>(), q0(4), 1e-11);
  EXPECT_NEAR(q0<Quad>(2).convert_to<double>(), q0_closed_form_d2(), 1e-12);
  for (int d = 2; d <= 10; ++d) {
    EXPECT_GT(q0(d), 1.0 / (d + 1));
    EXPECT_GT(q0_simple(d), 1.0 / (d + 1));
    EXPECT_LT(q0_simple(d), q0(d));
    const double h = 1.0 / (d * d + 3);
    EXPECT_GT(h, 0.0);
    EXPECT_LT(h, 1.0);
    // q0_simple solves (d+1) q - 1 - 2 h q^2 = 0
    const double qs = q0_simple(d);
    EXPECT_NEAR((d + 1) * qs - 1 - 2 * h * qs * qs, 0.0, 1e-14);
    // just above q0 the window closes
    EXPECT_TRUE(h_window(q0(d) + 1e-6, d).empty());
    EXPECT_FALSE(h_window(q0(d) - 1e-6, d).empty());
  }
  EXPECT_NEAR(q0_simple(2), 0.34465, 1e-5);
}

TEST(Drift, BoundsInsideAndOutsideRegime) {
  for (int d : {2, 4}) {
    for (double frac : {0.2, 0.5, 0.9}) {
      const double q = 1.0 / (d + 1) + frac * (q0(d) - 1.0 / (d + 1));
      const double h = h_window(q, d).midpoint();
      const auto b = drift_bounds(q, d, h);
      EXPECT_LT(b.type1, 0.0);
      ASSERT_TRUE(b.type2.has_value());
      EXPECT_LT(*b.type2, 0.0);
      // m = 1 is the worst case of the m-family
      for (int m = 1; m <= d; ++m) EXPECT_LE(drift_type2_bound_m(q, d, h, m), *b.type2 + 1e-12);
      EXPECT_NEAR(drift_type2_bound_m(q, d, h, 1), *b.type2, 1e-12);
    }
  }
  const double q = 2.0 / 3.0;
  const auto w = h_window(q, 2);
  const double h = w.empty() ? 0.5 : w.midpoint();
  const auto b = drift_bounds(q, 2, h);
  EXPECT_TRUE(b.type1 >= 0.0 || !b.type2 || *b.type2 >= 0.0);
  EXPECT_DOUBLE_EQ(n_drift_bound(0.3, 2, 4, 0), 3 * 0.3 - 1);
  EXPECT_FALSE(drift_bounds(0.3, 2, 0.99).type2.has_value());
}

TEST(Drift, SimpleArgument) {
  for (int d : {2, 3, 4}) {
    const double h = 1.0 / (d * d + 3);
    const double q = 0.5 * (1.0 / (d + 1) + q0_simple(d));
    for (std::size_t n2 = 0; n2 <= 10; ++n2) EXPECT_LT(simple_drift_bound(q, d, h, 10 - n2 + 1, n2), 0.0);
  }
}

TEST(Report, FormulaCsv) {
  std::ostringstream out;
  write_formula_csv(out, {report_block2(hat_L(0.01, 2), 0.01, 2), report_domination(0.1, 4)});
  const auto s = out.str();
  EXPECT_EQ(s.rfind("formula,inputs,value,flags\nblock2_nice_lb,L=", 0), 0u);
  EXPECT_NE(s.find(",out_of_range\n"), std::string::npos);
  EXPECT_TRUE(report_block2(50.0, 0.5, 4).value >= 0.0);
}
