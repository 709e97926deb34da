#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "bslab/drift.hpp"
#include "bslab/exact.hpp"

using namespace bslab;

TEST(Classify, Examples) {
  const Graph g = cycle_graph(6);
  EXPECT_EQ(classify_zeros(g, Configuration::all_ones(6)).census, (TypedCensus{0, 0}));
  EXPECT_EQ(classify_zeros(g, Configuration::parse("011011")).census, (TypedCensus{2, 0}));
  const auto c = classify_zeros(g, Configuration::parse("001111"));
  EXPECT_EQ(c.census, (TypedCensus{0, 2}));
  EXPECT_EQ(c.labels[0], 2);
  EXPECT_EQ(c.labels[2], 0);
}

TEST(Lyapunov, Values) {
  EXPECT_EQ(lyapunov_f({0, 0}, 0.3), 0.0);
  EXPECT_EQ(lyapunov_f({3, 0}, 0.7), 3.0);
  EXPECT_DOUBLE_EQ(lyapunov_f({0, 2}, 0.25), 1.5);
}

TEST(ChooseH, Window) {
  const double h = choose_h(1.0 / 3.0, 2);
  EXPECT_GT(h, 0.0);
  EXPECT_LT(h, 1.0);
  EXPECT_THROW(choose_h(q0(2) + 0.01, 2), std::domain_error);
  for (double q = 0.34; q < q0(2) - 1e-3; q += 0.01) EXPECT_LT(choose_h(q, 2), h_side_limit(q, 2));
}

TEST(ExactDrift, SingleZeroTotalCount) {
  const Graph g = cycle_graph(8);
  const double q = 0.3;
  const auto r = exact_drift(g, Configuration::parse("01111111"), ModelParams::from_q(q), 0.2);
  EXPECT_NEAR(r.drift_N, 3 * q - 1, 1e-14);
  ASSERT_EQ(r.updates.size(), 1u);
  EXPECT_EQ(r.updates[0].type, 1);
  EXPECT_GE(r.updates[0].x2, 2 * q * q + q * (1 - std::pow(1 - q, 2)) - 1e-14);
  EXPECT_THROW(exact_drift(g, Configuration::all_ones(8), ModelParams::from_q(q), 0.2), std::invalid_argument);
}

// Against a brute-force kernel: E f(next) computed from the exact embedded
// transition probabilities.
TEST(ExactDrift, MatchesKernelExpectation) {
  const Graph g = cycle_graph(7);
  const ModelParams params = ModelParams::from_q(0.35);
  const auto tm = build_kernel(g, params);
  const double h = 0.3;
  for (std::size_t s : {0u, 5u, 37u, 100u, 126u}) {
    const auto c = Configuration::from_index(s, 7);
    const double f0 = lyapunov_f(classify_zeros(g, c).census, h);
    double expected = 0.0;
    const auto row = tm.row(s);
    for (std::size_t i = 0; i < row.cols.size(); ++i)
      expected += row.vals[i] * lyapunov_f(classify_zeros(g, Configuration::from_index(row.cols[i], 7)).census, h);
    EXPECT_NEAR(exact_drift(g, c, params, h).drift, expected - f0, 1e-13) << s;
  }
}

TEST(ExactDrift, MonteCarloOracle) {
  const Graph g = cycle_graph(8);
  const ModelParams params = ModelParams::from_q(0.3);
  const double h = 0.2;
  const auto c0 = Configuration::parse("00111111");
  const double exact = exact_drift(g, c0, params, h).drift;
  const double f0 = lyapunov_f(classify_zeros(g, c0).census, h);
  auto rng = aux_stream(31337);
  const int n = 1'000'000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto next = step_discrete(g, c0, params, rng);
    const double inc = lyapunov_f(classify_zeros(g, next).census, h) - f0;
    s += inc;
    s2 += inc * inc;
  }
  const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
  EXPECT_LT(std::abs(mean - exact), 4 * se);
}

TEST(Scan, ExtinctionRegimeCycle) {
  const Graph g = cycle_graph(8);
  const double q = 0.30, h = choose_h(q, 2);
  std::vector<DriftRow> rows;
  const auto rep = verify_all_bounds(g, ModelParams::from_q(q), h, &rows);
  EXPECT_TRUE(rep.bounds_hold());
  EXPECT_TRUE(rep.negative());
  EXPECT_GT(rep.epsilon(), 0.0);
  EXPECT_EQ(rep.configurations, 255u);
  EXPECT_LE(rep.max_abs_increment, rep.increment_bound);
  EXPECT_LT(rep.linearity_error, 1e-12);

  std::ostringstream csv;
  write_drift_csv(csv, rep, rows, 8);
  EXPECT_EQ(csv.str().rfind("graph,q,h,config_bits,cond_type,m,exact_drift,bound,margin\ncycle:8,0.3,", 0), 0u);
}

TEST(Scan, ExtinctionRegimeTorus) {
  const Graph g = torus2d_graph(3, 3);
  const double q = 0.15, h = choose_h(q, 4);
  const auto rep = verify_all_bounds(g, ModelParams::from_q(q), h);
  EXPECT_TRUE(rep.bounds_hold());
  EXPECT_TRUE(rep.negative());
  EXPECT_LE(rep.max_abs_increment, rep.increment_bound);
}

TEST(Scan, SurvivalRegimeHasPositiveDrift) {
  const auto rep = verify_all_bounds(cycle_graph(8), ModelParams::from_q(0.6), 0.2);
  EXPECT_FALSE(rep.negative());
  EXPECT_TRUE(rep.bounds_hold());  // bounds are still bounds
}

TEST(Scan, GridBelowThreshold) {
  for (const auto& [g, d] : {std::pair{cycle_graph(8), 2}, std::pair{torus2d_graph(3, 3), 4}}) {
    const double lo = 1.0 / (d + 1);
    for (double q = lo; q <= q0(d) - 0.01 + 1e-12; q += 0.01) {
      const auto rep = verify_all_bounds(g, ModelParams::from_q(q), choose_h(q, d));
      EXPECT_TRUE(rep.negative()) << g.label() << " q=" << q;
      EXPECT_TRUE(rep.bounds_hold()) << g.label() << " q=" << q;
    }
  }
}

TEST(Scan, IrregularGraphRestrictedMode) {
  const auto rep = verify_all_bounds(path_graph(7), ModelParams::from_q(0.3), 0.2);
  EXPECT_FALSE(rep.constant_degree);
  EXPECT_FALSE(rep.warning.empty());
  EXPECT_EQ(rep.type1.checks, 0u);
  EXPECT_TRUE(rep.bounds_hold());
  EXPECT_THROW(verify_all_bounds(cycle_graph(17), ModelParams(0.5), 0.2), BudgetExceeded);
}

TEST(Scan, StationaryTailDecays) {
  const Graph g = cycle_graph(10);
  const double q = 0.3;
  ASSERT_TRUE(verify_all_bounds(cycle_graph(8), ModelParams::from_q(q), choose_h(q, 2)).negative());
  const auto sd = stationary(build_kernel(g, ModelParams::from_q(q)), Flavor::continuous);
  EXPECT_GT(tail_geometric_fit(sd).c2, 0.0);
}
