#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "bslab/exact.hpp"
#include "bslab/montecarlo.hpp"

using namespace bslab;

namespace {

McOptions options(Flavor flavor, double budget, std::uint64_t seed, std::size_t replicas = 4,
                  std::size_t batches = 64) {
  McOptions o;
  o.flavor = flavor;
  o.budget = budget;
  o.n_replicas = replicas;
  o.batches = batches;
  o.seed = seed;
  return o;
}

void expect_agrees(const Estimate& e, double exact, const std::string& what) {
  EXPECT_LE(std::abs(e.mean - exact), 3 * e.se + 1e-12) << what << ": mc " << e.mean << " se " << e.se << " exact "
                                                        << exact;
}

}  // namespace

TEST(MonteCarlo, MatchesExactOracle) {
  struct Case {
    Graph g;
    double p;
    Flavor flavor;
    double budget;
  };
  const std::vector<Case> cases{
      {cycle_graph(6), 0.3, Flavor::continuous, 20000.0}, {cycle_graph(6), 0.3, Flavor::embedded, 100000.0},
      {cycle_graph(6), 0.1, Flavor::continuous, 20000.0}, {cycle_graph(6), 0.7, Flavor::embedded, 100000.0},
      {torus2d_graph(3, 3), 0.5, Flavor::continuous, 10000.0}, {torus2d_graph(3, 3), 0.8, Flavor::embedded, 100000.0},
  };
  std::uint64_t seed = 100;
  for (const auto& c : cases) {
    const auto sd = stationary(build_kernel(c.g, ModelParams(c.p)), c.flavor);
    const auto marg = marginals(sd);
    const std::size_t k_max = c.g.num_vertices() - 1;
    const auto est = mc_standard(c.g, ModelParams(c.p), 0, 0.5, k_max, options(c.flavor, c.budget, ++seed));
    const std::string tag = c.g.label() + " p=" + std::to_string(c.p) + " " + to_string(c.flavor);
    expect_agrees(est.marginal_one, marg.one_prob[0], tag + " marginal");
    expect_agrees(est.proportion, proportion_tail(sd, 0.5), tag + " proportion");
    for (std::size_t k = 0; k <= k_max; ++k)
      if (marg.zeros_tail[k] > 1e-3) expect_agrees(est.zeros.tail[k], marg.zeros_tail[k], tag + " zeros>" + std::to_string(k));
  }
}

TEST(MonteCarlo, ZerosTailMatchesExactOnCycle8) {
  const Graph g = cycle_graph(8);
  const auto params = ModelParams::from_q(0.25);
  const auto sd = stationary(build_kernel(g, params), Flavor::continuous);
  const auto tail = marginals(sd).zeros_tail;
  const auto z = mc_zeros_tail(g, params, 7, options(Flavor::continuous, 100000.0, 7));
  ASSERT_EQ(z.tail.size(), 8u);
  for (std::size_t k = 0; k < 8; ++k)
    if (tail[k] > 1e-3) expect_agrees(z.tail[k], tail[k], "k=" + std::to_string(k));
}

TEST(MonteCarlo, FlavorsDifferSystematically) {
  // Time weighting favours states with few zeros (low exit rate).
  const Graph g = cycle_graph(6);
  const ModelParams params(0.3);
  const auto emb = marginals(stationary(build_kernel(g, params), Flavor::embedded)).one_prob[0];
  const auto cont = marginals(stationary(build_kernel(g, params), Flavor::continuous)).one_prob[0];
  ASSERT_GT(std::abs(emb - cont), 0.01);
  const auto e = mc_marginal_one(g, params, 0, options(Flavor::embedded, 100000.0, 3));
  const auto c = mc_marginal_one(g, params, 0, options(Flavor::continuous, 20000.0, 3));
  expect_agrees(e, emb, "embedded");
  expect_agrees(c, cont, "continuous");
  EXPECT_GT(std::abs(e.mean - c.mean), 5 * std::hypot(e.se, c.se));
}

TEST(MonteCarlo, TrivialThresholds) {
  const Graph g = cycle_graph(10);
  const auto o = options(Flavor::continuous, 200.0, 1);
  const auto all = mc_proportion_tail(g, ModelParams(0.4), 0.0, o);
  EXPECT_EQ(all.mean, 1.0);
  EXPECT_EQ(all.se, 0.0);
  const auto none = mc_proportion_tail(g, ModelParams(0.4), 1.01, o);
  EXPECT_EQ(none.mean, 0.0);
  EXPECT_EQ(none.n_batches, 64u);
}

TEST(MonteCarlo, ReproducibleAcrossThreadCounts) {
  const Graph g = cycle_graph(12);
  auto o = options(Flavor::continuous, 500.0, 42, 6, 18);
  o.threads = 1;
  const auto a = mc_marginals(g, ModelParams(0.4), o);
  o.threads = 3;
  const auto b = mc_marginals(g, ModelParams(0.4), o);
  o.threads = 0;
  const auto c = mc_marginals(g, ModelParams(0.4), o);
  for (std::size_t x = 0; x < a.size(); ++x) {
    EXPECT_EQ(a[x].mean, b[x].mean);
    EXPECT_EQ(a[x].se, b[x].se);
    EXPECT_EQ(a[x].mean, c[x].mean);
  }
  EXPECT_EQ(a[0].n_batches, 18u);
  o.seed = 43;
  EXPECT_NE(mc_marginals(g, ModelParams(0.4), o)[0].mean, a[0].mean);
}

TEST(MonteCarlo, OptionValidation) {
  const Graph g = cycle_graph(6);
  auto o = options(Flavor::continuous, 100.0, 1, 2, 8);
  EXPECT_THROW(mc_marginal_one(g, ModelParams(0.3), 0, o), InsufficientBatches);
  o.batches = 16;
  o.burn_in = 100.0;
  EXPECT_THROW(mc_marginal_one(g, ModelParams(0.3), 0, o), std::invalid_argument);
  o.burn_in = -1.0;
  EXPECT_NO_THROW(mc_marginal_one(g, ModelParams(0.3), 0, o));
  EXPECT_THROW(mc_marginal_one(g, ModelParams(0.3), 6, o), std::out_of_range);
  auto e = options(Flavor::embedded, 20.0, 1, 1, 32);
  EXPECT_THROW(mc_marginal_one(g, ModelParams(0.3), 0, e), InsufficientBatches);
  const auto est = mc_marginal_one(g, ModelParams(0.3), 0, o);
  EXPECT_EQ(est.burn_in, 10.0);
  EXPECT_EQ(est.total_budget, 200.0);
  EXPECT_NEAR((est.ci_lo + est.ci_hi) / 2, est.mean, 1e-15);
}

TEST(MonteCarlo, ZerosTailDecaysBelowThreshold) {
  // q = 0.3 < q0(2): zeros die out; the tail of the zero count decays.
  const auto z = mc_zeros_tail(cycle_graph(50), ModelParams::from_q(0.3), 20, options(Flavor::continuous, 4000.0, 5));
  ASSERT_TRUE(z.fit.has_value()) << z.fit_note;
  EXPECT_GT(z.fit->c2, 0.0);
  EXPECT_GT(z.fit->c2_ci_lo, 0.0);
  EXPECT_GE(z.fit->points(), 3u);
  for (std::size_t k = 1; k < z.tail.size(); ++k) EXPECT_LE(z.tail[k].mean, z.tail[k - 1].mean);
}

TEST(MonteCarlo, TailFitNeedsThreePoints) {
  BatchMatrix m{4, {}, 0.0, 1.0};
  for (int b = 0; b < 16; ++b) m.rows.push_back({1.0, 0.5, 0.0, 0.0});
  const auto z = fit_zeros_tail(m);
  EXPECT_FALSE(z.fit.has_value());
  EXPECT_FALSE(z.fit_note.empty());
}

TEST(MonteCarlo, TailFitRecoversExactExponential) {
  BatchMatrix m{8, {}, 0.0, 1.0};
  for (int b = 0; b < 16; ++b) {
    std::vector<double> row;
    for (int k = 0; k < 8; ++k) row.push_back(2.0 * std::exp(-0.7 * k) * (1.0 + 0.01 * ((b % 3) - 1)));
    m.rows.push_back(row);
  }
  const auto z = fit_zeros_tail(m);
  ASSERT_TRUE(z.fit.has_value());
  EXPECT_NEAR(z.fit->c2, 0.7, 1e-12);
  EXPECT_NEAR(z.fit->c1, 2.0, 0.01);
  EXPECT_NEAR(z.fit->c2_se, 0.0, 1e-12);
  EXPECT_EQ(z.fit->k_min, 1u);
  EXPECT_EQ(z.fit->k_max, 7u);
}

TEST(MonteCarlo, CsvRow) {
  std::ostringstream out;
  write_mc_csv_header(out);
  Estimate e;
  e.mean = 0.5;
  e.se = 0.01;
  e.ci_lo = 0.48;
  e.ci_hi = 0.52;
  e.n_batches = 16;
  write_mc_csv_row(out, "marginal_one", 0.3, "file:a,b.txt", e, 9);
  EXPECT_EQ(out.str(),
            "functional,param_p,graph,estimate,stderr,ci_lo,ci_hi,batches,seed\n"
            "marginal_one,0.3,\"file:a,b.txt\",0.5,0.01,0.48,0.52,16,9\n");
}

TEST(Classical, KsDistanceOracle) {
  ClassicalStats st;
  st.ks_lo = 0.7;
  for (int i = 0; i < 100; ++i) st.restricted.push_back(0.7 + 0.3 * (i + 0.5) / 100);
  EXPECT_NEAR(st.ks_uniform(), 0.005, 1e-12);
  st.restricted.assign(10, 0.7);
  EXPECT_NEAR(st.ks_uniform(), 1.0, 1e-12);
}

TEST(Classical, SmallRunHasThresholdShape) {
  const auto st = classical_long_run(cycle_graph(100), 200000, 200000, 100, 3);
  EXPECT_EQ(st.samples, 100u * 2000u);
  EXPECT_EQ(std::accumulate(st.histogram.begin(), st.histogram.end(), std::uint64_t{0}), st.samples);
  EXPECT_LT(st.mass_below(0.55), 0.1);
  EXPECT_LT(st.ks_uniform(), 0.1);
  // Same seed, same histogram.
  const auto again = classical_long_run(cycle_graph(100), 200000, 200000, 100, 3);
  EXPECT_EQ(again.histogram, st.histogram);
}
