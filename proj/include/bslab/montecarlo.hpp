#pragma once

// Long-run Monte Carlo estimates of stationary functionals with batch means.
//
// Each replica runs one trajectory from `init`, discards the burn-in and
// splits the rest into equal batches. Batch means from all replicas are
// pooled. Replica r draws only from its own streams, so results do not
// depend on the thread count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "bslab/dynamics.hpp"
#include "bslab/error.hpp"
#include "bslab/exact.hpp"
#include "bslab/graph.hpp"
#include "bslab/stats.hpp"

namespace bslab {

inline constexpr std::size_t kMinBatches = 16;

struct McOptions {
  Flavor flavor = Flavor::continuous;  // continuous: time-weighted; embedded: step average
  double budget = 1000.0;              // per replica: time units or steps
  double burn_in = -1.0;               // per replica; negative means 10% of budget
  std::size_t n_replicas = 4;
  std::size_t batches = kMinBatches;   // pooled over replicas
  AllOnesSemantics semantics = AllOnesSemantics::restart;
  std::uint64_t seed = 1;
  std::optional<Configuration> init;   // default: all zeros
  unsigned threads = 0;                // 0: hardware concurrency

  double effective_burn_in() const { return burn_in < 0.0 ? 0.1 * budget : burn_in; }
  std::size_t batches_per_replica() const { return (batches + n_replicas - 1) / std::max<std::size_t>(n_replicas, 1); }
};

/// Fills `out` with the functionals of a state; `zeros` is its zero count.
using StateFunctional = std::function<void(const Configuration& state, std::size_t zeros, std::span<double> out)>;

/// Batch means, one row per batch (replica-major).
struct BatchMatrix {
  std::size_t n_functionals = 0;
  std::vector<std::vector<double>> rows;
  double burn_in = 0.0;
  double total_budget = 0.0;

  std::vector<double> column(std::size_t j) const {
    std::vector<double> c;
    c.reserve(rows.size());
    for (const auto& r : rows) c.push_back(r[j]);
    return c;
  }
  Estimate estimate(std::size_t j) const {
    const auto c = column(j);
    return estimate_from_batches(c, burn_in, total_budget);
  }
};

namespace detail {

inline void check_mc_options(const Graph& g, const McOptions& o) {
  if (!(o.budget > 0.0)) throw std::invalid_argument("mc: budget must be positive");
  if (!(o.budget > o.effective_burn_in())) throw std::invalid_argument("mc: budget must exceed burn-in");
  if (o.n_replicas == 0) throw std::invalid_argument("mc: need at least one replica");
  if (o.batches_per_replica() * o.n_replicas < kMinBatches)
    throw InsufficientBatches("mc: at least " + std::to_string(kMinBatches) + " batches are required");
  if (o.init) check_config(g, *o.init);
  if (o.flavor == Flavor::embedded) {
    const double per_batch = std::floor((o.budget - o.effective_burn_in()) / double(o.batches_per_replica()));
    if (per_batch < 1.0) throw InsufficientBatches("mc: fewer steps than batches");
  }
}

inline std::vector<std::vector<double>> run_replica(const Graph& g, const ModelParams& params, const McOptions& o,
                                                    std::uint32_t replica, std::size_t nf, const StateFunctional& f) {
  const std::size_t B = o.batches_per_replica();
  const double burn = o.effective_burn_in();
  const Configuration init = o.init ? *o.init : Configuration::all_zeros(g.num_vertices());
  std::vector<std::vector<double>> out(B, std::vector<double>(nf, 0.0));
  std::vector<double> v(nf);

  if (o.flavor == Flavor::continuous) {
    ContinuousProcess proc(g, params, init, o.seed, replica, o.semantics);
    proc.run_until(burn);
    const double span = (o.budget - burn) / double(B);
    f(proc.state(), proc.zeros(), v);
    for (std::size_t b = 0; b < B; ++b) {
      auto& acc = out[b];
      double last = burn + double(b) * span;
      const double t_end = (b + 1 == B) ? o.budget : burn + double(b + 1) * span;
      proc.run_until(t_end, [&](const EventRecord& e, double) {
        if (!e.applied) return;
        for (std::size_t j = 0; j < nf; ++j) acc[j] += v[j] * (e.time - last);
        last = e.time;
        f(proc.state(), proc.zeros(), v);
      });
      for (std::size_t j = 0; j < nf; ++j) acc[j] = (acc[j] + v[j] * (t_end - last)) / (t_end - (burn + double(b) * span));
    }
  } else {
    DiscreteProcess proc(g, params, init, aux_stream(o.seed, replica, stream_tag::discrete), o.semantics);
    const auto burn_steps = static_cast<std::uint64_t>(burn);
    for (std::uint64_t s = 0; s < burn_steps; ++s) proc.step();
    const auto per = static_cast<std::uint64_t>(std::floor((o.budget - burn) / double(B)));
    for (std::size_t b = 0; b < B; ++b) {
      auto& acc = out[b];
      for (std::uint64_t s = 0; s < per; ++s) {
        proc.step();
        f(proc.state(), proc.zeros(), v);
        for (std::size_t j = 0; j < nf; ++j) acc[j] += v[j];
      }
      for (double& a : acc) a /= double(per);
    }
  }
  return out;
}

}  // namespace detail

/// Runs all replicas and returns the pooled batch means of `nf` functionals.
inline BatchMatrix mc_batches(const Graph& g, const ModelParams& params, std::size_t nf, const StateFunctional& f,
                              const McOptions& o) {
  detail::check_mc_options(g, o);
  std::vector<std::vector<std::vector<double>>> per(o.n_replicas);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r; (r = next.fetch_add(1)) < o.n_replicas;)
      per[r] = detail::run_replica(g, params, o, static_cast<std::uint32_t>(r), nf, f);
  };
  unsigned nt = o.threads ? o.threads : std::max(1u, std::thread::hardware_concurrency());
  nt = static_cast<unsigned>(std::min<std::size_t>(nt, o.n_replicas));
  if (nt <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < nt; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  BatchMatrix m;
  m.n_functionals = nf;
  m.burn_in = o.effective_burn_in();
  m.total_budget = o.budget * double(o.n_replicas);
  for (auto& rows : per)
    for (auto& row : rows) m.rows.push_back(std::move(row));
  return m;
}

/// pi(eta_x = 1).
inline Estimate mc_marginal_one(const Graph& g, const ModelParams& params, Vertex x, const McOptions& o) {
  if (x >= g.num_vertices()) throw std::out_of_range("mc_marginal_one: vertex out of range");
  const auto m = mc_batches(
      g, params, 1, [x](const Configuration& c, std::size_t, std::span<double> out) { out[0] = c[x]; }, o);
  return m.estimate(0);
}

/// pi(eta_x = 1) for every vertex from one set of runs.
inline std::vector<Estimate> mc_marginals(const Graph& g, const ModelParams& params, const McOptions& o) {
  const std::size_t n = g.num_vertices();
  const auto m = mc_batches(
      g, params, n,
      [n](const Configuration& c, std::size_t, std::span<double> out) {
        for (std::size_t x = 0; x < n; ++x) out[x] = c[x];
      },
      o);
  std::vector<Estimate> e;
  for (std::size_t x = 0; x < n; ++x) e.push_back(m.estimate(x));
  return e;
}

/// pi(proportion of ones >= a).
inline Estimate mc_proportion_tail(const Graph& g, const ModelParams& params, double a, const McOptions& o) {
  const double n = double(g.num_vertices());
  const auto m = mc_batches(
      g, params, 1,
      [a, n](const Configuration&, std::size_t zeros, std::span<double> out) { out[0] = (n - double(zeros)) / n >= a; },
      o);
  return m.estimate(0);
}

struct ZerosTail {
  std::vector<Estimate> tail;  // pi(#zeros > k), k = 0..k_max
  std::optional<TailFit> fit;
  std::string fit_note;        // why no fit was produced
};

/// Least-squares fit of log pi(#zeros > k) on k over the contiguous range
/// from k_min on which the pooled mean is positive and at least a quarter of
/// the batches (and no fewer than two) saw the event. The slope error is a
/// leave-one-batch-out jackknife.
inline ZerosTail fit_zeros_tail(const BatchMatrix& m, std::size_t k_min = 1) {
  ZerosTail z;
  for (std::size_t k = 0; k < m.n_functionals; ++k) z.tail.push_back(m.estimate(k));
  const std::size_t B = m.rows.size();
  const std::size_t need = std::max<std::size_t>(2, B / 4);
  std::size_t k_max = k_min;
  for (std::size_t k = k_min; k < m.n_functionals; ++k) {
    std::size_t hits = 0;
    for (const auto& r : m.rows) hits += r[k] > 0.0;
    if (!(z.tail[k].mean > 0.0) || hits < need) break;
    k_max = k + 1;
  }
  if (k_max < k_min + 3) {
    z.fit_note = "fewer than 3 usable tail points";
    return z;
  }
  auto fit_rows = [&](std::optional<std::size_t> skip) {
    std::vector<double> ks, logs;
    for (std::size_t k = k_min; k < k_max; ++k) {
      double s = 0.0;
      for (std::size_t b = 0; b < B; ++b)
        if (b != skip) s += m.rows[b][k];
      ks.push_back(double(k));
      logs.push_back(std::log(s / double(skip ? B - 1 : B)));
    }
    return fit_line(ks, logs);
  };
  const auto line = fit_rows(std::nullopt);
  std::vector<double> jk;
  for (std::size_t b = 0; b < B; ++b) jk.push_back(-fit_rows(b).slope);
  const double jk_mean = std::accumulate(jk.begin(), jk.end(), 0.0) / double(B);
  double ss = 0.0;
  for (double v : jk) ss += (v - jk_mean) * (v - jk_mean);
  TailFit f;
  f.c1 = std::exp(line.intercept);
  f.c2 = -line.slope;
  f.c2_se = std::sqrt(double(B - 1) / double(B) * ss);
  f.c2_ci_lo = f.c2 - kZ95 * f.c2_se;
  f.c2_ci_hi = f.c2 + kZ95 * f.c2_se;
  f.k_min = k_min;
  f.k_max = k_max - 1;
  f.rms_residual = line.rms_residual;
  z.fit = f;
  return z;
}

/// pi(#zeros > k) for k = 0..k_max with an exponential tail fit.
inline ZerosTail mc_zeros_tail(const Graph& g, const ModelParams& params, std::size_t k_max, const McOptions& o) {
  const auto m = mc_batches(
      g, params, k_max + 1,
      [](const Configuration&, std::size_t zeros, std::span<double> out) {
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = zeros > k;
      },
      o);
  return fit_zeros_tail(m);
}

struct StandardEstimates {
  Estimate marginal_one;  // pi(eta_x = 1)
  Estimate proportion;    // pi(proportion of ones >= a)
  ZerosTail zeros;        // pi(#zeros > k), k = 0..k_max
};

/// All three functionals from a single set of runs.
inline StandardEstimates mc_standard(const Graph& g, const ModelParams& params, Vertex x, double a, std::size_t k_max,
                                     const McOptions& o) {
  if (x >= g.num_vertices()) throw std::out_of_range("mc_standard: vertex out of range");
  const double n = double(g.num_vertices());
  const auto m = mc_batches(
      g, params, k_max + 3,
      [x, a, n](const Configuration& c, std::size_t zeros, std::span<double> out) {
        out[0] = c[x];
        out[1] = (n - double(zeros)) / n >= a;
        for (std::size_t k = 0; k + 2 < out.size(); ++k) out[k + 2] = zeros > k;
      },
      o);
  BatchMatrix tail{m.n_functionals - 2, {}, m.burn_in, m.total_budget};
  for (const auto& r : m.rows) tail.rows.emplace_back(r.begin() + 2, r.end());
  return {m.estimate(0), m.estimate(1), fit_zeros_tail(tail)};
}

// ---------------------------------------------------------------------------
// Classical continuous-fitness model: long-run fitness distribution

struct ClassicalStats {
  std::vector<std::uint64_t> histogram;  // equal bins on [0,1]
  std::uint64_t samples = 0;
  std::uint64_t steps = 0;
  double mass_below(double x) const {
    const std::size_t bins = histogram.size();
    const auto k = static_cast<std::size_t>(std::floor(x * double(bins) + 1e-9));
    std::uint64_t c = 0;
    for (std::size_t b = 0; b < std::min(k, bins); ++b) c += histogram[b];
    return samples ? double(c) / double(samples) : 0.0;
  }
  std::vector<double> restricted;  // sampled values in [lo, 1] for the KS distance
  double ks_lo = 0.7;
  /// Kolmogorov-Smirnov distance of the restricted sample from uniform on [ks_lo, 1].
  double ks_uniform() const {
    if (restricted.empty()) return 1.0;
    std::vector<double> v = restricted;
    std::sort(v.begin(), v.end());
    const double n = double(v.size());
    double d = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double F = (v[i] - ks_lo) / (1.0 - ks_lo);
      d = std::max({d, double(i + 1) / n - F, F - double(i) / n});
    }
    return d;
  }
};

/// Runs the classical dynamics for burn_in + steps steps and records the whole
/// fitness vector every `sample_every` steps after the burn-in.
inline ClassicalStats classical_long_run(const Graph& g, std::uint64_t burn_in, std::uint64_t steps,
                                         std::uint64_t sample_every, std::uint64_t seed, std::size_t bins = 100,
                                         double ks_lo = 0.7) {
  if (sample_every == 0 || bins == 0) throw std::invalid_argument("classical_long_run: bad sampling parameters");
  Rng init_rng = aux_stream(seed, 0, stream_tag::classical);
  ClassicalProcess proc(g, FitnessVector::uniform(g.num_vertices(), init_rng),
                        aux_stream(seed, 1, stream_tag::classical));
  for (std::uint64_t s = 0; s < burn_in; ++s) proc.step();
  ClassicalStats st;
  st.histogram.assign(bins, 0);
  st.ks_lo = ks_lo;
  for (std::uint64_t s = 1; s <= steps; ++s) {
    proc.step();
    if (s % sample_every) continue;
    for (double v : proc.fitness().values()) {
      ++st.histogram[std::min(bins - 1, static_cast<std::size_t>(v * double(bins)))];
      ++st.samples;
      if (v >= ks_lo) st.restricted.push_back(v);
    }
  }
  st.steps = burn_in + steps;
  return st;
}

inline void write_mc_csv_header(std::ostream& out) {
  out << "functional,param_p,graph,estimate,stderr,ci_lo,ci_hi,batches,seed\n";
}

inline void write_mc_csv_row(std::ostream& out, const std::string& functional, double p, const std::string& graph,
                             const Estimate& e, std::uint64_t seed) {
  out << csv_field(functional) << ',' << fmt_num(p) << ',' << csv_field(graph) << ',' << fmt_num(e.mean) << ',' << fmt_num(e.se) << ','
      << fmt_num(e.ci_lo) << ',' << fmt_num(e.ci_hi) << ',' << e.n_batches << ',' << seed << '\n';
}

}  // namespace bslab
