#pragma once

// Exact analysis on small graphs: the 2^|V| embedded kernel, stationary
// distributions of the embedded and continuous-time chains, transient
// probabilities (matrix powers / uniformization), the global balance
// identity and the leave-easily/enter-rarely estimate pi(A) <= eps / c.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bslab/dynamics.hpp"
#include "bslab/error.hpp"
#include "bslab/graph.hpp"
#include "bslab/stats.hpp"

namespace bslab {

enum class Flavor { embedded, continuous };

inline const char* to_string(Flavor f) { return f == Flavor::embedded ? "embedded" : "continuous"; }

using StateIndex = std::uint32_t;

inline constexpr std::size_t kDefaultMaxExactVertices = 20;

/// Sparse (CSR) embedded kernel over all 2^|V| configurations. State index
/// bit x holds the fitness of vertex x.
class TransitionModel {
 public:
  TransitionModel(const Graph& g, const ModelParams& params, AllOnesSemantics semantics,
                  std::size_t max_vertices = kDefaultMaxExactVertices)
      : graph_(&g), params_(params), semantics_(semantics) {
    const std::size_t n = g.num_vertices();
    if (n > max_vertices || n > 30)
      throw BudgetExceeded("exact kernel: " + std::to_string(n) + " vertices exceeds budget of " +
                           std::to_string(max_vertices));
    num_states_ = std::size_t{1} << n;
    const double p = params.p(), q = params.q();

    // Per vertex: mask of its closed neighbourhood and the 2^k outcomes.
    struct Outcome {
      StateIndex bits;
      double prob;
    };
    std::vector<StateIndex> masks(n);
    std::vector<std::vector<Outcome>> outcomes(n);
    for (Vertex v = 0; v < n; ++v) {
      const auto hood = g.closed_neighbourhood(v);
      for (Vertex u : hood) masks[v] |= StateIndex{1} << u;
      const std::size_t k = hood.size();
      for (std::uint32_t a = 0; a < (1u << k); ++a) {
        StateIndex bits = 0;
        double prob = 1.0;
        for (std::size_t i = 0; i < k; ++i) {
          if ((a >> i) & 1u) {
            bits |= StateIndex{1} << hood[i];
            prob *= p;
          } else {
            prob *= q;
          }
        }
        outcomes[v].push_back({bits, prob});
      }
    }

    row_ptr_.reserve(num_states_ + 1);
    row_ptr_.push_back(0);
    exit_rate_.resize(num_states_);
    const StateIndex all_ones = static_cast<StateIndex>(num_states_ - 1);
    std::vector<std::pair<StateIndex, double>> row;
    for (std::size_t s = 0; s < num_states_; ++s) {
      const auto state = static_cast<StateIndex>(s);
      row.clear();
      const StateIndex zero_bits = ~state & all_ones;
      const int zeros = std::popcount(zero_bits);
      if (zeros == 0 && semantics == AllOnesSemantics::frozen) {
        row.emplace_back(state, 1.0);
        exit_rate_[s] = 0.0;
      } else {
        const StateIndex choices = zeros ? zero_bits : all_ones;
        const double w = 1.0 / std::popcount(choices);
        exit_rate_[s] = zeros ? double(zeros) : double(n);
        for (Vertex v = 0; v < n; ++v) {
          if (!((choices >> v) & 1u)) continue;
          const StateIndex keep = state & ~masks[v];
          for (const auto& o : outcomes[v]) row.emplace_back(keep | o.bits, w * o.prob);
        }
      }
      std::sort(row.begin(), row.end(), [](auto& a, auto& b) { return a.first < b.first; });
      for (std::size_t i = 0; i < row.size();) {
        const StateIndex target = row[i].first;
        double acc = 0.0;
        for (; i < row.size() && row[i].first == target; ++i) acc += row[i].second;
        cols_.push_back(target);
        vals_.push_back(acc);
      }
      row_ptr_.push_back(cols_.size());
    }
  }

  const Graph& graph() const { return *graph_; }
  const ModelParams& params() const { return params_; }
  AllOnesSemantics semantics() const { return semantics_; }
  std::size_t num_vertices() const { return graph_->num_vertices(); }
  std::size_t num_states() const { return num_states_; }
  std::size_t nonzeros() const { return vals_.size(); }
  double exit_rate(std::size_t s) const { return exit_rate_[s]; }
  std::span<const double> exit_rates() const { return exit_rate_; }
  /// Uniformization rate; dominates every exit rate.
  double max_rate() const { return double(num_vertices()); }

  struct RowView {
    std::span<const StateIndex> cols;
    std::span<const double> vals;
  };
  RowView row(std::size_t s) const {
    const auto b = row_ptr_[s], e = row_ptr_[s + 1];
    return {std::span(cols_).subspan(b, e - b), std::span(vals_).subspan(b, e - b)};
  }

  double prob(std::size_t from, std::size_t to) const {
    const auto r = row(from);
    auto it = std::lower_bound(r.cols.begin(), r.cols.end(), static_cast<StateIndex>(to));
    return (it != r.cols.end() && *it == to) ? r.vals[it - r.cols.begin()] : 0.0;
  }

  /// out = v P (row vector).
  void apply_left(std::span<const double> v, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t s = 0; s < num_states_; ++s) {
      const double mass = v[s];
      if (mass == 0.0) continue;
      for (auto k = row_ptr_[s]; k < row_ptr_[s + 1]; ++k) out[cols_[k]] += mass * vals_[k];
    }
  }

  /// out = P w (column vector).
  void apply_right(std::span<const double> w, std::span<double> out) const {
    for (std::size_t s = 0; s < num_states_; ++s) {
      double acc = 0.0;
      for (auto k = row_ptr_[s]; k < row_ptr_[s + 1]; ++k) acc += vals_[k] * w[cols_[k]];
      out[s] = acc;
    }
  }

  double max_row_sum_error() const {
    double worst = 0.0;
    for (std::size_t s = 0; s < num_states_; ++s) {
      double sum = 0.0;
      for (auto k = row_ptr_[s]; k < row_ptr_[s + 1]; ++k) sum += vals_[k];
      worst = std::max(worst, std::abs(sum - 1.0));
    }
    return worst;
  }

 private:
  const Graph* graph_;
  ModelParams params_;
  AllOnesSemantics semantics_;
  std::size_t num_states_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<StateIndex> cols_;
  std::vector<double> vals_;
  std::vector<double> exit_rate_;
};

inline TransitionModel build_kernel(const Graph& g, const ModelParams& params,
                                    AllOnesSemantics semantics = AllOnesSemantics::restart,
                                    std::size_t max_vertices = kDefaultMaxExactVertices) {
  return TransitionModel(g, params, semantics, max_vertices);
}

struct StationaryDist {
  std::vector<double> prob;
  Flavor flavor = Flavor::embedded;
  std::size_t num_vertices = 0;
  double residual = 0.0;  // L1 norm of the fixed-point defect
  std::size_t iterations = 0;

  double operator[](std::size_t s) const { return prob[s]; }
  std::size_t size() const { return prob.size(); }
};

/// ||pi P - pi||_1 for the embedded flavor, ||pi Q||_1 / max rate for the
/// continuous one (Q = diag(r)(P - I)).
inline double stationarity_residual(const TransitionModel& tm, std::span<const double> pi, Flavor flavor) {
  const std::size_t S = tm.num_states();
  std::vector<double> weighted(pi.begin(), pi.end());
  if (flavor == Flavor::continuous)
    for (std::size_t s = 0; s < S; ++s) weighted[s] *= tm.exit_rate(s) / tm.max_rate();
  std::vector<double> next(S);
  tm.apply_left(weighted, next);
  double r = 0.0;
  for (std::size_t s = 0; s < S; ++s) r += std::abs(next[s] - weighted[s]);
  return r;
}

struct StationaryOptions {
  double tolerance = 1e-10;
  std::size_t max_iterations = 2'000'000;
};

namespace detail {

inline std::vector<double> embedded_power_iteration(const TransitionModel& tm, const StationaryOptions& opt,
                                                    double& residual, std::size_t& iterations) {
  const std::size_t S = tm.num_states();
  std::vector<double> pi(S, 1.0 / double(S)), next(S);
  for (iterations = 1; iterations <= opt.max_iterations; ++iterations) {
    tm.apply_left(pi, next);
    double sum = 0.0;
    for (double v : next) sum += v;
    residual = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      next[s] /= sum;
      residual += std::abs(next[s] - pi[s]);
    }
    pi.swap(next);
    // Residual of the returned vector is at most the last step's change.
    if (residual < 0.1 * opt.tolerance) break;
  }
  residual = stationarity_residual(tm, pi, Flavor::embedded);
  if (!(residual < opt.tolerance))
    throw NotConverged("stationary: power iteration did not converge (residual " + fmt_num(residual) + ")");
  return pi;
}

}  // namespace detail

/// Embedded: power iteration on pi P = pi. Continuous: pi_ct ~ pi_emb / r
/// (mean holding time 1/r); absorbing states (r = 0) take all the mass.
inline StationaryDist stationary(const TransitionModel& tm, Flavor flavor, const StationaryOptions& opt = {}) {
  StationaryDist sd;
  sd.flavor = flavor;
  sd.num_vertices = tm.num_vertices();
  sd.prob = detail::embedded_power_iteration(tm, opt, sd.residual, sd.iterations);
  if (flavor == Flavor::continuous) {
    const std::size_t S = tm.num_states();
    double absorbed = 0.0;
    for (std::size_t s = 0; s < S; ++s)
      if (tm.exit_rate(s) == 0.0) absorbed += sd.prob[s];
    double total = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      const double r = tm.exit_rate(s);
      if (absorbed > 0.0) sd.prob[s] = r == 0.0 ? sd.prob[s] : 0.0;
      else sd.prob[s] /= r;
      total += sd.prob[s];
    }
    for (double& v : sd.prob) v /= total;
    sd.residual = stationarity_residual(tm, sd.prob, Flavor::continuous);
    if (!(sd.residual < opt.tolerance))
      throw NotConverged("stationary: continuous reweighting residual " + fmt_num(sd.residual));
  }
  return sd;
}

// ---------------------------------------------------------------------------
// Functionals

struct Marginals {
  std::vector<double> one_prob;    // pi(eta_x = 1) per vertex
  std::vector<double> zeros_tail;  // pi(#zeros > k), k = 0..|V|
  double expected_zeros = 0.0;
};

inline Marginals marginals(const StationaryDist& sd) {
  const std::size_t n = sd.num_vertices;
  Marginals m;
  m.one_prob.assign(n, 0.0);
  std::vector<double> zeros_pmf(n + 1, 0.0);
  for (std::size_t s = 0; s < sd.size(); ++s) {
    const double w = sd[s];
    for (std::size_t x = 0; x < n; ++x)
      if ((s >> x) & 1u) m.one_prob[x] += w;
    const auto z = n - static_cast<std::size_t>(std::popcount(static_cast<std::uint64_t>(s)));
    zeros_pmf[z] += w;
    m.expected_zeros += w * double(z);
  }
  m.zeros_tail.assign(n + 1, 0.0);
  // Summed from the top so tiny tail values keep full relative precision.
  double acc = 0.0;
  for (std::size_t k = n + 1; k-- > 0;) {
    m.zeros_tail[k] = acc;
    acc += zeros_pmf[k];
  }
  return m;
}

/// pi(proportion of ones >= a).
inline double proportion_tail(const StationaryDist& sd, double a) {
  const std::size_t n = sd.num_vertices;
  double total = 0.0;
  for (std::size_t s = 0; s < sd.size(); ++s) {
    const double ones = double(std::popcount(static_cast<std::uint64_t>(s)));
    if (ones / double(n) >= a) total += sd[s];
  }
  return total;
}

/// pi(#zeros > k).
inline double zeros_tail(const StationaryDist& sd, std::size_t k) {
  const auto& t = marginals(sd).zeros_tail;
  return k < t.size() ? t[k] : 0.0;
}

inline void write_stationary_csv(std::ostream& out, const StationaryDist& sd) {
  out << "state_bits,probability\n";
  for (std::size_t s = 0; s < sd.size(); ++s)
    out << Configuration::from_index(s, sd.num_vertices).str() << ',' << fmt_num(sd[s]) << '\n';
}

// ---------------------------------------------------------------------------
// Transient probabilities P^(t)

/// Membership of each state in an event A.
using StateSet = std::vector<char>;

inline StateSet make_state_set(const TransitionModel& tm, const std::function<bool(const Configuration&)>& pred) {
  StateSet a(tm.num_states());
  for (std::size_t s = 0; s < tm.num_states(); ++s) a[s] = pred(Configuration::from_index(s, tm.num_vertices()));
  return a;
}

namespace detail {

inline std::size_t integer_time(double t) {
  if (!(t > 0.0)) throw std::invalid_argument("time must be positive");
  if (t != std::floor(t)) throw std::invalid_argument("embedded chain needs an integer number of steps");
  return static_cast<std::size_t>(t);
}

// Poisson(lambda) weights truncated where the remaining mass is < tol.
inline std::vector<double> poisson_weights(double lambda, double tol = 1e-12) {
  std::vector<double> w;
  double cumulative = 0.0;
  for (std::size_t k = 0;; ++k) {
    const double lw = -lambda + double(k) * std::log(lambda) - std::lgamma(double(k) + 1.0);
    const double wk = std::exp(lw);
    w.push_back(wk);
    cumulative += wk;
    if (double(k) > lambda && 1.0 - cumulative < tol) break;
    if (k > 100000 + 10 * static_cast<std::size_t>(lambda)) throw NotConverged("poisson truncation");
  }
  return w;
}

}  // namespace detail

/// v P^(t) for the given flavor (matrix power or uniformization at rate |V|).
inline std::vector<double> propagate_left(const TransitionModel& tm, std::vector<double> v, double t, Flavor flavor) {
  const std::size_t S = tm.num_states();
  std::vector<double> tmp(S);
  if (flavor == Flavor::embedded) {
    const std::size_t steps = detail::integer_time(t);
    for (std::size_t i = 0; i < steps; ++i) {
      tm.apply_left(v, tmp);
      v.swap(tmp);
    }
    return v;
  }
  if (!(t > 0.0)) throw std::invalid_argument("time must be positive");
  const double lambda = tm.max_rate();
  const auto w = detail::poisson_weights(lambda * t);
  std::vector<double> acc(S, 0.0), scaled(S);
  for (std::size_t k = 0; k < w.size(); ++k) {
    for (std::size_t s = 0; s < S; ++s) acc[s] += w[k] * v[s];
    // v <- v (I + Q / lambda)
    for (std::size_t s = 0; s < S; ++s) scaled[s] = v[s] * tm.exit_rate(s) / lambda;
    tm.apply_left(scaled, tmp);
    for (std::size_t s = 0; s < S; ++s) v[s] = v[s] - scaled[s] + tmp[s];
  }
  return acc;
}

/// P^(t) w.
inline std::vector<double> propagate_right(const TransitionModel& tm, std::vector<double> w, double t, Flavor flavor) {
  const std::size_t S = tm.num_states();
  std::vector<double> tmp(S);
  if (flavor == Flavor::embedded) {
    const std::size_t steps = detail::integer_time(t);
    for (std::size_t i = 0; i < steps; ++i) {
      tm.apply_right(w, tmp);
      w.swap(tmp);
    }
    return w;
  }
  if (!(t > 0.0)) throw std::invalid_argument("time must be positive");
  const double lambda = tm.max_rate();
  const auto weights = detail::poisson_weights(lambda * t);
  std::vector<double> acc(S, 0.0);
  for (std::size_t k = 0; k < weights.size(); ++k) {
    for (std::size_t s = 0; s < S; ++s) acc[s] += weights[k] * w[s];
    tm.apply_right(w, tmp);
    for (std::size_t s = 0; s < S; ++s) {
      const double r = tm.exit_rate(s) / lambda;
      w[s] = (1.0 - r) * w[s] + r * tmp[s];
    }
  }
  return acc;
}

struct BalanceReport {
  double out_flow = 0.0;  // sum_{x in A, y not in A} pi_x P_xy
  double in_flow = 0.0;   // sum_{x in A, y not in A} pi_y P_yx
  double residual = 0.0;
};

inline BalanceReport balance_residual(const TransitionModel& tm, const StationaryDist& sd, const StateSet& A, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("balance_residual: t must be positive");
  const std::size_t S = tm.num_states();
  std::vector<double> inside(S, 0.0), outside(S, 0.0);
  for (std::size_t s = 0; s < S; ++s) (A[s] ? inside : outside)[s] = sd[s];
  const auto from_inside = propagate_left(tm, inside, t, sd.flavor);
  const auto from_outside = propagate_left(tm, outside, t, sd.flavor);
  BalanceReport r;
  for (std::size_t s = 0; s < S; ++s) {
    if (A[s]) r.in_flow += from_outside[s];
    else r.out_flow += from_inside[s];
  }
  r.residual = std::abs(r.out_flow - r.in_flow);
  return r;
}

struct Lemma21Report {
  double c = 0.0;        // min over x in A of P^(t)(x, A^c)
  double epsilon = 0.0;  // max over y not in A of P^(t)(y, A)
  double bound = 0.0;    // epsilon / c
  double pi_A = 0.0;
  bool holds = true;
  bool vacuous = false;  // c == 0: nothing to check
};

inline Lemma21Report lemma21_check(const TransitionModel& tm, const StationaryDist& sd, const StateSet& A, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("lemma21_check: t must be positive");
  const std::size_t S = tm.num_states();
  std::vector<double> ind_in(S), ind_out(S);
  for (std::size_t s = 0; s < S; ++s) {
    ind_in[s] = A[s] ? 1.0 : 0.0;
    ind_out[s] = A[s] ? 0.0 : 1.0;
  }
  const auto escape = propagate_right(tm, ind_out, t, sd.flavor);
  const auto entry = propagate_right(tm, ind_in, t, sd.flavor);
  Lemma21Report r;
  r.c = std::numeric_limits<double>::infinity();
  r.epsilon = 0.0;
  for (std::size_t s = 0; s < S; ++s) {
    if (A[s]) {
      r.c = std::min(r.c, escape[s]);
      r.pi_A += sd[s];
    } else {
      r.epsilon = std::max(r.epsilon, entry[s]);
    }
  }
  if (r.c <= 0.0) {
    r.c = 0.0;
    r.vacuous = true;
    r.bound = std::numeric_limits<double>::infinity();
    r.holds = true;
    return r;
  }
  r.bound = r.epsilon / r.c;
  r.holds = r.pi_A <= r.bound * (1.0 + 1e-12) + 1e-15;
  return r;
}

// ---------------------------------------------------------------------------

inline constexpr double kTailFloor = 1e-14;

/// Least-squares line through log pi(#zeros > k) over k >= 1 with values
/// above the numerical floor.
inline TailFit tail_geometric_fit(const StationaryDist& sd) {
  const auto tail = marginals(sd).zeros_tail;
  std::vector<double> ks, logs;
  std::size_t k_min = 0, k_max = 0;
  for (std::size_t k = 1; k < tail.size(); ++k) {
    if (!(tail[k] > kTailFloor)) break;
    if (ks.empty()) k_min = k;
    k_max = k;
    ks.push_back(double(k));
    logs.push_back(std::log(tail[k]));
  }
  if (ks.size() < 3) throw std::invalid_argument("tail_geometric_fit: fewer than 3 usable tail points");
  const auto line = fit_line(ks, logs);
  TailFit f;
  f.c1 = std::exp(line.intercept);
  f.c2 = -line.slope;
  f.c2_ci_lo = f.c2_ci_hi = f.c2;
  f.k_min = k_min;
  f.k_max = k_max;
  f.rms_residual = line.rms_residual;
  return f;
}

}  // namespace bslab
