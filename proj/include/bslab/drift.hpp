#pragma once

// Typed particles (zeros) and the Lyapunov function f = n1 + (1-h) n2.
// One-step drifts of the embedded chain are computed exactly by enumerating
// every mark outcome on the chosen closed neighbourhood, and compared with
// the displayed bounds over all configurations of a small graph.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bslab/bounds.hpp"
#include "bslab/dynamics.hpp"
#include "bslab/error.hpp"
#include "bslab/graph.hpp"
#include "bslab/stats.hpp"

namespace bslab {

struct TypedCensus {
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  std::size_t total() const { return n1 + n2; }
  friend bool operator==(const TypedCensus&, const TypedCensus&) = default;
};

/// labels[x]: 0 for a one, 1 for a lonely zero, 2 for a zero with a zero
/// neighbour.
struct Classification {
  TypedCensus census;
  std::vector<std::uint8_t> labels;
};

inline Classification classify_zeros(const Graph& g, const Configuration& c) {
  check_config(g, c);
  Classification out;
  out.labels.assign(g.num_vertices(), 0);
  for (Vertex x = 0; x < g.num_vertices(); ++x) {
    if (c[x]) continue;
    const auto nb = g.neighbours(x);
    const bool paired = std::any_of(nb.begin(), nb.end(), [&](Vertex y) { return c[y] == 0; });
    out.labels[x] = paired ? 2 : 1;
    ++(paired ? out.census.n2 : out.census.n1);
  }
  return out;
}

inline double lyapunov_f(const TypedCensus& c, double h) {
  if (!(h >= 0.0 && h < 1.0)) throw std::invalid_argument("lyapunov_f: h must lie in [0,1)");
  return double(c.n1) + (1.0 - h) * double(c.n2);
}

inline double choose_h(double q, int d) {
  const auto w = h_window(q, d);
  if (w.empty()) throw std::domain_error("choose_h: empty h window at q=" + fmt_num(q) + ", d=" + std::to_string(d));
  return w.midpoint();
}

/// Expectations for one update at a chosen zero v.
struct UpdateDecomposition {
  Vertex v = 0;
  int type = 1;   // type of v before the update
  int m = 0;      // zero neighbours of v
  double w = 1;   // weight of v in f
  double x1 = 0;  // E new type-1 particles in the closed neighbourhood
  double x2 = 0;  // E new type-2 particles in the closed neighbourhood
  double z = 0;   // E outside particles turning type 2 -> 1
  double z_rev = 0;  // E outside particles turning type 1 -> 2
  double dN = 0;     // E change in #zeros
  double dN2 = 0;    // E change in #type-2
  double df = 0;     // E change in f
  double min_dN2 = 0;       // smallest realised change in #type-2
  double max_abs_df = 0;    // largest realised |change in f|
  double incr_slack = 0;    // min over outcomes of (pathwise bound - realised df)
};

namespace detail {

// Bitmask engine for graphs with at most 32 vertices.
class DriftEngine {
 public:
  explicit DriftEngine(const Graph& g) : g_(&g), n_(g.num_vertices()) {
    if (n_ > 32) throw BudgetExceeded("drift: at most 32 vertices");
    nbr_.resize(n_);
    closed_.resize(n_);
    ball2_.resize(n_);
    hood_.resize(n_);
    for (Vertex x = 0; x < n_; ++x) {
      for (Vertex y : g.neighbours(x)) nbr_[x] |= bit(y);
      closed_[x] = nbr_[x] | bit(x);
      hood_[x] = g.closed_neighbourhood(x);
      if (hood_[x].size() > 16) throw BudgetExceeded("drift: closed neighbourhood too large to enumerate");
    }
    for (Vertex x = 0; x < n_; ++x) {
      std::uint32_t b = closed_[x];
      for (Vertex y : g.neighbours(x)) b |= closed_[y];
      ball2_[x] = b;
    }
  }

  static std::uint32_t bit(Vertex x) { return std::uint32_t{1} << x; }
  std::size_t size() const { return n_; }
  std::uint32_t all() const { return n_ == 32 ? ~0u : (bit(Vertex(n_)) - 1); }

  // zeros mask -> type-2 mask
  std::uint32_t type2(std::uint32_t zeros) const {
    std::uint32_t t = 0;
    for (std::uint32_t rest = zeros; rest; rest &= rest - 1) {
      const auto x = static_cast<Vertex>(std::countr_zero(rest));
      if (zeros & nbr_[x]) t |= bit(x);
    }
    return t;
  }

  TypedCensus census(std::uint32_t zeros) const {
    const auto t2 = static_cast<std::size_t>(std::popcount(type2(zeros)));
    return {static_cast<std::size_t>(std::popcount(zeros)) - t2, t2};
  }

  UpdateDecomposition update(std::uint32_t zeros, Vertex v, double p, double h) const {
    if (!(zeros & bit(v))) throw std::invalid_argument("drift: chosen vertex is not a zero");
    const double q = 1.0 - p;
    const std::uint32_t t2_before = type2(zeros);
    const std::uint32_t region = closed_[v];
    const std::uint32_t outside = ball2_[v] & ~region;  // only these can change type outside

    UpdateDecomposition u;
    u.v = v;
    u.m = std::popcount(zeros & nbr_[v]);
    u.type = u.m > 0 ? 2 : 1;
    u.w = u.type == 1 ? 1.0 : 1.0 - h;
    u.min_dN2 = std::numeric_limits<double>::infinity();
    u.incr_slack = std::numeric_limits<double>::infinity();

    const auto& hood = hood_[v];
    const std::size_t k = hood.size();
    const auto n_before = std::popcount(zeros);
    const auto n2_before = std::popcount(t2_before);
    for (std::uint32_t a = 0; a < (1u << k); ++a) {
      // bit i of a set: hood[i] becomes a one (probability p)
      std::uint32_t new_zeros = zeros & ~region;
      double prob = 1.0;
      for (std::size_t i = 0; i < k; ++i) {
        if ((a >> i) & 1u) {
          prob *= p;
        } else {
          prob *= q;
          new_zeros |= bit(hood[i]);
        }
      }
      const std::uint32_t t2_after = type2(new_zeros);
      const std::uint32_t fresh = new_zeros & region;
      const double x2 = std::popcount(fresh & t2_after);
      const double x1 = std::popcount(fresh) - x2;
      const std::uint32_t ext = zeros & outside;
      const double z = std::popcount(ext & t2_before & ~t2_after);
      const double z_rev = std::popcount(ext & ~t2_before & t2_after);
      const double dN = std::popcount(new_zeros) - n_before;
      const double dN2 = std::popcount(t2_after) - n2_before;
      const double df = dN - h * dN2;
      const double pathwise = x1 + (1.0 - h) * x2 + h * z - (1.0 - h) * u.m - u.w;
      u.x1 += prob * x1;
      u.x2 += prob * x2;
      u.z += prob * z;
      u.z_rev += prob * z_rev;
      u.dN += prob * dN;
      u.dN2 += prob * dN2;
      u.df += prob * df;
      u.min_dN2 = std::min(u.min_dN2, dN2);
      u.max_abs_df = std::max(u.max_abs_df, std::abs(df));
      u.incr_slack = std::min(u.incr_slack, pathwise - df);
    }
    return u;
  }

 private:
  const Graph* g_;
  std::size_t n_;
  std::vector<std::uint32_t> nbr_, closed_, ball2_;
  std::vector<std::vector<Vertex>> hood_;
};

inline std::uint32_t zeros_mask(const Configuration& c) {
  std::uint32_t z = 0;
  for (std::size_t x = 0; x < c.size(); ++x)
    if (!c[x]) z |= std::uint32_t{1} << x;
  return z;
}

}  // namespace detail

struct DriftReport {
  TypedCensus census;
  double h = 0.0;
  double drift = 0.0;     // E[f(next) - f(now)], chosen zero uniform
  double drift_N = 0.0;   // E[change in #zeros]
  double drift_N2 = 0.0;  // E[change in #type-2]
  double cond_type1 = std::numeric_limits<double>::quiet_NaN();  // mean over type-1 choices
  double cond_type2 = std::numeric_limits<double>::quiet_NaN();
  std::vector<UpdateDecomposition> updates;
  // Bounds with d = max degree.
  double n_drift_bound = 0.0;
  double simple_bound = 0.0;
  double type1_bound = 0.0;
  std::optional<double> type2_bound;
  std::optional<double> combined_bound;  // n1/n * type1 + n2/n * type2
  double margin_N = 0.0;                 // bound - exact
  double margin_simple = 0.0;
  std::optional<double> margin_combined;
};

inline DriftReport exact_drift(const Graph& g, const Configuration& c, const ModelParams& params, double h) {
  check_config(g, c);
  const detail::DriftEngine eng(g);
  const std::uint32_t zeros = detail::zeros_mask(c);
  if (!zeros) throw std::invalid_argument("exact_drift: configuration has no zeros");
  const double q = params.q();
  const int d = static_cast<int>(g.max_degree());

  DriftReport r;
  r.h = h;
  r.census = eng.census(zeros);
  double s1 = 0.0, s2 = 0.0;
  for (std::uint32_t rest = zeros; rest; rest &= rest - 1) {
    const auto v = static_cast<Vertex>(std::countr_zero(rest));
    auto u = eng.update(zeros, v, params.p(), h);
    r.drift += u.df;
    r.drift_N += u.dN;
    r.drift_N2 += u.dN2;
    (u.type == 1 ? s1 : s2) += u.df;
    r.updates.push_back(u);
  }
  const double n = double(r.census.total());
  r.drift /= n;
  r.drift_N /= n;
  r.drift_N2 /= n;
  if (r.census.n1) r.cond_type1 = s1 / double(r.census.n1);
  if (r.census.n2) r.cond_type2 = s2 / double(r.census.n2);

  r.n_drift_bound = n_drift_bound(q, d, r.census.n1, r.census.n2);
  r.simple_bound = simple_drift_bound(q, d, h, r.census.n1, r.census.n2);
  r.type1_bound = drift_type1_bound(q, d, h);
  if (h < h_side_limit(q, d)) {
    r.type2_bound = drift_type2_bound(q, d, h);
    r.combined_bound = (double(r.census.n1) * r.type1_bound + double(r.census.n2) * *r.type2_bound) / n;
    r.margin_combined = *r.combined_bound - r.drift;
  }
  r.margin_N = r.n_drift_bound - r.drift_N;
  r.margin_simple = r.simple_bound - r.drift;
  return r;
}

// ---------------------------------------------------------------------------
// Exhaustive scan

/// Smallest (bound - exact) per inequality; negative means a violation.
struct MarginSummary {
  double min_margin = std::numeric_limits<double>::infinity();
  std::uint64_t checks = 0;
  std::uint64_t violations = 0;
  std::uint32_t worst_state = 0;

  void add(double margin, std::uint32_t state, double tol = 1e-12) {
    ++checks;
    if (margin < -tol) ++violations;
    if (margin < min_margin) {
      min_margin = margin;
      worst_state = state;
    }
  }
  bool ok() const { return violations == 0; }
};

struct DriftRow {
  std::uint32_t state = 0;  // bit x set = vertex x is a one
  std::string cond_type;    // "1", "2" or "all"
  int m = 0;
  double exact = 0.0;
  double bound = 0.0;
};

struct ScanReport {
  std::string graph;
  double q = 0.0;
  double h = 0.0;
  int d = 0;
  bool constant_degree = true;  // refined bounds only checked when true
  std::string warning;
  std::uint64_t configurations = 0;

  MarginSummary n_drift;           // E dN <= (d+1)q - 1 - n2/n
  MarginSummary simple;            // Delta <= simple bound
  MarginSummary type2_after_type1; // E dN2 >= 2 q^2 (v type 1)
  MarginSummary type2_after_type2; // E dN2 >= -(1 + d^2) (v type 2)
  MarginSummary progeny_total;     // |E(X1+X2) - q(d+1)| (recorded as -|diff|)
  MarginSummary progeny_type2;     // E X2 >= d q^2 + q(1-(1-q)^d) (v type 1)
  MarginSummary transitions;       // E Z <= m (1-q)(d-1)
  MarginSummary pathwise;          // f' - f <= X1 + (1-h) X2 + h Z - (1-h) M - W, per outcome
  MarginSummary type1;             // conditional drift <= type-1 bound
  MarginSummary type2;             // conditional drift <= type-2 bound at its m
  MarginSummary type2_m1;          // conditional drift <= type-2 bound at m = 1
  MarginSummary combined;          // Delta <= n1/n B1 + n2/n B2

  double max_drift = -std::numeric_limits<double>::infinity();  // over configurations
  std::uint32_t max_drift_state = 0;
  double max_abs_increment = 0.0;
  double increment_bound = 0.0;
  double linearity_error = 0.0;  // |E dN2 - (drift(h=0) - drift(h)) / h|

  bool bounds_hold() const {
    bool ok = n_drift.ok() && simple.ok() && type2_after_type1.ok() && type2_after_type2.ok() && pathwise.ok();
    if (constant_degree)
      ok = ok && progeny_total.ok() && progeny_type2.ok() && transitions.ok() && type1.ok() && type2.ok() &&
           type2_m1.ok() && combined.ok();
    return ok;
  }
  bool negative() const { return max_drift < 0.0; }
  /// Realised epsilon: Delta <= -epsilon on every configuration.
  double epsilon() const { return -max_drift; }
};

inline ScanReport verify_all_bounds(const Graph& g, const ModelParams& params, double h,
                                    std::vector<DriftRow>* rows = nullptr, std::size_t max_vertices = 16) {
  const std::size_t n = g.num_vertices();
  if (n > max_vertices) throw BudgetExceeded("verify_all_bounds: more than " + std::to_string(max_vertices) + " vertices");
  if (!(h > 0.0 && h < 1.0)) throw std::invalid_argument("verify_all_bounds: h must lie in (0,1)");
  const detail::DriftEngine eng(g);
  const double p = params.p(), q = params.q();
  const int d = static_cast<int>(g.max_degree());

  ScanReport rep;
  rep.graph = g.label();
  rep.q = q;
  rep.h = h;
  rep.d = d;
  rep.constant_degree = g.is_regular();
  if (!rep.constant_degree) rep.warning = "graph is not regular: refined type-1/type-2 bounds skipped";
  rep.increment_bound = increment_bound(d, h);
  const bool side_ok = h < h_side_limit(q, d);
  const double b1 = drift_type1_bound(q, d, h);
  const double b2 = drift_type2_bound(q, d, h);

  const std::uint32_t all = eng.all();
  for (std::uint32_t ones = 0; ones < all; ++ones) {
    const std::uint32_t zeros = ~ones & all;
    const TypedCensus cen = eng.census(zeros);
    const double nz = double(cen.total());
    double drift = 0.0, dN = 0.0, dN2 = 0.0, drift0 = 0.0;
    for (std::uint32_t rest = zeros; rest; rest &= rest - 1) {
      const auto v = static_cast<Vertex>(std::countr_zero(rest));
      const auto u = eng.update(zeros, v, p, h);
      drift += u.df;
      dN += u.dN;
      dN2 += u.dN2;
      drift0 += u.dN;
      rep.max_abs_increment = std::max(rep.max_abs_increment, u.max_abs_df);
      rep.pathwise.add(u.incr_slack, ones);
      if (u.type == 1) {
        rep.type2_after_type1.add(u.dN2 - type2_change_lb_after_type1(q), ones);
      } else {
        rep.type2_after_type2.add(u.dN2 - type2_change_lb_after_type2(d), ones);
      }
      if (rep.constant_degree) {
        rep.progeny_total.add(-std::abs(u.x1 + u.x2 - q * double(d + 1)), ones, 1e-12);
        if (u.type == 1) {
          rep.progeny_type2.add(u.x2 - type2_progeny_lb(q, d), ones);
          rep.type1.add(b1 - u.df, ones);
          if (rows) rows->push_back({ones, "1", 0, u.df, b1});
        } else {
          rep.transitions.add(double(u.m) * (1.0 - q) * double(d - 1) - u.z, ones);
          const double bm = drift_type2_bound_m(q, d, h, u.m);
          rep.type2.add(bm - u.df, ones);
          if (side_ok) rep.type2_m1.add(b2 - u.df, ones);
          if (rows) rows->push_back({ones, "2", u.m, u.df, bm});
        }
      }
    }
    drift /= nz;
    dN /= nz;
    dN2 /= nz;
    drift0 /= nz;
    ++rep.configurations;
    rep.n_drift.add(n_drift_bound(q, d, cen.n1, cen.n2) - dN, ones);
    rep.simple.add(simple_drift_bound(q, d, h, cen.n1, cen.n2) - drift, ones);
    if (rep.constant_degree && side_ok) {
      const double comb = (double(cen.n1) * b1 + double(cen.n2) * b2) / nz;
      rep.combined.add(comb - drift, ones);
      if (rows) rows->push_back({ones, "all", 0, drift, comb});
    } else if (rows) {
      rows->push_back({ones, "all", 0, drift, simple_drift_bound(q, d, h, cen.n1, cen.n2)});
    }
    rep.linearity_error = std::max(rep.linearity_error, std::abs(dN2 - (drift0 - drift) / h));
    if (drift > rep.max_drift) {
      rep.max_drift = drift;
      rep.max_drift_state = ones;
    }
  }
  return rep;
}

inline void write_drift_csv(std::ostream& out, const ScanReport& rep, const std::vector<DriftRow>& rows,
                            std::size_t num_vertices) {
  out << "graph,q,h,config_bits,cond_type,m,exact_drift,bound,margin\n";
  for (const auto& r : rows)
    out << rep.graph << ',' << fmt_num(rep.q) << ',' << fmt_num(rep.h) << ','
        << Configuration::from_index(r.state, num_vertices).str() << ',' << r.cond_type << ',' << r.m << ','
        << fmt_num(r.exact) << ',' << fmt_num(r.bound) << ',' << fmt_num(r.bound - r.exact) << '\n';
}

}  // namespace bslab
