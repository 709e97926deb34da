#pragma once

// Oriented bond percolation on the strip {(m, n): m + n even, 0 <= m <= 2N}.
// Bonds go from (m, n) to (m-1, n+1) and (m+1, n+1); bonds leaving [0, 2N]
// do not exist. Fields are thresholds of per-bond uniforms so that fields at
// different theta are coupled monotonically.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "bslab/rng.hpp"
#include "bslab/stats.hpp"

namespace bslab {

/// Geometry of the strip: level n holds N+1 sites (n even) or N (n odd);
/// site i of level n sits at horizontal coordinate m = 2i + (n & 1).
struct Strip {
  std::size_t N = 1;
  std::size_t levels = 1;  // number of bond layers; site levels 0..levels

  Strip() = default;
  Strip(std::size_t n, std::size_t lv) : N(n), levels(lv) {
    if (N < 1) throw std::invalid_argument("strip: N must be at least 1");
    if (levels < 1) throw std::invalid_argument("strip: need at least one level");
  }

  std::size_t width(std::size_t n) const { return (n % 2 == 0) ? N + 1 : N; }
  std::size_t coord(std::size_t n, std::size_t i) const { return 2 * i + (n & 1); }
  /// Index of coordinate m on level n, if such a site exists.
  std::optional<std::size_t> index(std::size_t n, long m) const {
    if (m < 0 || m > long(2 * N) || (std::size_t(m) + n) % 2 != 0) return std::nullopt;
    return (std::size_t(m) - (n & 1)) / 2;
  }
  // dir 0: to m-1, dir 1: to m+1
  bool bond_exists(std::size_t n, std::size_t i, int dir) const {
    const long m = long(coord(n, i)) + (dir ? 1 : -1);
    return m >= 0 && m <= long(2 * N);
  }
  std::size_t target(std::size_t n, std::size_t i, int dir) const {
    const long m = long(coord(n, i)) + (dir ? 1 : -1);
    return *index(n + 1, m);
  }
};

/// Per-bond uniforms; bond (n, i, dir) lives at offset 2 * (site offset) + dir.
class StripUniforms {
 public:
  StripUniforms(const Strip& s, Rng& rng) : strip_(s) {
    offsets_.resize(s.levels + 1, 0);
    for (std::size_t n = 0; n < s.levels; ++n) offsets_[n + 1] = offsets_[n] + s.width(n);
    u_.resize(2 * offsets_.back());
    for (auto& v : u_) v = rng.uniform();
  }
  const Strip& strip() const { return strip_; }
  double at(std::size_t n, std::size_t i, int dir) const { return u_[2 * (offsets_[n] + i) + dir]; }

 private:
  Strip strip_;
  std::vector<std::size_t> offsets_;
  std::vector<double> u_;
};

class StripField {
 public:
  StripField() = default;
  StripField(const Strip& s, double theta) : strip_(s), theta_(theta) {
    if (!(theta >= 0.0 && theta <= 1.0)) throw std::invalid_argument("theta must lie in [0,1]");
    offsets_.resize(s.levels + 1, 0);
    for (std::size_t n = 0; n < s.levels; ++n) offsets_[n + 1] = offsets_[n] + s.width(n);
    open_.assign(2 * offsets_.back(), 0);
  }

  /// Bond open iff its uniform is below theta.
  static StripField threshold(const StripUniforms& u, double theta) {
    StripField f(u.strip(), theta);
    const Strip& s = u.strip();
    for (std::size_t n = 0; n < s.levels; ++n)
      for (std::size_t i = 0; i < s.width(n); ++i)
        for (int dir = 0; dir < 2; ++dir)
          if (s.bond_exists(n, i, dir)) f.set(n, i, dir, u.at(n, i, dir) < theta);
    return f;
  }

  const Strip& strip() const { return strip_; }
  double theta() const { return theta_; }
  bool open(std::size_t n, std::size_t i, int dir) const { return open_[2 * (offsets_[n] + i) + dir]; }
  void set(std::size_t n, std::size_t i, int dir, bool v) {
    if (!strip_.bond_exists(n, i, dir)) {
      if (v) throw std::invalid_argument("strip: bond leaves the strip");
      return;
    }
    open_[2 * (offsets_[n] + i) + dir] = v;
  }

  std::size_t existing_bonds() const {
    std::size_t c = 0;
    for (std::size_t n = 0; n < strip_.levels; ++n)
      for (std::size_t i = 0; i < strip_.width(n); ++i) c += strip_.bond_exists(n, i, 0) + strip_.bond_exists(n, i, 1);
    return c;
  }
  std::size_t open_bonds() const {
    std::size_t c = 0;
    for (auto b : open_) c += b;
    return c;
  }

 private:
  Strip strip_;
  double theta_ = 0.0;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint8_t> open_;
};

inline StripField sample_strip(std::size_t N, double theta, std::size_t levels, Rng& rng) {
  const StripUniforms u(Strip(N, levels), rng);
  return StripField::threshold(u, theta);
}

struct LevelSet {
  std::size_t level = 0;
  std::vector<std::uint8_t> member;  // indexed by site index on the level

  std::size_t count() const {
    std::size_t c = 0;
    for (auto b : member) c += b;
    return c;
  }
  bool empty() const { return count() == 0; }
  bool contains(std::size_t i) const { return i < member.size() && member[i]; }
  bool subset_of(const LevelSet& o) const {
    for (std::size_t i = 0; i < member.size(); ++i)
      if (member[i] && !o.contains(i)) return false;
    return true;
  }
};

inline LevelSet level_set(const Strip& s, std::size_t n, const std::vector<std::size_t>& sites) {
  LevelSet b{n, std::vector<std::uint8_t>(s.width(n), 0)};
  for (auto i : sites) {
    if (i >= s.width(n)) throw std::out_of_range("level set: site index out of range");
    b.member[i] = 1;
  }
  return b;
}

inline LevelSet full_level(const Strip& s, std::size_t n) {
  return {n, std::vector<std::uint8_t>(s.width(n), 1)};
}

/// One level of frontier propagation.
inline LevelSet advance(const StripField& f, const LevelSet& cur) {
  const Strip& s = f.strip();
  const std::size_t n = cur.level;
  if (n >= s.levels) throw std::out_of_range("evolve: level out of range");
  LevelSet next{n + 1, std::vector<std::uint8_t>(s.width(n + 1), 0)};
  for (std::size_t i = 0; i < cur.member.size(); ++i) {
    if (!cur.member[i]) continue;
    for (int dir = 0; dir < 2; ++dir)
      if (s.bond_exists(n, i, dir) && f.open(n, i, dir)) next.member[s.target(n, i, dir)] = 1;
  }
  return next;
}

/// xi_upto^B for B at level 0.
inline LevelSet evolve(const StripField& f, const LevelSet& B, std::size_t upto) {
  if (B.level != 0) throw std::invalid_argument("evolve: B must sit on level 0");
  if (B.member.size() != f.strip().width(0)) throw std::invalid_argument("evolve: B has wrong width");
  if (upto > f.strip().levels) throw std::out_of_range("evolve: level out of range");
  LevelSet cur = B;
  while (cur.level < upto) cur = advance(f, cur);
  return cur;
}

/// |S| / |H_n| >= h.
inline bool is_h_good(const Strip& s, const LevelSet& S, double h) {
  if (!(h > 0.0 && h <= 1.0)) throw std::invalid_argument("is_h_good: h must lie in (0,1]");
  return double(S.count()) >= h * double(s.width(S.level));
}

// ---------------------------------------------------------------------------
// Estimators. Each sample draws a fresh uniform field from aux stream
// (seed, sample); fields at different theta share uniforms.

struct PercolationEstimate {
  Estimate estimate;
  std::size_t n_samples = 0;
  std::string note;
};

namespace detail {

inline Rng strip_stream(std::uint64_t seed, std::size_t sample) {
  return aux_stream(seed, static_cast<std::uint32_t>(sample), stream_tag::strip);
}

inline PercolationEstimate bernoulli_estimate(std::uint64_t hits, std::size_t n, std::string note = {}) {
  PercolationEstimate r;
  r.estimate = estimate_proportion(hits, n);
  r.n_samples = n;
  r.note = std::move(note);
  return r;
}

}  // namespace detail

/// P[x -> y] with x = (mx, 0) and y = (my, K N).
inline PercolationEstimate prob_connect(std::size_t N, double theta, std::size_t K, std::size_t mx, std::size_t my,
                                        std::size_t n_samples, std::uint64_t seed) {
  const Strip s(N, K * N);
  const auto xi = s.index(0, long(mx));
  const auto yi = s.index(s.levels, long(my));
  if (!xi) throw std::invalid_argument("prob_connect: x is not a site of level 0");
  if (!yi) return detail::bernoulli_estimate(0, std::max<std::size_t>(n_samples, 1), "y is not a site of level KN");
  if (n_samples == 0) throw std::invalid_argument("prob_connect: need samples");
  std::uint64_t hits = 0;
  for (std::size_t k = 0; k < n_samples; ++k) {
    Rng rng = detail::strip_stream(seed, k);
    const auto f = StripField::threshold(StripUniforms(s, rng), theta);
    hits += evolve(f, level_set(s, 0, {*xi}), s.levels).contains(*yi);
  }
  return detail::bernoulli_estimate(hits, n_samples);
}

/// P[xi_{KN}^B is (1-h)-good], B given as level-0 coordinates.
inline PercolationEstimate prob_good_level(std::size_t N, double theta, std::size_t K, double h,
                                           const std::vector<std::size_t>& B_coords, std::size_t n_samples,
                                           std::uint64_t seed) {
  const Strip s(N, K * N);
  std::vector<std::size_t> sites;
  for (auto m : B_coords) {
    const auto i = s.index(0, long(m));
    if (!i) throw std::invalid_argument("prob_good_level: B contains a non-site");
    sites.push_back(*i);
  }
  if (n_samples == 0) throw std::invalid_argument("prob_good_level: need samples");
  const LevelSet B = level_set(s, 0, sites);
  std::uint64_t hits = 0;
  for (std::size_t k = 0; k < n_samples; ++k) {
    Rng rng = detail::strip_stream(seed, k);
    const auto f = StripField::threshold(StripUniforms(s, rng), theta);
    hits += is_h_good(s, evolve(f, B, s.levels), 1.0 - h);
  }
  std::string note;
  if (!(h / 2.0 * std::log(1.0 / (1.0 - theta)) > (1.0 - h) * std::log(3.0))) note = "side condition violated: bound not asserted";
  return detail::bernoulli_estimate(hits, n_samples, note);
}

// ---------------------------------------------------------------------------
// Contour sums

struct ContourReport {
  double short_sum = 0.0;   // (1-theta) + sum_{k=2}^{floor(hN)} k 3^k (1-theta)^{k/2}
  double long_term = 0.0;   // N^2 exp((1-h) N ln 3 - (h N / 2) ln(1/(1-theta))), unit constant
  double exponent_rate = 0.0;  // (1-h) ln 3 - (h/2) ln(1/(1-theta)), per unit N
  bool summable = false;       // 3 sqrt(1-theta) < 1
  bool side_condition_ok = false;
  std::optional<std::size_t> n0;  // long_term decreasing for all N >= n0
};

/// Smallest N0 with N^2 e^{aN} decreasing for every N >= N0 (a < 0).
inline std::optional<std::size_t> contour_n0(double rate) {
  if (!(rate < 0.0)) return std::nullopt;
  // (N+1)^2 / N^2 * e^a < 1  <=>  2 ln(1 + 1/N) < -a  <=>  N > 1 / expm1(-a/2).
  auto decreasing = [rate](std::size_t n) { return 2.0 * std::log1p(1.0 / double(n)) < -rate; };
  const double x = 1.0 / std::expm1(-rate / 2.0);
  if (!(x < 1e18)) return std::numeric_limits<std::size_t>::max();
  auto n = static_cast<std::size_t>(std::max(1.0, std::floor(x)));
  while (n > 1 && decreasing(n - 1)) --n;
  while (!decreasing(n)) ++n;
  return n;
}

inline ContourReport contour_bounds(std::size_t N, double theta, double h, std::size_t K = 3) {
  (void)K;  // the displayed bounds do not depend on K
  if (!(theta > 8.0 / 9.0 && theta < 1.0)) throw std::domain_error("contour_bounds: theta must lie in (8/9, 1)");
  if (!(h > 0.0 && h < 1.0)) throw std::invalid_argument("contour_bounds: h must lie in (0,1)");
  const double eps = 1.0 - theta;
  ContourReport r;
  r.summable = 3.0 * std::sqrt(eps) < 1.0;
  r.short_sum = eps;
  const auto kmax = static_cast<std::size_t>(std::floor(h * double(N)));
  for (std::size_t k = 2; k <= kmax; ++k) r.short_sum += double(k) * std::pow(3.0, double(k)) * std::pow(eps, double(k) / 2.0);
  r.exponent_rate = (1.0 - h) * std::log(3.0) - h / 2.0 * std::log(1.0 / eps);
  r.side_condition_ok = r.exponent_rate < 0.0;
  r.long_term = double(N) * double(N) * std::exp(r.exponent_rate * double(N));
  r.n0 = contour_n0(r.exponent_rate);
  return r;
}

// ---------------------------------------------------------------------------
// Exhaustive oracle for tiny strips

/// Whether some open oriented path joins (x, 0) to (y, levels), by explicit
/// enumeration of all 2^levels direction sequences.
inline bool connected_by_paths(const StripField& f, std::size_t x, std::size_t y) {
  const Strip& s = f.strip();
  const std::size_t L = s.levels;
  if (L > 30) throw std::invalid_argument("connected_by_paths: too many levels");
  for (std::uint32_t dirs = 0; dirs < (1u << L); ++dirs) {
    std::size_t i = x;
    bool ok = true;
    for (std::size_t n = 0; n < L && ok; ++n) {
      const int d = (dirs >> n) & 1u;
      if (!s.bond_exists(n, i, d) || !f.open(n, i, d)) ok = false;
      else i = s.target(n, i, d);
    }
    if (ok && i == y) return true;
  }
  return false;
}

/// Exact P[x -> y] summed over every field of the strip (at most 20 bonds).
inline double exact_connect_probability(std::size_t N, std::size_t levels, double theta, std::size_t x,
                                        std::size_t y) {
  const Strip s(N, levels);
  std::vector<std::tuple<std::size_t, std::size_t, int>> bonds;
  for (std::size_t n = 0; n < levels; ++n)
    for (std::size_t i = 0; i < s.width(n); ++i)
      for (int d = 0; d < 2; ++d)
        if (s.bond_exists(n, i, d)) bonds.emplace_back(n, i, d);
  if (bonds.size() > 20) throw std::invalid_argument("exact_connect_probability: too many bonds");
  double total = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << bonds.size()); ++mask) {
    StripField f(s, theta);
    double w = 1.0;
    for (std::size_t b = 0; b < bonds.size(); ++b) {
      const bool o = (mask >> b) & 1u;
      const auto [n, i, d] = bonds[b];
      f.set(n, i, d, o);
      w *= o ? theta : 1.0 - theta;
    }
    if (connected_by_paths(f, x, y)) total += w;
  }
  return total;
}

inline void write_percolation_csv_header(std::ostream& out) {
  out << "N,theta,K,h,functional,estimate,stderr,n_samples,seed\n";
}

inline void write_percolation_csv_row(std::ostream& out, std::size_t N, double theta, std::size_t K, double h,
                                      const std::string& functional, const PercolationEstimate& e,
                                      std::uint64_t seed) {
  out << N << ',' << fmt_num(theta) << ',' << K << ',' << fmt_num(h) << ',' << functional << ','
      << fmt_num(e.estimate.mean) << ',' << fmt_num(e.estimate.se) << ',' << e.n_samples << ',' << seed << '\n';
}

}  // namespace bslab
