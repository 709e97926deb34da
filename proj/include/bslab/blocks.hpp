#pragma once

// Sticks, 2-blocks and 4-blocks read off a graphical construction, the block
// tilings over a chain, and the induced oriented-percolation field.
//
// Time windows are half-open (t0, t1]: a stick of level k >= 1 covers
// ((k-1)L, kL], a tiling row n >= 0 covers (nL, (n+1)L].

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <iterator>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bslab/bounds.hpp"
#include "bslab/dynamics.hpp"
#include "bslab/graph.hpp"
#include "bslab/percolation.hpp"
#include "bslab/stats.hpp"

namespace bslab {

struct Window {
  double t0 = 0.0;
  double t1 = 0.0;
};

struct Stick {
  Vertex base = 0;
  std::size_t level = 1;
  double L = 1.0;
  Window window() const {
    if (level < 1) throw std::invalid_argument("stick level must be >= 1");
    return {double(level - 1) * L, double(level) * L};
  }
};

struct Block2 {
  Vertex x = 0;
  Vertex y = 0;
};

/// Four consecutive chain vertices x0..x3.
struct Block4 {
  std::array<Vertex, 4> sites{};

  static Block4 on_chain(const ChainPath& chain, std::size_t k0) {
    if (k0 + 4 > chain.length()) throw std::out_of_range("4-block runs past the chain end");
    return {{chain[k0], chain[k0 + 1], chain[k0 + 2], chain[k0 + 3]}};
  }
  /// No edges x0~x2 or x1~x3; needed for the zero-transport claim.
  bool chord_free(const Graph& g) const {
    return !g.adjacent(sites[0], sites[2]) && !g.adjacent(sites[1], sites[3]) && !g.adjacent(sites[0], sites[3]);
  }
};

struct Block4Status {
  bool all_rang = false;
  bool core_good = false;     // the four sticks with their prescribed A-sets
  bool outside_good = false;  // A_w-goodness for every outside neighbour
  bool forward = false;       // increasing rings x0, x1, x2
  bool backward = false;      // increasing rings x3, x2, x1
  bool nice() const { return all_rang && core_good && outside_good && forward && backward; }
};

/// Read-only queries on one realization.
class BlockInspector {
 public:
  BlockInspector(const Graph& g, const GraphicalConstruction& gc) : g_(&g), gc_(&gc), nbhd_(g) {
    if (gc.rings.size() != g.num_vertices()) throw std::invalid_argument("graphical construction belongs to another graph");
  }

  const Graph& graph() const { return *g_; }

  std::span<const Ring> rings(Vertex x, Window w) const {
    check_window(w);
    const auto& r = gc_->rings[x];
    auto lo = std::upper_bound(r.begin(), r.end(), w.t0, [](double t, const Ring& ring) { return t < ring.time; });
    auto hi = std::upper_bound(lo, r.end(), w.t1, [](double t, const Ring& ring) { return t < ring.time; });
    return {lo, hi};
  }

  /// Every ring of the x-stick in w marks 0 on each vertex of A.
  bool stick_good(Vertex x, Window w, std::span<const Vertex> A) const {
    Marks mask = 0;
    const auto hood = nbhd_[x];
    for (Vertex a : A) {
      auto it = std::lower_bound(hood.begin(), hood.end(), a);
      if (it == hood.end() || *it != a) throw std::invalid_argument("stick_good: A must lie in the closed neighbourhood");
      mask |= Marks{1} << (it - hood.begin());
    }
    for (const Ring& r : rings(x, w))
      if (r.marks & mask) return false;
    return true;
  }
  bool stick_good(const Stick& s, std::span<const Vertex> A) const { return stick_good(s.base, s.window(), A); }

  bool block2_nice(const Block2& b, Window w) const {
    if (!g_->adjacent(b.x, b.y)) throw std::invalid_argument("2-block sites must be adjacent");
    if (rings(b.x, w).empty() || rings(b.y, w).empty()) return false;
    const std::array<Vertex, 2> xy{std::min(b.x, b.y), std::max(b.x, b.y)};
    if (!stick_good(b.x, w, xy) || !stick_good(b.y, w, xy)) return false;
    for (Vertex u : outside({b.x, b.y})) {
      std::vector<Vertex> A;
      for (Vertex s : xy)
        if (g_->adjacent(u, s)) A.push_back(s);
      if (!stick_good(u, w, A)) return false;
    }
    return true;
  }

  Block4Status block4_status(const Block4& b, Window w) const {
    const auto& s = b.sites;
    Block4Status st;
    st.all_rang = std::all_of(s.begin(), s.end(), [&](Vertex x) { return !rings(x, w).empty(); });
    auto sorted = [](std::vector<Vertex> v) {
      std::sort(v.begin(), v.end());
      return v;
    };
    st.core_good = stick_good(s[0], w, sorted({s[0], s[1]})) && stick_good(s[1], w, sorted({s[0], s[1], s[2]})) &&
                   stick_good(s[2], w, sorted({s[1], s[2], s[3]})) && stick_good(s[3], w, sorted({s[2], s[3]}));
    st.outside_good = true;
    for (Vertex u : outside({s[0], s[1], s[2], s[3]})) {
      std::vector<Vertex> A;
      for (Vertex x : s)
        if (g_->adjacent(u, x)) A.push_back(x);
      if (!stick_good(u, w, sorted(A))) {
        st.outside_good = false;
        break;
      }
    }
    st.forward = increasing_rings({s[0], s[1], s[2]}, w);
    st.backward = increasing_rings({s[3], s[2], s[1]}, w);
    return st;
  }
  bool block4_nice(const Block4& b, Window w) const { return block4_status(b, w).nice(); }

  /// Whether rings at seq[0], seq[1], ... occur at increasing times in w
  /// (greedy: earliest admissible ring at each step).
  bool increasing_rings(std::initializer_list<Vertex> seq, Window w) const {
    double t = w.t0;
    for (Vertex x : seq) {
      const auto r = rings(x, {t, w.t1});
      if (r.empty()) return false;
      t = r.front().time;
    }
    return true;
  }

 private:
  void check_window(Window w) const {
    if (!(w.t0 >= 0.0 && w.t1 > w.t0)) throw std::invalid_argument("bad time window");
    if (w.t1 > gc_->horizon * (1.0 + 1e-12)) throw std::out_of_range("time window beyond the construction horizon");
  }

  // Vertices adjacent to some block site, excluding the block.
  std::vector<Vertex> outside(std::initializer_list<Vertex> block) const {
    std::vector<Vertex> out;
    for (Vertex x : block)
      for (Vertex u : g_->neighbours(x))
        if (std::find(block.begin(), block.end(), u) == block.end()) out.push_back(u);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  const Graph* g_;
  const GraphicalConstruction* gc_;
  NeighbourhoodTable nbhd_;
};

inline bool stick_is_good(const Graph& g, const GraphicalConstruction& gc, const Stick& s, std::span<const Vertex> A) {
  return BlockInspector(g, gc).stick_good(s, A);
}

inline bool block2_is_nice(const Graph& g, const GraphicalConstruction& gc, const Block2& b, std::size_t level,
                           double L) {
  return BlockInspector(g, gc).block2_nice(b, Stick{b.x, level, L}.window());
}

inline bool block4_is_nice(const Graph& g, const GraphicalConstruction& gc, const Block4& b, double start, double L) {
  return BlockInspector(g, gc).block4_nice(b, {start, start + L});
}

// ---------------------------------------------------------------------------
// Zero-transport claims

enum class ClaimOutcome { not_nice, no_bottom_zero, pass, fail };

inline const char* to_string(ClaimOutcome c) {
  switch (c) {
    case ClaimOutcome::not_nice: return "not_nice";
    case ClaimOutcome::no_bottom_zero: return "no_bottom_zero";
    case ClaimOutcome::pass: return "pass";
    case ClaimOutcome::fail: return "fail";
  }
  return "?";
}

/// Nice 2-block with a zero at the bottom has both zeros at the top.
inline ClaimOutcome block2_proposition_check(bool nice, const Block2& b, const Configuration& bottom,
                                             const Configuration& top) {
  if (!nice) return ClaimOutcome::not_nice;
  if (bottom[b.x] && bottom[b.y]) return ClaimOutcome::no_bottom_zero;
  return (!top[b.x] && !top[b.y]) ? ClaimOutcome::pass : ClaimOutcome::fail;
}

/// Nice 4-block with a zero at an extreme site at the bottom has zeros at
/// both extremes at the top.
inline ClaimOutcome block4_propagation_check(bool nice, const Block4& b, const Configuration& bottom,
                                             const Configuration& top) {
  if (!nice) return ClaimOutcome::not_nice;
  const Vertex x0 = b.sites[0], x3 = b.sites[3];
  if (bottom[x0] && bottom[x3]) return ClaimOutcome::no_bottom_zero;
  return (!top[x0] && !top[x3]) ? ClaimOutcome::pass : ClaimOutcome::fail;
}

// ---------------------------------------------------------------------------
// Layouts of pairwise separated blocks (disjoint stick sets, hence
// independent niceness within a level).

namespace detail {

inline std::vector<Vertex> stick_set(const Graph& g, std::initializer_list<Vertex> block) {
  std::vector<Vertex> s(block);
  for (Vertex x : block)
    for (Vertex u : g.neighbours(x)) s.push_back(u);
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

}  // namespace detail

/// Two same-level 2-blocks are separated iff their stick sets are disjoint.
inline bool separated(const Graph& g, const Block2& a, const Block2& b) {
  const auto sa = detail::stick_set(g, {a.x, a.y}), sb = detail::stick_set(g, {b.x, b.y});
  std::vector<Vertex> both;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(both));
  return both.empty();
}

/// Greedy over edges (x < y, lexicographic).
inline std::vector<Block2> separated_block2_layout(const Graph& g) {
  std::vector<char> used(g.num_vertices(), 0);
  std::vector<Block2> out;
  for (const auto& [x, y] : g.edges()) {
    const auto s = detail::stick_set(g, {x, y});
    if (std::any_of(s.begin(), s.end(), [&](Vertex u) { return used[u]; })) continue;
    for (Vertex u : s) used[u] = 1;
    out.push_back({x, y});
  }
  return out;
}

/// Greedy over chord-free 4-vertex chains in lexicographic order.
inline std::vector<Block4> separated_block4_layout(const Graph& g) {
  std::vector<char> used(g.num_vertices(), 0);
  std::vector<Block4> out;
  auto free = [&](const std::vector<Vertex>& s) { return std::none_of(s.begin(), s.end(), [&](Vertex u) { return used[u]; }); };
  for (Vertex a = 0; a < g.num_vertices(); ++a) {
    if (used[a]) continue;
    std::optional<Block4> pick;
    for (Vertex b : g.neighbours(a)) {
      for (Vertex c : g.neighbours(b)) {
        if (c == a || g.adjacent(a, c)) continue;
        for (Vertex d : g.neighbours(c)) {
          if (d == a || d == b || g.adjacent(b, d) || g.adjacent(a, d)) continue;
          Block4 cand{{a, b, c, d}};
          if (!is_chain(g, std::vector<Vertex>{a, b, c, d})) continue;
          if (!free(detail::stick_set(g, {a, b, c, d}))) continue;
          pick = cand;
          break;
        }
        if (pick) break;
      }
      if (pick) break;
    }
    if (!pick) continue;
    const auto& s = pick->sites;
    for (Vertex u : detail::stick_set(g, {s[0], s[1], s[2], s[3]})) used[u] = 1;
    out.push_back(*pick);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Nice-rate sampling

enum class BlockFlavor { two_block, four_block };

inline const char* to_string(BlockFlavor f) { return f == BlockFlavor::two_block ? "two_block" : "four_block"; }

struct BlockRate {
  BlockFlavor flavor = BlockFlavor::two_block;
  double p = 0.0;
  int d = 0;
  double L = 0.0;
  std::uint64_t blocks_sampled = 0;
  std::uint64_t nice = 0;
  Estimate rate;
  double analytic_lb = 0.0;
};

/// Nice-rate over `levels` time windows of `realizations` independent
/// constructions, using a separated layout on g.
inline BlockRate sample_nice_rate(const Graph& g, BlockFlavor flavor, const ModelParams& params, double L,
                                  std::size_t levels, std::size_t realizations, std::uint64_t seed) {
  if (!(L > 0.0)) throw std::invalid_argument("L must be positive");
  BlockRate r;
  r.flavor = flavor;
  r.p = params.p();
  r.d = static_cast<int>(g.max_degree());
  r.L = L;
  const auto lay2 = flavor == BlockFlavor::two_block ? separated_block2_layout(g) : std::vector<Block2>{};
  const auto lay4 = flavor == BlockFlavor::four_block ? separated_block4_layout(g) : std::vector<Block4>{};
  if (lay2.empty() && lay4.empty()) throw std::invalid_argument("graph admits no block of this kind");
  for (std::size_t rep = 0; rep < realizations; ++rep) {
    const auto gc = sample_graphical(g, params, double(levels) * L, seed, static_cast<std::uint32_t>(rep));
    const BlockInspector ins(g, gc);
    for (std::size_t k = 1; k <= levels; ++k) {
      const Window w{double(k - 1) * L, double(k) * L};
      for (const auto& b : lay2) r.nice += ins.block2_nice(b, w);
      for (const auto& b : lay4) r.nice += ins.block4_nice(b, w);
      r.blocks_sampled += lay2.size() + lay4.size();
    }
  }
  r.rate = estimate_proportion(r.nice, r.blocks_sampled);
  r.analytic_lb = flavor == BlockFlavor::two_block ? block2_nice_lb(L, params.p(), r.d)
                                                   : std::clamp(theta_4block(L, params.p(), r.d), 0.0, 1.0);
  return r;
}

inline void write_block_csv_header(std::ostream& out) {
  out << "flavor,p,d,L,blocks_sampled,nice_rate,stderr,analytic_lb\n";
}

inline void write_block_csv_row(std::ostream& out, const BlockRate& r) {
  out << to_string(r.flavor) << ',' << fmt_num(r.p) << ',' << r.d << ',' << fmt_num(r.L) << ',' << r.blocks_sampled
      << ',' << fmt_num(r.rate.mean) << ',' << fmt_num(r.rate.se) << ',' << fmt_num(r.analytic_lb) << '\n';
}

// ---------------------------------------------------------------------------
// Independence of niceness indicators

struct CorrelationReport {
  double correlation = 0.0;
  double se = 0.0;  // 1/sqrt(n) under independence
  std::size_t n = 0;
  double rate_a = 0.0;
  double rate_b = 0.0;
  bool independent(double z = 4.0) const { return std::abs(correlation) <= z * se; }
};

namespace detail {

inline CorrelationReport correlation_of(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  CorrelationReport r;
  r.n = a.size();
  r.correlation = indicator_correlation(a, b);
  r.se = 1.0 / std::sqrt(double(r.n));
  double sa = 0, sb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
  }
  r.rate_a = sa / double(r.n);
  r.rate_b = sb / double(r.n);
  return r;
}

}  // namespace detail

/// Correlation of niceness of two same-level 2-blocks over n realizations.
inline CorrelationReport block2_independence_check(const Graph& g, const Block2& a, const Block2& b,
                                                   const ModelParams& params, double L, std::size_t n_samples,
                                                   std::uint64_t seed) {
  std::vector<std::uint8_t> ia, ib;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const auto gc = sample_graphical(g, params, L, seed, static_cast<std::uint32_t>(s));
    const BlockInspector ins(g, gc);
    ia.push_back(ins.block2_nice(a, {0.0, L}));
    ib.push_back(ins.block2_nice(b, {0.0, L}));
  }
  return detail::correlation_of(ia, ib);
}

/// Correlation of niceness of 4-blocks [0..3] and [6..9] of the chain (the
/// same-level neighbours in the stride-3 grid).
inline CorrelationReport block4_independence_check(const Graph& g, const ChainPath& chain, const ModelParams& params,
                                                   double L, std::size_t n_samples, std::uint64_t seed) {
  if (chain.length() < 10) throw std::invalid_argument("block4_independence_check: chain shorter than 10");
  const auto a = Block4::on_chain(chain, 0), b = Block4::on_chain(chain, 6);
  std::vector<std::uint8_t> ia, ib;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const auto gc = sample_graphical(g, params, L, seed, static_cast<std::uint32_t>(s));
    const BlockInspector ins(g, gc);
    ia.push_back(ins.block4_nice(a, {0.0, L}));
    ib.push_back(ins.block4_nice(b, {0.0, L}));
  }
  return detail::correlation_of(ia, ib);
}

// ---------------------------------------------------------------------------
// Block tilings over a chain and the induced percolation field
//
// two_block: row n, strip coordinate m (m + n even) is the block on chain
//   indices {m, m+1}; B_{k,n} = {2k, 2k+1} (n even) or {2k-1, 2k} (n odd).
// four_block: row n, coordinate m is the block on chain indices 3m..3m+3, so
//   a block shares its extreme sites with its two descendants.

class BlockGrid {
 public:
  BlockGrid(const ChainPath& chain, double L, BlockFlavor flavor, std::size_t levels)
      : chain_(chain), L_(L), flavor_(flavor), levels_(levels) {
    if (!(L > 0.0)) throw std::invalid_argument("BlockGrid: L must be positive");
    const std::size_t len = chain.length();
    if (flavor == BlockFlavor::two_block) {
      if (len < 4) throw std::invalid_argument("BlockGrid: chain too short for a two_block strip");
      N_ = len / 2 - 1;
    } else {
      if (len < 10) throw std::invalid_argument("BlockGrid: chain too short for a four_block strip");
      N_ = (len - 4) / 6;
    }
    if (levels < 1) throw std::invalid_argument("BlockGrid: need at least one level");
  }

  std::size_t N() const { return N_; }
  std::size_t levels() const { return levels_; }
  double L() const { return L_; }
  BlockFlavor flavor() const { return flavor_; }
  const ChainPath& chain() const { return chain_; }
  Strip strip() const { return Strip(N_, levels_); }

  /// Chain indices covered by the block at strip coordinate m.
  std::vector<std::size_t> chain_indices(std::size_t m) const {
    if (flavor_ == BlockFlavor::two_block) return {m, m + 1};
    return {3 * m, 3 * m + 1, 3 * m + 2, 3 * m + 3};
  }
  /// Block B_{k,n} of the two_block tiling as strip coordinate.
  static long two_block_coord(long k, std::size_t n) { return n % 2 == 0 ? 2 * k : 2 * k - 1; }
  Window window(std::size_t n) const { return {double(n) * L_, double(n + 1) * L_}; }

  /// Whether the block at (m, n) carries a zero at its bottom that niceness
  /// transports: any site (two_block) or an extreme site (four_block).
  bool carries_zero(std::size_t m, const Configuration& c) const {
    const auto idx = chain_indices(m);
    if (flavor_ == BlockFlavor::two_block) return !c[chain_[idx[0]]] || !c[chain_[idx[1]]];
    return !c[chain_[idx[0]]] || !c[chain_[idx[3]]];
  }

  /// four_block tilings need chord-free blocks.
  void validate(const Graph& g) const {
    if (!is_chain(g, chain_.vertices())) throw std::invalid_argument("BlockGrid: not a chain of this graph");
    if (flavor_ == BlockFlavor::four_block)
      for (std::size_t m = 0; m <= 2 * N_; ++m)
        if (!Block4::on_chain(chain_, 3 * m).chord_free(g)) throw std::invalid_argument("BlockGrid: 4-block has a chord");
  }

  bool nice(const BlockInspector& ins, std::size_t m, std::size_t n) const {
    const auto idx = chain_indices(m);
    if (flavor_ == BlockFlavor::two_block) return ins.block2_nice({chain_[idx[0]], chain_[idx[1]]}, window(n));
    return ins.block4_nice({{chain_[idx[0]], chain_[idx[1]], chain_[idx[2]], chain_[idx[3]]}}, window(n));
  }

 private:
  ChainPath chain_;
  double L_;
  BlockFlavor flavor_;
  std::size_t levels_;
  std::size_t N_ = 0;
};

struct PercolationMap {
  StripField field;
  std::vector<std::vector<std::uint8_t>> nice;  // [n][site index]
  double open_density() const {
    std::size_t c = 0, t = 0;
    for (const auto& row : nice) {
      for (auto b : row) c += b;
      t += row.size();
    }
    return t ? double(c) / double(t) : 0.0;
  }
};

/// Nice block at (m, n) opens both of its outgoing bonds.
inline PercolationMap chain_to_percolation(const Graph& g, const GraphicalConstruction& gc, const BlockGrid& grid) {
  if (gc.horizon < double(grid.levels()) * grid.L() * (1.0 - 1e-12))
    throw std::out_of_range("chain_to_percolation: horizon shorter than levels * L");
  grid.validate(g);
  const BlockInspector ins(g, gc);
  const Strip s = grid.strip();
  PercolationMap out{StripField(s, 0.0), {}};
  for (std::size_t n = 0; n < s.levels; ++n) {
    std::vector<std::uint8_t> row(s.width(n));
    for (std::size_t i = 0; i < s.width(n); ++i) {
      row[i] = grid.nice(ins, s.coord(n, i), n);
      for (int d = 0; d < 2; ++d) out.field.set(n, i, d, row[i] && s.bond_exists(n, i, d));
    }
    out.nice.push_back(std::move(row));
  }
  return out;
}

struct CouplingReport {
  std::size_t levels_checked = 0;
  std::size_t sites_reached = 0;  // total |xi_n| over n >= 1
  std::size_t violations = 0;     // sites in xi_n whose block carries no zero
};

/// Replays the process from config0 and checks that every site reached by
/// open paths from the zero-carrying blocks of row 0 carries a zero at its
/// bottom time.
inline CouplingReport percolation_coupling_check(const Graph& g, const GraphicalConstruction& gc, const BlockGrid& grid,
                                                 const Configuration& config0,
                                                 AllOnesSemantics semantics = AllOnesSemantics::restart) {
  const auto map = chain_to_percolation(g, gc, grid);
  const Strip s = grid.strip();
  ReplayOptions opts;
  opts.semantics = semantics;
  for (std::size_t n = 0; n <= s.levels; ++n) opts.snapshot_times.push_back(double(n) * grid.L());
  const auto rep = replay(g, config0, gc, opts);

  CouplingReport r;
  LevelSet xi{0, std::vector<std::uint8_t>(s.width(0), 0)};
  for (std::size_t i = 0; i < s.width(0); ++i) xi.member[i] = grid.carries_zero(s.coord(0, i), rep.snapshots[0]);
  for (std::size_t n = 1; n <= s.levels; ++n) {
    xi = advance(map.field, xi);
    ++r.levels_checked;
    for (std::size_t i = 0; i < xi.member.size(); ++i) {
      if (!xi.member[i]) continue;
      ++r.sites_reached;
      if (!grid.carries_zero(s.coord(n, i), rep.snapshots[n])) ++r.violations;
    }
  }
  return r;
}

}  // namespace bslab
