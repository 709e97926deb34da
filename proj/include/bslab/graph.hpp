#pragma once

// Finite simple connected graphs, standard families, and chains: self-avoiding
// paths whose vertices at index distance >= 3 have disjoint closed
// neighbourhoods. Chain length is counted in vertices throughout.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bslab/error.hpp"
#include "bslab/rng.hpp"

namespace bslab {

using Vertex = std::uint32_t;
using Edge = std::pair<Vertex, Vertex>;

class Graph {
 public:
  Graph() = default;

  /// Validates: ids in range, no loops, no repeated edges, connected.
  Graph(std::size_t num_vertices, std::span<const Edge> edges, std::string label = {})
      : adjacency_(num_vertices), label_(std::move(label)) {
    if (num_vertices == 0) throw std::invalid_argument("graph must have at least one vertex");
    if (num_vertices > std::numeric_limits<Vertex>::max())
      throw std::invalid_argument("too many vertices");
    for (const auto& [u, v] : edges) {
      if (u >= num_vertices || v >= num_vertices)
        throw std::invalid_argument("edge (" + std::to_string(u) + "," + std::to_string(v) +
                                    ") has an out-of-range vertex id");
      if (u == v) throw std::invalid_argument("self-loop at vertex " + std::to_string(u));
      adjacency_[u].push_back(v);
      adjacency_[v].push_back(u);
    }
    for (std::size_t x = 0; x < num_vertices; ++x) {
      auto& adj = adjacency_[x];
      std::sort(adj.begin(), adj.end());
      if (std::adjacent_find(adj.begin(), adj.end()) != adj.end())
        throw std::invalid_argument("repeated edge at vertex " + std::to_string(x));
      max_degree_ = std::max(max_degree_, adj.size());
      num_edges_ += adj.size();
    }
    num_edges_ /= 2;
    if (!connected()) throw std::invalid_argument("graph is disconnected");
  }

  std::size_t num_vertices() const { return adjacency_.size(); }
  std::size_t num_edges() const { return num_edges_; }
  std::size_t max_degree() const { return max_degree_; }
  std::size_t degree(Vertex x) const { return adjacency_.at(x).size(); }
  const std::string& label() const { return label_; }
  void set_label(std::string label) { label_ = std::move(label); }

  std::span<const Vertex> neighbours(Vertex x) const { return adjacency_.at(x); }

  bool adjacent(Vertex x, Vertex y) const {
    const auto& adj = adjacency_.at(x);
    return std::binary_search(adj.begin(), adj.end(), y);
  }

  bool is_regular() const {
    return std::all_of(adjacency_.begin(), adjacency_.end(),
                       [&](const auto& adj) { return adj.size() == max_degree_; });
  }

  /// {x} together with its neighbours, sorted by id.
  std::vector<Vertex> closed_neighbourhood(Vertex x) const {
    const auto& adj = adjacency_.at(x);
    std::vector<Vertex> out;
    out.reserve(adj.size() + 1);
    auto it = std::lower_bound(adj.begin(), adj.end(), x);
    out.insert(out.end(), adj.begin(), it);
    out.push_back(x);
    out.insert(out.end(), it, adj.end());
    return out;
  }

  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(num_edges_);
    for (Vertex x = 0; x < num_vertices(); ++x)
      for (Vertex y : adjacency_[x])
        if (x < y) out.emplace_back(x, y);
    return out;
  }

 private:
  bool connected() const {
    std::vector<char> seen(num_vertices(), 0);
    std::vector<Vertex> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      const Vertex x = stack.back();
      stack.pop_back();
      for (Vertex y : adjacency_[x])
        if (!seen[y]) {
          seen[y] = 1;
          ++count;
          stack.push_back(y);
        }
    }
    return count == num_vertices();
  }

  std::vector<std::vector<Vertex>> adjacency_;
  std::size_t max_degree_ = 0;
  std::size_t num_edges_ = 0;
  std::string label_;
};

inline Graph build_graph(std::size_t num_vertices, std::span<const Edge> edges) {
  return Graph(num_vertices, edges);
}

inline std::vector<Vertex> closed_neighbourhood(const Graph& g, Vertex x) {
  if (x >= g.num_vertices()) throw std::out_of_range("vertex id out of range");
  return g.closed_neighbourhood(x);
}

// ---------------------------------------------------------------------------
// Families

inline Graph cycle_graph(std::size_t n) {
  if (n < 3) throw std::invalid_argument("cycle needs N >= 3");
  std::vector<Edge> e;
  for (std::size_t i = 0; i < n; ++i)
    e.emplace_back(static_cast<Vertex>(i), static_cast<Vertex>((i + 1) % n));
  return Graph(n, e, "cycle:" + std::to_string(n));
}

inline Graph path_graph(std::size_t n) {
  if (n < 3) throw std::invalid_argument("path needs N >= 3");
  std::vector<Edge> e;
  for (std::size_t i = 0; i + 1 < n; ++i)
    e.emplace_back(static_cast<Vertex>(i), static_cast<Vertex>(i + 1));
  return Graph(n, e, "path:" + std::to_string(n));
}

/// Vertex (r, c) has id r * cols + c.
inline Graph torus2d_graph(std::size_t rows, std::size_t cols) {
  if (rows < 3 || cols < 3) throw std::invalid_argument("torus2d needs both sides >= 3");
  std::vector<Edge> e;
  auto id = [cols](std::size_t r, std::size_t c) { return static_cast<Vertex>(r * cols + c); };
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      e.emplace_back(id(r, c), id(r, (c + 1) % cols));
      e.emplace_back(id(r, c), id((r + 1) % rows, c));
    }
  return Graph(rows * cols, e,
               "torus2d:" + std::to_string(rows) + "x" + std::to_string(cols));
}

inline Graph complete_graph(std::size_t n) {
  if (n < 2) throw std::invalid_argument("complete graph needs N >= 2");
  std::vector<Edge> e;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      e.emplace_back(static_cast<Vertex>(i), static_cast<Vertex>(j));
  return Graph(n, e, "complete:" + std::to_string(n));
}

/// Pairing model; pairings with loops, repeated edges or more than one
/// component are rejected and redrawn.
inline Graph random_regular_graph(std::size_t n, std::size_t d, std::uint64_t seed,
                                  std::size_t max_attempts = 100000) {
  if (d == 0 || d >= n || (n * d) % 2 != 0)
    throw std::invalid_argument("random_regular needs 0 < d < N and d*N even");
  Rng rng = aux_stream(seed, 0, stream_tag::graph);
  std::vector<Vertex> points(n * d);
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    for (std::size_t i = 0; i < points.size(); ++i) points[i] = static_cast<Vertex>(i / d);
    for (std::size_t i = points.size() - 1; i > 0; --i)
      std::swap(points[i], points[rng.below(i + 1)]);
    std::vector<Edge> e;
    bool simple = true;
    for (std::size_t i = 0; i < points.size(); i += 2) {
      Vertex u = points[i], v = points[i + 1];
      if (u == v) {
        simple = false;
        break;
      }
      e.emplace_back(std::min(u, v), std::max(u, v));
    }
    if (!simple) continue;
    std::sort(e.begin(), e.end());
    if (std::adjacent_find(e.begin(), e.end()) != e.end()) continue;
    try {
      return Graph(n, e, "regular:" + std::to_string(n) + ":" + std::to_string(d));
    } catch (const std::invalid_argument&) {
      // disconnected; redraw
    }
  }
  throw std::runtime_error("random_regular: no simple connected pairing found");
}

enum class Family { cycle, path, torus2d, complete, random_regular };

/// params: cycle/path/complete {N}; torus2d {rows, cols}; random_regular {N, d}.
inline Graph generate(Family family, std::span<const std::size_t> params,
                      std::optional<std::uint64_t> seed = std::nullopt) {
  auto need = [&](std::size_t k) {
    if (params.size() != k) throw std::invalid_argument("wrong number of family parameters");
  };
  switch (family) {
    case Family::cycle: need(1); return cycle_graph(params[0]);
    case Family::path: need(1); return path_graph(params[0]);
    case Family::complete: need(1); return complete_graph(params[0]);
    case Family::torus2d: need(2); return torus2d_graph(params[0], params[1]);
    case Family::random_regular: need(2); return random_regular_graph(params[0], params[1], seed.value_or(1));
  }
  throw std::invalid_argument("unknown family");
}

// ---------------------------------------------------------------------------
// Edge-list text format: "N M", then M lines "u v". Lines starting with '#'
// are comments.

inline Graph read_edge_list(std::istream& in) {
  std::string line;
  auto next_data_line = [&]() -> bool {
    while (std::getline(in, line)) {
      auto pos = line.find_first_not_of(" \t\r");
      if (pos == std::string::npos || line[pos] == '#') continue;
      return true;
    }
    return false;
  };
  if (!next_data_line()) throw std::invalid_argument("edge list: missing header");
  std::istringstream header(line);
  long long n = -1, m = -1;
  if (!(header >> n >> m) || n <= 0 || m < 0)
    throw std::invalid_argument("edge list: malformed header");
  std::vector<Edge> edges;
  for (long long i = 0; i < m; ++i) {
    if (!next_data_line()) throw std::invalid_argument("edge list: fewer edges than declared");
    std::istringstream row(line);
    long long u = -1, v = -1;
    if (!(row >> u >> v) || u < 0 || v < 0)
      throw std::invalid_argument("edge list: malformed edge line");
    edges.emplace_back(static_cast<Vertex>(u), static_cast<Vertex>(v));
  }
  return Graph(static_cast<std::size_t>(n), edges);
}

inline void write_edge_list(std::ostream& out, const Graph& g) {
  out << g.num_vertices() << ' ' << g.num_edges() << '\n';
  for (const auto& [u, v] : g.edges()) out << u << ' ' << v << '\n';
}

/// Grammar: cycle:N, path:N, torus2d:AxB, complete:N, regular:N:d, file:PATH.
inline Graph parse_graph_spec(const std::string& spec, std::uint64_t seed = 1) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("graph spec needs family:params");
  const std::string family = spec.substr(0, colon);
  const std::string rest = spec.substr(colon + 1);
  auto to_count = [&](const std::string& s) -> std::size_t {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("graph spec: bad count '" + s + "'");
    }
    if (used != s.size()) throw std::invalid_argument("graph spec: bad count '" + s + "'");
    return static_cast<std::size_t>(v);
  };
  if (family == "cycle") return cycle_graph(to_count(rest));
  if (family == "path") return path_graph(to_count(rest));
  if (family == "complete") return complete_graph(to_count(rest));
  if (family == "torus2d") {
    const auto x = rest.find('x');
    if (x == std::string::npos) throw std::invalid_argument("torus2d spec is torus2d:AxB");
    return torus2d_graph(to_count(rest.substr(0, x)), to_count(rest.substr(x + 1)));
  }
  if (family == "regular") {
    const auto c = rest.find(':');
    if (c == std::string::npos) throw std::invalid_argument("regular spec is regular:N:d");
    return random_regular_graph(to_count(rest.substr(0, c)), to_count(rest.substr(c + 1)), seed);
  }
  if (family == "file") {
    std::ifstream in(rest);
    if (!in) throw std::invalid_argument("cannot open edge list '" + rest + "'");
    Graph g = read_edge_list(in);
    g.set_label(spec);
    return g;
  }
  throw std::invalid_argument("unknown graph family '" + family + "'");
}

// ---------------------------------------------------------------------------
// Distances

inline std::vector<std::size_t> bfs_distances(const Graph& g, Vertex source) {
  constexpr auto inf = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> dist(g.num_vertices(), inf);
  std::queue<Vertex> queue;
  dist.at(source) = 0;
  queue.push(source);
  while (!queue.empty()) {
    const Vertex x = queue.front();
    queue.pop();
    for (Vertex y : g.neighbours(x))
      if (dist[y] == inf) {
        dist[y] = dist[x] + 1;
        queue.push(y);
      }
  }
  return dist;
}

/// Lexicographically smallest among the shortest paths from source to target.
inline std::vector<Vertex> shortest_path(const Graph& g, Vertex source, Vertex target) {
  const auto dist = bfs_distances(g, target);
  std::vector<Vertex> path{source};
  Vertex x = source;
  while (x != target) {
    for (Vertex y : g.neighbours(x))
      if (dist[y] + 1 == dist[x]) {
        x = y;
        break;
      }
    path.push_back(x);
  }
  return path;
}

// ---------------------------------------------------------------------------
// Chains

enum class ChainDefect { none, empty, out_of_range, not_adjacent, repeated_vertex, neighbourhoods_meet };

struct ChainCheck {
  ChainDefect defect = ChainDefect::none;
  std::size_t first = 0;   // offending index pair, when relevant
  std::size_t second = 0;
  bool ok() const { return defect == ChainDefect::none; }
  explicit operator bool() const { return ok(); }
};

inline const char* to_string(ChainDefect d) {
  switch (d) {
    case ChainDefect::none: return "none";
    case ChainDefect::empty: return "empty";
    case ChainDefect::out_of_range: return "out_of_range";
    case ChainDefect::not_adjacent: return "not_adjacent";
    case ChainDefect::repeated_vertex: return "repeated_vertex";
    case ChainDefect::neighbourhoods_meet: return "neighbourhoods_meet";
  }
  return "?";
}

/// Closed neighbourhoods of x and y meet iff dist(x, y) <= 2.
inline bool neighbourhoods_meet(const Graph& g, Vertex x, Vertex y) {
  if (x == y || g.adjacent(x, y)) return true;
  const auto a = g.neighbours(x);
  const auto b = g.neighbours(y);
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i == *j) return true;
    if (*i < *j) ++i; else ++j;
  }
  return false;
}

inline ChainCheck check_chain(const Graph& g, std::span<const Vertex> vertices) {
  if (vertices.empty()) return {ChainDefect::empty};
  const std::size_t n = vertices.size();
  for (std::size_t i = 0; i < n; ++i)
    if (vertices[i] >= g.num_vertices()) return {ChainDefect::out_of_range, i, i};
  for (std::size_t i = 0; i + 1 < n; ++i)
    if (!g.adjacent(vertices[i], vertices[i + 1])) return {ChainDefect::not_adjacent, i, i + 1};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (vertices[i] == vertices[j]) return {ChainDefect::repeated_vertex, i, j};
      if (j - i >= 3 && neighbourhoods_meet(g, vertices[i], vertices[j]))
        return {ChainDefect::neighbourhoods_meet, i, j};
    }
  return {};
}

inline bool is_chain(const Graph& g, std::span<const Vertex> vertices) {
  return check_chain(g, vertices).ok();
}

/// A vertex sequence known to satisfy the chain property on its graph.
class ChainPath {
 public:
  ChainPath() = default;

  static ChainPath make(const Graph& g, std::vector<Vertex> vertices) {
    const auto check = check_chain(g, vertices);
    if (!check) throw std::invalid_argument(std::string("not a chain: ") + to_string(check.defect));
    return ChainPath(std::move(vertices));
  }

  const std::vector<Vertex>& vertices() const { return vertices_; }
  std::size_t length() const { return vertices_.size(); }
  Vertex operator[](std::size_t i) const { return vertices_[i]; }
  bool contains(Vertex x) const {
    return std::find(vertices_.begin(), vertices_.end(), x) != vertices_.end();
  }
  friend bool operator==(const ChainPath&, const ChainPath&) = default;

 private:
  explicit ChainPath(std::vector<Vertex> v) : vertices_(std::move(v)) {}
  std::vector<Vertex> vertices_;
};

namespace detail {

// Incremental depth-first chain builder. `blocked_[u]` counts how many path
// vertices at index <= len-3 have u in their closed neighbourhood; a vertex v
// may be appended iff it is not on the path and nothing in its closed
// neighbourhood is blocked.
class ChainBuilder {
 public:
  explicit ChainBuilder(const Graph& g)
      : g_(g), in_path_(g.num_vertices(), 0), blocked_(g.num_vertices(), 0) {}

  const std::vector<Vertex>& path() const { return path_; }

  bool can_append(Vertex v) const {
    if (in_path_[v]) return false;
    if (!path_.empty() && !g_.adjacent(path_.back(), v)) return false;
    if (blocked_[v]) return false;
    for (Vertex u : g_.neighbours(v))
      if (blocked_[u]) return false;
    return true;
  }

  void push(Vertex v) {
    path_.push_back(v);
    in_path_[v] = 1;
    if (path_.size() >= 3) mark(path_[path_.size() - 3], +1);
  }

  void pop() {
    if (path_.size() >= 3) mark(path_[path_.size() - 3], -1);
    in_path_[path_.back()] = 0;
    path_.pop_back();
  }

  /// Vertices that could still join the path beyond its current end.
  std::size_t reachable_free(std::optional<Vertex> must_reach, bool* reached) {
    const std::size_t n = g_.num_vertices();
    seen_.assign(n, 0);
    std::vector<Vertex> stack;
    std::size_t count = 0;
    if (reached) *reached = false;
    auto free = [&](Vertex u) {
      if (in_path_[u] || blocked_[u]) return false;
      for (Vertex w : g_.neighbours(u))
        if (blocked_[w]) return false;
      return true;
    };
    const Vertex start = path_.back();
    seen_[start] = 1;
    stack.push_back(start);
    while (!stack.empty()) {
      const Vertex x = stack.back();
      stack.pop_back();
      for (Vertex y : g_.neighbours(x))
        if (!seen_[y]) {
          seen_[y] = 1;
          if (!free(y)) continue;
          ++count;
          if (reached && must_reach && y == *must_reach) *reached = true;
          stack.push_back(y);
        }
    }
    return count;
  }

 private:
  void mark(Vertex x, int delta) {
    blocked_[x] += delta;
    for (Vertex u : g_.neighbours(x)) blocked_[u] += delta;
  }

  const Graph& g_;
  std::vector<Vertex> path_;
  std::vector<char> in_path_;
  std::vector<int> blocked_;
  std::vector<char> seen_;
};

}  // namespace detail

enum class ChainSearchMode { exact, heuristic };

struct LongestChainResult {
  ChainPath chain;
  std::size_t lower_bound = 0;   // certified: chain.length()
  bool exact = false;            // chain is a maximum (through the anchor, if any)
  std::uint64_t extensions = 0;  // search work spent
};

inline constexpr std::uint64_t kDefaultChainBudget = 10'000'000;

namespace detail {

inline LongestChainResult longest_chain_exact(const Graph& g, std::optional<Vertex> anchor,
                                              std::uint64_t budget) {
  ChainBuilder b(g);
  std::vector<Vertex> best;
  std::uint64_t work = 0;
  const bool anchored = anchor.has_value();

  std::function<void()> dfs = [&]() {
    const auto& path = b.path();
    const bool has_anchor = !anchored ||
        std::find(path.begin(), path.end(), *anchor) != path.end();
    if (has_anchor && path.size() > best.size()) best = path;
    bool reached = false;
    const std::size_t room = b.reachable_free(anchor, &reached);
    if (path.size() + room <= best.size()) return;
    if (!has_anchor && !reached) return;
    for (Vertex v : g.neighbours(path.back())) {
      if (!b.can_append(v)) continue;
      if (++work > budget) throw BudgetExceeded("longest_chain: exact search budget exceeded");
      b.push(v);
      dfs();
      b.pop();
    }
  };

  for (Vertex s = 0; s < g.num_vertices(); ++s) {
    if (best.size() == g.num_vertices()) break;
    ++work;
    b.push(s);
    dfs();
    b.pop();
  }
  LongestChainResult r;
  r.chain = ChainPath::make(g, best);
  r.lower_bound = best.size();
  r.exact = true;
  r.extensions = work;
  return r;
}

// Greedily append (then prepend) the smallest admissible neighbour.
inline std::vector<Vertex> extend_greedily(const Graph& g, std::vector<Vertex> path) {
  for (int side = 0; side < 2; ++side) {
    bool grown = true;
    while (grown) {
      grown = false;
      for (Vertex v : g.neighbours(path.back())) {
        path.push_back(v);
        if (is_chain(g, path)) {
          grown = true;
          break;
        }
        path.pop_back();
      }
    }
    std::reverse(path.begin(), path.end());
  }
  return path;
}

inline LongestChainResult longest_chain_heuristic(const Graph& g, std::optional<Vertex> anchor) {
  std::vector<Vertex> best;
  std::uint64_t work = 0;
  auto consider = [&](Vertex s) {
    const auto dist = bfs_distances(g, s);
    Vertex far = s;
    for (Vertex t = 0; t < g.num_vertices(); ++t)
      if (dist[t] > dist[far]) far = t;
    auto path = shortest_path(g, s, far);
    path = extend_greedily(g, std::move(path));
    work += g.num_vertices();
    if (anchor && std::find(path.begin(), path.end(), *anchor) == path.end()) return;
    if (path.size() > best.size() || (path.size() == best.size() && path < best)) best = path;
  };
  if (anchor) {
    consider(*anchor);
  } else {
    for (Vertex s = 0; s < g.num_vertices(); ++s) consider(s);
  }
  if (best.empty()) best = {anchor.value_or(0)};
  LongestChainResult r;
  r.chain = ChainPath::make(g, best);
  r.lower_bound = best.size();
  r.exact = false;
  r.extensions = work;
  return r;
}

}  // namespace detail

/// Longest chain, optionally constrained to contain `anchor` (giving l_x(G)).
/// Exact mode is depth-first branch-and-bound and throws BudgetExceeded past
/// `budget` extensions; ties go to the lexicographically smallest sequence.
inline LongestChainResult longest_chain(const Graph& g, ChainSearchMode mode,
                                        std::optional<Vertex> anchor = std::nullopt,
                                        std::uint64_t budget = kDefaultChainBudget) {
  if (anchor && *anchor >= g.num_vertices()) throw std::out_of_range("anchor out of range");
  if (mode == ChainSearchMode::exact) return detail::longest_chain_exact(g, anchor, budget);
  return detail::longest_chain_heuristic(g, anchor);
}

struct ChainCover {
  std::vector<ChainPath> chains;
  std::vector<Vertex> uncovered;  // empty iff the cover is complete
  bool complete() const { return uncovered.empty(); }
  std::size_t size() const { return chains.size(); }
};

/// Greedy cover by chains of exactly `min_len` vertices. Each round takes the
/// smallest uncovered vertex u and picks, among chains through u, the one
/// covering the most uncovered vertices (chains starting at u are tried
/// first). Vertices on no chain of that length are reported as uncovered.
inline ChainCover chain_cover(const Graph& g, std::size_t min_len,
                              std::uint64_t budget = kDefaultChainBudget) {
  if (min_len == 0) throw std::invalid_argument("chain_cover: min_len must be >= 1");
  const std::size_t n = g.num_vertices();
  std::vector<char> covered(n, 0);
  std::vector<char> hopeless(n, 0);
  ChainCover out;
  std::uint64_t work = 0;

  auto search = [&](Vertex u, bool start_at_u) -> std::vector<Vertex> {
    detail::ChainBuilder b(g);
    std::vector<Vertex> best;
    std::size_t best_gain = 0;
    std::function<void()> dfs = [&]() {
      const auto& path = b.path();
      if (path.size() == min_len) {
        if (std::find(path.begin(), path.end(), u) == path.end()) return;
        std::size_t gain = 0;
        for (Vertex v : path) gain += !covered[v];
        if (gain > best_gain) {
          best_gain = gain;
          best = path;
        }
        return;
      }
      for (Vertex v : g.neighbours(path.back())) {
        if (!b.can_append(v)) continue;
        if (++work > budget) throw BudgetExceeded("chain_cover: search budget exceeded");
        b.push(v);
        dfs();
        b.pop();
        if (best_gain == min_len) return;
      }
    };
    for (Vertex s = start_at_u ? u : 0; s < n; ++s) {
      b.push(s);
      dfs();
      b.pop();
      if (start_at_u || best_gain == min_len) break;
    }
    return best;
  };

  for (Vertex u = 0; u < n; ++u) {
    if (covered[u] || hopeless[u]) continue;
    std::vector<Vertex> chain;
    try {
      chain = search(u, true);
      if (chain.empty() && min_len > 1) chain = search(u, false);
    } catch (const BudgetExceeded&) {
      chain.clear();
    }
    if (chain.empty()) {
      hopeless[u] = 1;
      out.uncovered.push_back(u);
      continue;
    }
    for (Vertex v : chain) covered[v] = 1;
    out.chains.push_back(ChainPath::make(g, std::move(chain)));
  }
  return out;
}

}  // namespace bslab
