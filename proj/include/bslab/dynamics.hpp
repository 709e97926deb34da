#pragma once

// The discrete Bak-Sneppen process on a finite graph.
//
// Discrete time: pick a zero uniformly (any vertex if there are none) and
// resample its closed neighbourhood i.i.d. Bernoulli(p).
// Continuous time: every vertex carries a rate-one Poisson clock whose rings
// are marked with proposed bits for the closed neighbourhood; a ring applies
// its marks only if the ringing vertex currently holds a zero.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <limits>
#include <ostream>
#include <queue>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bslab/graph.hpp"
#include "bslab/rng.hpp"

namespace bslab {

class ModelParams {
 public:
  explicit ModelParams(double p) : p_(p), q_(1.0 - p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must lie in (0,1)");
  }
  static ModelParams from_q(double q) {
    ModelParams m(1.0 - q);
    m.q_ = q;  // keep the caller's q exact
    return m;
  }
  double p() const { return p_; }
  double q() const { return q_; }

 private:
  double p_;
  double q_;
};

/// What happens when every fitness is one.
///   restart: the chosen (discrete) or ringing (continuous) vertex resamples
///            its neighbourhood, as in the discrete model's uniform choice;
///   frozen:  nothing happens; all-ones is absorbing.
enum class AllOnesSemantics { restart, frozen };

inline const char* to_string(AllOnesSemantics s) {
  return s == AllOnesSemantics::restart ? "restart" : "frozen";
}

class Configuration {
 public:
  Configuration() = default;
  explicit Configuration(std::size_t n, std::uint8_t fill = 1) : bits_(n, fill) {}
  explicit Configuration(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto b : bits_)
      if (b > 1) throw std::invalid_argument("configuration bits must be 0 or 1");
  }

  static Configuration all_ones(std::size_t n) { return Configuration(n, 1); }
  static Configuration all_zeros(std::size_t n) { return Configuration(n, 0); }

  /// Bit x of `index` is the fitness of vertex x.
  static Configuration from_index(std::uint64_t index, std::size_t n) {
    Configuration c(n, 0);
    for (std::size_t x = 0; x < n; ++x) c.bits_[x] = (index >> x) & 1u;
    return c;
  }

  static Configuration parse(std::string_view text) {
    std::vector<std::uint8_t> bits;
    for (char ch : text) {
      if (ch == '0' || ch == '1') bits.push_back(static_cast<std::uint8_t>(ch - '0'));
      else if (ch == '\n' || ch == '\r') continue;
      else throw std::invalid_argument("configuration text must contain only 0/1");
    }
    return Configuration(std::move(bits));
  }

  std::size_t size() const { return bits_.size(); }
  std::uint8_t operator[](std::size_t x) const { return bits_[x]; }
  std::uint8_t& operator[](std::size_t x) { return bits_[x]; }
  std::span<const std::uint8_t> bits() const { return bits_; }

  std::size_t count_zeros() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 0));
  }
  std::size_t count_ones() const { return size() - count_zeros(); }
  /// Proportion of ones.
  double mean() const { return size() ? double(count_ones()) / double(size()) : 0.0; }

  std::uint64_t index() const {
    if (size() > 64) throw std::length_error("configuration too large to index");
    std::uint64_t i = 0;
    for (std::size_t x = 0; x < size(); ++x) i |= std::uint64_t{bits_[x]} << x;
    return i;
  }

  std::string str() const {
    std::string s(size(), '0');
    for (std::size_t x = 0; x < size(); ++x) s[x] = char('0' + bits_[x]);
    return s;
  }

  friend bool operator==(const Configuration&, const Configuration&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

inline void check_config(const Graph& g, const Configuration& c) {
  if (c.size() != g.num_vertices())
    throw std::invalid_argument("configuration length differs from vertex count");
}

// ---------------------------------------------------------------------------
// Neighbourhood table: closed neighbourhoods cached once per graph, marks are
// bitmasks with bit i addressing the i-th vertex of the sorted closed
// neighbourhood.

using Marks = std::uint32_t;

class NeighbourhoodTable {
 public:
  explicit NeighbourhoodTable(const Graph& g) {
    if (g.max_degree() + 1 > 32) throw std::invalid_argument("degree too large for mark words");
    table_.reserve(g.num_vertices());
    for (Vertex x = 0; x < g.num_vertices(); ++x) table_.push_back(g.closed_neighbourhood(x));
  }
  std::span<const Vertex> operator[](Vertex x) const { return table_[x]; }
  std::size_t size() const { return table_.size(); }

 private:
  std::vector<std::vector<Vertex>> table_;
};

inline Marks draw_marks(Rng& rng, std::size_t count, double p) {
  Marks m = 0;
  for (std::size_t i = 0; i < count; ++i)
    if (rng.bernoulli(p)) m |= Marks{1} << i;
  return m;
}

inline std::string marks_string(Marks m, std::size_t count) {
  std::string s(count, '0');
  for (std::size_t i = 0; i < count; ++i) s[i] = (m >> i) & 1u ? '1' : '0';
  return s;
}

// ---------------------------------------------------------------------------
// Discrete time

/// In-place step; returns the chosen vertex.
inline Vertex step_discrete_inplace(const Graph& g, Configuration& config, const ModelParams& params,
                                    Rng& rng, AllOnesSemantics semantics = AllOnesSemantics::restart) {
  std::vector<Vertex> zeros;
  for (Vertex x = 0; x < config.size(); ++x)
    if (config[x] == 0) zeros.push_back(x);
  Vertex v;
  if (!zeros.empty()) {
    v = zeros[rng.below(zeros.size())];
  } else {
    v = static_cast<Vertex>(rng.below(config.size()));
    if (semantics == AllOnesSemantics::frozen) return v;
  }
  for (Vertex u : g.closed_neighbourhood(v)) config[u] = rng.bernoulli(params.p()) ? 1 : 0;
  return v;
}

inline Configuration step_discrete(const Graph& g, Configuration config, const ModelParams& params,
                                   Rng& rng, AllOnesSemantics semantics = AllOnesSemantics::restart) {
  check_config(g, config);
  step_discrete_inplace(g, config, params, rng, semantics);
  return config;
}

/// Set of vertex ids with O(1) insert/erase/uniform pick.
class IndexedSet {
 public:
  explicit IndexedSet(std::size_t n) : pos_(n, npos) {}
  bool contains(Vertex x) const { return pos_[x] != npos; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  Vertex at(std::size_t i) const { return items_[i]; }
  void insert(Vertex x) {
    if (contains(x)) return;
    pos_[x] = items_.size();
    items_.push_back(x);
  }
  void erase(Vertex x) {
    if (!contains(x)) return;
    const std::size_t i = pos_[x];
    items_[i] = items_.back();
    pos_[items_[i]] = i;
    items_.pop_back();
    pos_[x] = npos;
  }

 private:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::vector<Vertex> items_;
  std::vector<std::size_t> pos_;
};

/// The embedded (jump) chain with an incrementally maintained zero set.
class DiscreteProcess {
 public:
  DiscreteProcess(const Graph& g, const ModelParams& params, Configuration init, Rng rng,
                  AllOnesSemantics semantics = AllOnesSemantics::restart)
      : g_(&g), nbhd_(g), params_(params), state_(std::move(init)), zeros_(g.num_vertices()),
        rng_(rng), semantics_(semantics) {
    check_config(g, state_);
    for (Vertex x = 0; x < state_.size(); ++x)
      if (state_[x] == 0) zeros_.insert(x);
  }

  const Configuration& state() const { return state_; }
  std::size_t zeros() const { return zeros_.size(); }
  std::uint64_t steps() const { return steps_; }

  Vertex step() {
    ++steps_;
    Vertex v;
    if (!zeros_.empty()) {
      v = zeros_.at(rng_.below(zeros_.size()));
    } else {
      v = static_cast<Vertex>(rng_.below(state_.size()));
      if (semantics_ == AllOnesSemantics::frozen) return v;
    }
    for (Vertex u : nbhd_[v]) set(u, rng_.bernoulli(params_.p()) ? 1 : 0);
    return v;
  }

 private:
  void set(Vertex u, std::uint8_t b) {
    state_[u] = b;
    if (b) zeros_.erase(u); else zeros_.insert(u);
  }

  const Graph* g_;
  NeighbourhoodTable nbhd_;
  ModelParams params_;
  Configuration state_;
  IndexedSet zeros_;
  Rng rng_;
  AllOnesSemantics semantics_;
  std::uint64_t steps_ = 0;
};

// ---------------------------------------------------------------------------
// Graphical construction

struct Ring {
  double time;
  Marks marks;
};

struct GraphicalConstruction {
  double horizon = 0.0;
  std::vector<std::vector<Ring>> rings;  // per vertex, strictly increasing times

  std::size_t total_rings() const {
    std::size_t n = 0;
    for (const auto& r : rings) n += r.size();
    return n;
  }
};

struct EventRecord {
  double time;
  Vertex vertex;
  bool applied;
  Marks marks;
};

namespace detail {

inline void check_no_ties(const GraphicalConstruction& gc) {
  std::vector<double> all;
  all.reserve(gc.total_rings());
  for (const auto& r : gc.rings)
    for (const auto& ring : r) all.push_back(ring.time);
  std::sort(all.begin(), all.end());
  if (std::adjacent_find(all.begin(), all.end()) != all.end())
    throw std::runtime_error("graphical construction has tied ring times");
}

}  // namespace detail

/// Vertex x of replica r uses the clock stream (seed, r, x): exponential gap,
/// then its marks, repeated until the horizon is passed.
inline GraphicalConstruction sample_graphical(const Graph& g, const ModelParams& params, double horizon,
                                              std::uint64_t seed, std::uint32_t replica = 0) {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  GraphicalConstruction gc;
  gc.horizon = horizon;
  gc.rings.resize(g.num_vertices());
  for (Vertex x = 0; x < g.num_vertices(); ++x) {
    Rng rng = vertex_stream(seed, replica, x);
    const std::size_t width = g.degree(x) + 1;
    double t = rng.exponential(1.0);
    while (t <= horizon) {
      gc.rings[x].push_back({t, draw_marks(rng, width, params.p())});
      t += rng.exponential(1.0);
    }
  }
  detail::check_no_ties(gc);
  return gc;
}

struct ReplayOptions {
  AllOnesSemantics semantics = AllOnesSemantics::restart;
  bool keep_log = false;
  std::vector<double> snapshot_times;  // ascending; state after all rings <= t
};

struct ReplayResult {
  Configuration final;
  std::vector<EventRecord> log;
  std::vector<Configuration> snapshots;
  std::size_t applied = 0;
  std::size_t muted = 0;
};

/// Deterministic replay of a realization in global time order.
inline ReplayResult replay(const Graph& g, const Configuration& config0, const GraphicalConstruction& gc,
                           const ReplayOptions& opts = {}) {
  check_config(g, config0);
  if (gc.rings.size() != g.num_vertices())
    throw std::invalid_argument("graphical construction belongs to another graph");
  const NeighbourhoodTable nbhd(g);
  ReplayResult out;
  out.final = config0;
  Configuration& state = out.final;
  std::size_t zeros = state.count_zeros();

  using Item = std::pair<double, Vertex>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  std::vector<std::size_t> next(g.num_vertices(), 0);
  for (Vertex x = 0; x < g.num_vertices(); ++x)
    if (!gc.rings[x].empty()) queue.emplace(gc.rings[x][0].time, x);

  std::size_t snap = 0;
  auto take_snapshots_before = [&](double t) {
    while (snap < opts.snapshot_times.size() && opts.snapshot_times[snap] < t) {
      out.snapshots.push_back(state);
      ++snap;
    }
  };

  double last = -1.0;
  while (!queue.empty()) {
    const auto [t, x] = queue.top();
    queue.pop();
    if (t == last) throw std::runtime_error("replay: tied ring times");
    if (t <= last) throw std::runtime_error("replay: ring times not increasing");
    last = t;
    take_snapshots_before(t);
    const Ring& ring = gc.rings[x][next[x]];
    if (++next[x] < gc.rings[x].size()) queue.emplace(gc.rings[x][next[x]].time, x);

    const bool applies = state[x] == 0 || (zeros == 0 && opts.semantics == AllOnesSemantics::restart);
    if (applies) {
      const auto hood = nbhd[x];
      for (std::size_t i = 0; i < hood.size(); ++i) {
        const std::uint8_t b = (ring.marks >> i) & 1u;
        if (state[hood[i]] != b) {
          zeros += b ? std::size_t(-1) : 1;
          state[hood[i]] = b;
        }
      }
      ++out.applied;
    } else {
      ++out.muted;
    }
    if (opts.keep_log) out.log.push_back({t, x, applies, ring.marks});
  }
  while (snap < opts.snapshot_times.size()) {
    out.snapshots.push_back(state);
    ++snap;
  }
  return out;
}

/// CSV columns time,vertex,applied,marks (marks over the sorted closed neighbourhood).
inline void write_event_log(std::ostream& out, const Graph& g, std::span<const EventRecord> log);

// ---------------------------------------------------------------------------
// Continuous time without materializing the realization. Each vertex draws
// from its own clock stream in the same order as sample_graphical, so for a
// common (seed, replica) the trajectory equals replay(sample_graphical(...)).

struct EventStats {
  std::uint64_t sampled = 0;
  std::uint64_t applied = 0;
  std::uint64_t muted = 0;
};

class ContinuousProcess {
 public:
  ContinuousProcess(const Graph& g, const ModelParams& params, Configuration init, std::uint64_t seed,
                    std::uint32_t replica = 0, AllOnesSemantics semantics = AllOnesSemantics::restart)
      : nbhd_(g), params_(params), state_(std::move(init)), semantics_(semantics) {
    check_config(g, state_);
    zeros_ = state_.count_zeros();
    clocks_.reserve(g.num_vertices());
    for (Vertex x = 0; x < g.num_vertices(); ++x) {
      clocks_.push_back(vertex_stream(seed, replica, x));
      queue_.emplace(clocks_[x].exponential(1.0), x);
    }
  }

  double time() const { return time_; }
  double next_time() const { return queue_.top().first; }
  const Configuration& state() const { return state_; }
  std::size_t zeros() const { return zeros_; }
  const EventStats& stats() const { return stats_; }

  /// Processes the next ring and returns it.
  EventRecord step() {
    const auto [t, x] = queue_.top();
    queue_.pop();
    if (t == time_ && stats_.sampled > 0) throw std::runtime_error("continuous process: tied ring times");
    time_ = t;
    Rng& rng = clocks_[x];
    const auto hood = nbhd_[x];
    const Marks marks = draw_marks(rng, hood.size(), params_.p());
    queue_.emplace(t + rng.exponential(1.0), x);
    ++stats_.sampled;
    const bool applies = state_[x] == 0 || (zeros_ == 0 && semantics_ == AllOnesSemantics::restart);
    if (applies) {
      for (std::size_t i = 0; i < hood.size(); ++i) {
        const std::uint8_t b = (marks >> i) & 1u;
        if (state_[hood[i]] != b) {
          zeros_ += b ? std::size_t(-1) : 1;
          state_[hood[i]] = b;
        }
      }
      ++stats_.applied;
    } else {
      ++stats_.muted;
    }
    return {t, x, applies, marks};
  }

  /// Runs all rings with time <= t_end; `on_event(record, previous_time)` is
  /// called after each ring. The clock is left at t_end.
  template <class OnEvent>
  void run_until(double t_end, OnEvent&& on_event) {
    while (next_time() <= t_end) {
      const double before = time_;
      const EventRecord e = step();
      on_event(e, before);
    }
    time_ = std::max(time_, t_end);
  }

  void run_until(double t_end) {
    run_until(t_end, [](const EventRecord&, double) {});
  }

 private:
  NeighbourhoodTable nbhd_;
  ModelParams params_;
  Configuration state_;
  AllOnesSemantics semantics_;
  std::size_t zeros_ = 0;
  double time_ = 0.0;
  std::vector<Rng> clocks_;
  using Item = std::pair<double, Vertex>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue_;
  EventStats stats_;
};

struct ContinuousRun {
  Configuration final;
  EventStats stats;
};

inline ContinuousRun simulate_continuous(const Graph& g, const Configuration& config0, const ModelParams& params,
                                         double horizon, std::uint64_t seed, std::uint32_t replica = 0,
                                         AllOnesSemantics semantics = AllOnesSemantics::restart) {
  if (horizon < 0.0) throw std::invalid_argument("horizon must be nonnegative");
  ContinuousProcess proc(g, params, config0, seed, replica, semantics);
  proc.run_until(horizon);
  return {proc.state(), proc.stats()};
}

inline void write_event_log(std::ostream& out, const Graph& g, std::span<const EventRecord> log) {
  out << "time,vertex,applied,marks\n";
  char buf[64];
  for (const auto& e : log) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, e.time);
    out << std::string_view(buf, end - buf) << ',' << e.vertex << ',' << (e.applied ? 1 : 0) << ','
        << marks_string(e.marks, g.degree(e.vertex) + 1) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Classical model: continuous fitness, the global minimum is replaced along
// with its neighbours.

class FitnessVector {
 public:
  FitnessVector() = default;
  explicit FitnessVector(std::vector<double> values) : values_(std::move(values)) {
    for (double v : values_)
      if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("fitness values must lie in [0,1]");
    auto sorted = values_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw std::invalid_argument("fitness values must be distinct");
  }

  static FitnessVector uniform(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    std::set<double> seen;
    for (auto& x : v) {
      do x = rng.uniform(); while (!seen.insert(x).second);
    }
    return FitnessVector(std::move(v));
  }

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }
  Vertex argmin() const {
    return static_cast<Vertex>(std::min_element(values_.begin(), values_.end()) - values_.begin());
  }

 private:
  friend class ClassicalProcess;
  friend FitnessVector classical_step(const Graph&, FitnessVector, Rng&);
  std::vector<double> values_;
};

inline FitnessVector classical_step(const Graph& g, FitnessVector fitness, Rng& rng) {
  if (fitness.size() != g.num_vertices()) throw std::invalid_argument("fitness length differs from vertex count");
  const Vertex j = fitness.argmin();
  for (Vertex u : g.closed_neighbourhood(j)) {
    double v;
    bool clash;
    do {
      v = rng.uniform();
      clash = std::find(fitness.values_.begin(), fitness.values_.end(), v) != fitness.values_.end();
    } while (clash);
    fitness.values_[u] = v;
  }
  return fitness;
}

/// Long-run classical dynamics with an ordered index for O(log n) steps.
class ClassicalProcess {
 public:
  ClassicalProcess(const Graph& g, FitnessVector init, Rng rng)
      : nbhd_(g), fitness_(std::move(init)), rng_(rng) {
    if (fitness_.size() != g.num_vertices()) throw std::invalid_argument("fitness length differs from vertex count");
    for (Vertex x = 0; x < fitness_.size(); ++x) order_.emplace(fitness_.values_[x], x);
  }

  const FitnessVector& fitness() const { return fitness_; }
  double min_fitness() const { return order_.begin()->first; }
  std::uint64_t steps() const { return steps_; }

  Vertex step() {
    const Vertex j = order_.begin()->second;
    for (Vertex u : nbhd_[j]) order_.erase({fitness_.values_[u], u});
    for (Vertex u : nbhd_[j]) {
      double v;
      do v = rng_.uniform(); while (taken(v));
      fitness_.values_[u] = v;
      order_.emplace(v, u);
    }
    ++steps_;
    return j;
  }

 private:
  bool taken(double v) const {
    auto it = order_.lower_bound({v, 0});
    return it != order_.end() && it->first == v;
  }

  NeighbourhoodTable nbhd_;
  FitnessVector fitness_;
  std::set<std::pair<double, Vertex>> order_;
  Rng rng_;
  std::uint64_t steps_ = 0;
};

}  // namespace bslab
