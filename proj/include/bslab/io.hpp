#pragma once

// JSON serialization of reports, seed resolution and run manifests.
// Non-finite numbers dump as null.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "bslab/blocks.hpp"
#include "bslab/bounds.hpp"
#include "bslab/drift.hpp"
#include "bslab/exact.hpp"
#include "bslab/montecarlo.hpp"
#include "bslab/percolation.hpp"
#include "bslab/stats.hpp"

namespace bslab {

inline constexpr const char* kVersion = "1.0.0";

using json = nlohmann::ordered_json;

inline void to_json(json& j, const Estimate& e) {
  j = json{{"mean", e.mean},       {"stderr", e.se},         {"ci_lo", e.ci_lo},
           {"ci_hi", e.ci_hi},     {"n_batches", e.n_batches}, {"burn_in", e.burn_in},
           {"total_budget", e.total_budget}};
}

inline void to_json(json& j, const TailFit& f) {
  j = json{{"c1", f.c1},       {"c2", f.c2},       {"c2_stderr", f.c2_se}, {"c2_ci_lo", f.c2_ci_lo},
           {"c2_ci_hi", f.c2_ci_hi}, {"k_min", f.k_min}, {"k_max", f.k_max}, {"rms_residual", f.rms_residual}};
}

inline void to_json(json& j, const ZerosTail& z) {
  j = json{{"tail", z.tail}};
  j["fit"] = z.fit ? json(*z.fit) : json(nullptr);
  if (!z.fit_note.empty()) j["fit_note"] = z.fit_note;
}

inline void to_json(json& j, const Lemma21Report& r) {
  j = json{{"c", r.c}, {"epsilon", r.epsilon}, {"bound", r.bound}, {"pi_A", r.pi_A}, {"holds", r.holds},
           {"vacuous", r.vacuous}};
}

inline void to_json(json& j, const BoundReport& r) {
  json inputs = json::object();
  for (const auto& [k, v] : r.inputs) inputs[k] = v;
  j = json{{"formula", r.formula}, {"inputs", inputs}, {"value", r.value}, {"flags", r.flags}};
}

inline void to_json(json& j, const MarginSummary& m) {
  j = json{{"checks", m.checks}, {"violations", m.violations}, {"min_margin", m.min_margin},
           {"worst_state", m.worst_state}};
}

inline void to_json(json& j, const ScanReport& r) {
  j = json{{"graph", r.graph},
           {"q", r.q},
           {"h", r.h},
           {"d", r.d},
           {"constant_degree", r.constant_degree},
           {"configurations", r.configurations},
           {"bounds_hold", r.bounds_hold()},
           {"max_drift", r.max_drift},
           {"epsilon", r.epsilon()},
           {"max_abs_increment", r.max_abs_increment},
           {"increment_bound", r.increment_bound},
           {"linearity_error", r.linearity_error},
           {"checks",
            {{"n_drift", r.n_drift},
             {"simple", r.simple},
             {"type2_after_type1", r.type2_after_type1},
             {"type2_after_type2", r.type2_after_type2},
             {"progeny_total", r.progeny_total},
             {"progeny_type2", r.progeny_type2},
             {"transitions", r.transitions},
             {"pathwise", r.pathwise},
             {"type1", r.type1},
             {"type2", r.type2},
             {"type2_m1", r.type2_m1},
             {"combined", r.combined}}}};
  if (!r.warning.empty()) j["warning"] = r.warning;
}

inline void to_json(json& j, const PercolationEstimate& e) {
  j = json{{"estimate", e.estimate}, {"n_samples", e.n_samples}};
  if (!e.note.empty()) j["note"] = e.note;
}

inline void to_json(json& j, const ContourReport& r) {
  j = json{{"short_sum", r.short_sum},   {"long_term", r.long_term},
           {"exponent_rate", r.exponent_rate}, {"summable", r.summable},
           {"side_condition_ok", r.side_condition_ok}};
  j["n0"] = r.n0 ? json(*r.n0) : json(nullptr);
}

inline void to_json(json& j, const BlockRate& r) {
  j = json{{"flavor", to_string(r.flavor)}, {"p", r.p}, {"d", r.d}, {"L", r.L}, {"blocks_sampled", r.blocks_sampled},
           {"nice", r.nice}, {"rate", r.rate}, {"analytic_lb", r.analytic_lb}};
}

inline void to_json(json& j, const CorrelationReport& r) {
  j = json{{"correlation", r.correlation}, {"stderr", r.se}, {"n", r.n}, {"rate_a", r.rate_a},
           {"rate_b", r.rate_b}, {"independent", r.independent()}};
}

inline void to_json(json& j, const CouplingReport& r) {
  j = json{{"levels_checked", r.levels_checked}, {"sites_reached", r.sites_reached}, {"violations", r.violations}};
}

// ---------------------------------------------------------------------------
// Seeds

inline std::uint64_t parse_seed(const std::string& s) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (!s.empty() && s[0] == '-') throw std::invalid_argument("negative");
    v = std::stoull(s, &used, 0);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad seed '" + s + "'");
  }
  if (used != s.size()) throw std::invalid_argument("bad seed '" + s + "'");
  return v;
}

/// Explicit seed, else BSLAB_SEED. There is no clock-based default.
inline std::uint64_t resolve_seed(std::optional<std::uint64_t> given, const char* env_name = "BSLAB_SEED") {
  if (given) return *given;
  if (const char* env = std::getenv(env_name); env && *env) return parse_seed(env);
  throw std::invalid_argument(std::string("a seed is required: pass --seed or set ") + env_name);
}

// ---------------------------------------------------------------------------
// Run manifest

inline std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

class Manifest {
 public:
  Manifest(std::string subcommand, json inputs, std::uint64_t seed)
      : subcommand_(std::move(subcommand)), inputs_(std::move(inputs)), seed_(seed),
        start_(std::chrono::system_clock::now()), steady_start_(std::chrono::steady_clock::now()) {}

  void add_output(const std::string& path) { outputs_.push_back(path); }
  void set_result(const std::string& key, json value) { results_[key] = std::move(value); }

  json to_json() const {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - steady_start_).count();
    json j{{"tool", "bslab"},
           {"version", kVersion},
           {"compiler", __VERSION__},
           {"cxx_standard", __cplusplus},
           {"json_library", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
           {"subcommand", subcommand_},
           {"seed", seed_},
           {"inputs", inputs_},
           {"outputs", outputs_},
           {"started_utc", utc_timestamp(start_)},
           {"wall_time_s", wall}};
    if (!results_.empty()) j["results"] = results_;
    return j;
  }

  void write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest '" + path + "'");
    out << to_json().dump(2) << '\n';
  }

 private:
  std::string subcommand_;
  json inputs_;
  std::uint64_t seed_;
  std::vector<std::string> outputs_;
  json results_ = json::object();
  std::chrono::system_clock::time_point start_;
  std::chrono::steady_clock::time_point steady_start_;
};

}  // namespace bslab
