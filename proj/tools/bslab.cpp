// bslab command-line driver.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bslab/bslab.hpp"

namespace fs = std::filesystem;
using namespace bslab;

namespace {

// ---------------------------------------------------------------------------
// Shared options and run context

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out = "bslab_out";
  unsigned threads = 0;
  std::string config;
  bool quiet = false;
};

struct ModelOpts {
  std::optional<double> p;
  std::optional<double> q;
  std::string semantics = "restart";
  ModelParams params() const {
    if (p && q) throw std::invalid_argument("give --p or --q, not both");
    if (p) return ModelParams(*p);
    if (q) return ModelParams::from_q(*q);
    throw std::invalid_argument("a model parameter is required: --p or --q");
  }
  AllOnesSemantics all_ones() const {
    if (semantics == "restart") return AllOnesSemantics::restart;
    if (semantics == "frozen") return AllOnesSemantics::frozen;
    throw std::invalid_argument("semantics must be restart or frozen");
  }
};

Flavor parse_flavor(const std::string& s) {
  if (s == "continuous" || s == "time_weighted") return Flavor::continuous;
  if (s == "embedded") return Flavor::embedded;
  throw std::invalid_argument("flavor must be continuous or embedded");
}

BlockFlavor parse_block_flavor(const std::string& s) {
  if (s == "two_block") return BlockFlavor::two_block;
  if (s == "four_block") return BlockFlavor::four_block;
  throw std::invalid_argument("block flavor must be two_block or four_block");
}

// Seed for commands that only need one to build random graphs.
std::uint64_t optional_seed(std::optional<std::uint64_t> given) {
  try {
    return resolve_seed(given);
  } catch (const std::invalid_argument&) {
    return 0;
  }
}

class Run {
 public:
  Run(const Globals& g, std::string name, json inputs, bool needs_seed = true)
      : globals_(g), name_(std::move(name)), seed_(needs_seed ? resolve_seed(g.seed) : optional_seed(g.seed)),
        manifest_(name_, std::move(inputs), seed_) {
    fs::create_directories(g.out);
  }

  std::uint64_t seed() const { return seed_; }
  unsigned threads() const { return globals_.threads; }
  const std::string& dir() const { return globals_.out; }

  std::ofstream open(const std::string& file) {
    const auto path = (fs::path(globals_.out) / file).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    manifest_.add_output(path);
    return out;
  }
  void result(const std::string& key, json v) { manifest_.set_result(key, std::move(v)); }
  void say(const std::string& s) const {
    if (!globals_.quiet) std::cout << s << '\n';
  }
  void finish() { manifest_.write((fs::path(globals_.out) / (name_ + "_manifest.json")).string()); }

 private:
  const Globals& globals_;
  std::string name_;
  std::uint64_t seed_;
  Manifest manifest_;
};

/// Effective option values of a (sub)command, for the manifest.
json collect_inputs(const CLI::App* app) {
  json j = json::object();
  for (const CLI::Option* opt : app->get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      j[name] = r.size() == 1 ? json(r[0]) : json(r);
    } else if (!opt->get_default_str().empty()) {
      j[name] = opt->get_default_str();
    }
  }
  return j;
}

std::string num(double v) { return fmt_num(v); }

// ---------------------------------------------------------------------------
// JSON run configuration: keys are long option names (plus "subcommand").
// Values become command-line tokens inserted before the user's own
// arguments; options given on the command line win.

std::vector<std::string> config_tokens(const json& cfg, const std::vector<std::string>& user) {
  auto given_exact = [&](const std::string& key) {
    const std::string flag = "--" + key;
    return std::any_of(user.begin(), user.end(),
                       [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
  };
  // --p and --q are alternatives: either on the command line overrides both in the file.
  auto given = [&](const std::string& key) {
    if (key == "p" || key == "q") return given_exact("p") || given_exact("q");
    return given_exact(key);
  };
  auto scalar = [](const json& v) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) return fmt_num(v.get<double>());
    return v.dump();
  };
  std::vector<std::string> out;
  for (const auto& [key, v] : cfg.items()) {
    if (key == "subcommand" || key == "$schema" || key == "comment" || given(key)) continue;
    if (v.is_boolean()) {
      if (v.get<bool>()) out.push_back("--" + key);
    } else if (v.is_array()) {
      for (const auto& e : v) out.push_back("--" + key + "=" + scalar(e));
    } else if (!v.is_null()) {
      out.push_back("--" + key + "=" + scalar(v));
    }
  }
  return out;
}

std::vector<std::string> apply_config(std::vector<std::string> args, const std::set<std::string>& subcommands) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config '" + path + "'");
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const std::exception& e) {
    throw std::invalid_argument("config '" + path + "' is not valid JSON: " + e.what());
  }
  if (!cfg.is_object()) throw std::invalid_argument("config must be a JSON object");
  auto sub = std::find_if(args.begin(), args.end(), [&](const std::string& a) { return subcommands.count(a) > 0; });
  std::vector<std::string> user(args.begin(), args.end());
  std::vector<std::string> result;
  if (sub == args.end()) {
    if (!cfg.contains("subcommand")) throw std::invalid_argument("config has no subcommand and none was given");
    result.push_back(cfg["subcommand"].get<std::string>());
    const auto extra = config_tokens(cfg, user);
    result.insert(result.end(), extra.begin(), extra.end());
    result.insert(result.end(), args.begin(), args.end());
  } else {
    result.assign(args.begin(), sub + 1);
    const auto extra = config_tokens(cfg, user);
    result.insert(result.end(), extra.begin(), extra.end());
    result.insert(result.end(), sub + 1, args.end());
  }
  return result;
}

// ---------------------------------------------------------------------------
// Subcommand implementations

Configuration parse_init(const std::string& spec, std::size_t n, std::uint64_t seed) {
  if (spec == "zeros") return Configuration::all_zeros(n);
  if (spec == "ones") return Configuration::all_ones(n);
  if (spec.rfind("random:", 0) == 0) {
    const double pz = std::stod(spec.substr(7));
    auto rng = aux_stream(seed, 0, stream_tag::generic);
    Configuration c(n, 1);
    for (std::size_t i = 0; i < n; ++i) c[i] = rng.bernoulli(pz) ? 0 : 1;
    return c;
  }
  auto c = Configuration::parse(spec);
  if (c.size() != n) throw std::invalid_argument("initial configuration length differs from the vertex count");
  return c;
}

struct SimulateOpts {
  std::string graph;
  ModelOpts model;
  std::string flavor = "continuous";
  double time = 100.0;
  std::uint64_t steps = 10000;
  double sample_every = 1.0;
  std::string init = "zeros";
  bool log = false;
};

void cmd_simulate(const Globals& G, const SimulateOpts& o, json inputs) {
  Run run(G, "simulate", std::move(inputs));
  const Graph g = parse_graph_spec(o.graph, run.seed());
  const auto params = o.model.params();
  const auto init = parse_init(o.init, g.num_vertices(), run.seed());
  auto csv = run.open("simulate.csv");
  csv << "time,zeros,ones_fraction\n";
  const double n = double(g.num_vertices());
  Configuration final_state;
  if (parse_flavor(o.flavor) == Flavor::continuous) {
    if (!(o.time > 0.0) || !(o.sample_every > 0.0)) throw std::invalid_argument("--time and --sample-every must be positive");
    ContinuousProcess proc(g, params, init, run.seed(), 0, o.model.all_ones());
    std::vector<EventRecord> log;
    const auto samples = static_cast<std::size_t>(std::floor(o.time / o.sample_every + 1e-9));
    csv << "0," << proc.zeros() << ',' << num(1.0 - double(proc.zeros()) / n) << '\n';
    for (std::size_t k = 1; k <= samples; ++k) {
      const double t = std::min(o.time, double(k) * o.sample_every);
      proc.run_until(t, [&](const EventRecord& e, double) {
        if (o.log) log.push_back(e);
      });
      csv << num(t) << ',' << proc.zeros() << ',' << num(1.0 - double(proc.zeros()) / n) << '\n';
    }
    proc.run_until(o.time, [&](const EventRecord& e, double) {
      if (o.log) log.push_back(e);
    });
    if (o.log) {
      auto ev = run.open("events.csv");
      write_event_log(ev, g, log);
    }
    run.result("rings", proc.stats().sampled);
    run.result("applied", proc.stats().applied);
    final_state = proc.state();
  } else {
    DiscreteProcess proc(g, params, init, aux_stream(run.seed(), 0, stream_tag::discrete), o.model.all_ones());
    const auto every = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(o.sample_every));
    csv << "0," << proc.zeros() << ',' << num(1.0 - double(proc.zeros()) / n) << '\n';
    for (std::uint64_t s = 1; s <= o.steps; ++s) {
      proc.step();
      if (s % every == 0 || s == o.steps)
        csv << s << ',' << proc.zeros() << ',' << num(1.0 - double(proc.zeros()) / n) << '\n';
    }
    final_state = proc.state();
  }
  run.result("final", final_state.str());
  run.result("final_zeros", final_state.count_zeros());
  run.say("final " + final_state.str().substr(0, 200) + " zeros=" + std::to_string(final_state.count_zeros()));
  run.finish();
}

struct ExactOpts {
  std::string graph;
  ModelOpts model;
  std::string flavor = "continuous";
  std::size_t max_vertices = kDefaultMaxExactVertices;
  std::optional<double> lemma_t;
  std::size_t lemma_k = 1;
};

void cmd_exact(const Globals& G, const ExactOpts& o, json inputs) {
  Run run(G, "exact", std::move(inputs), false);
  const Graph g = parse_graph_spec(o.graph, run.seed());
  const auto params = o.model.params();
  const auto tm = build_kernel(g, params, o.model.all_ones(), o.max_vertices);
  const auto sd = stationary(tm, parse_flavor(o.flavor));
  {
    auto out = run.open("stationary.csv");
    write_stationary_csv(out, sd);
  }
  const auto m = marginals(sd);
  {
    auto out = run.open("marginals.csv");
    out << "vertex,pi_one\n";
    for (std::size_t x = 0; x < m.one_prob.size(); ++x) out << x << ',' << num(m.one_prob[x]) << '\n';
  }
  {
    auto out = run.open("zeros_tail.csv");
    out << "k,pi_zeros_gt_k\n";
    for (std::size_t k = 0; k < m.zeros_tail.size(); ++k) out << k << ',' << num(m.zeros_tail[k]) << '\n';
  }
  json res{{"states", sd.size()}, {"residual", sd.residual}, {"expected_zeros", m.expected_zeros},
           {"pi_one", m.one_prob}};
  if (o.lemma_t) {
    const auto A = make_state_set(tm, [&](const Configuration& c) { return c.count_zeros() >= o.lemma_k; });
    res["lemma"] = lemma21_check(tm, sd, A, *o.lemma_t);
  }
  run.result("exact", res);
  std::ostringstream s;
  s << "states=" << sd.size() << " residual=" << sd.residual << "\npi(eta_x=1):";
  for (double v : m.one_prob) s << ' ' << num(v);
  run.say(s.str());
  if (o.lemma_t) run.say("lemma: " + res["lemma"].dump());
  run.finish();
}

struct McCli {
  std::string graph;
  ModelOpts model;
  std::string flavor = "continuous";
  std::string functional = "all";
  Vertex vertex = 0;
  double a = 0.5;
  std::size_t k_max = 20;
  double budget = 1000.0;
  double burn_in = -1.0;
  std::size_t replicas = 4;
  std::size_t batches = kMinBatches;
  std::string init = "zeros";
};

McOptions make_mc_options(const McCli& o, std::uint64_t seed, unsigned threads, const Graph& g) {
  McOptions m;
  m.flavor = parse_flavor(o.flavor);
  m.budget = o.budget;
  m.burn_in = o.burn_in;
  m.n_replicas = o.replicas;
  m.batches = o.batches;
  m.semantics = o.model.all_ones();
  m.seed = seed;
  m.threads = threads;
  m.init = parse_init(o.init, g.num_vertices(), seed);
  return m;
}

void write_fit_csv(std::ostream& out, const std::string& graph, double q, const ZerosTail& z) {
  out << "graph,q,k_min,k_max,c1,c2,c2_stderr,c2_ci_lo,c2_ci_hi,rms_residual,note\n";
  if (z.fit) {
    const auto& f = *z.fit;
    out << csv_field(graph) << ',' << num(q) << ',' << f.k_min << ',' << f.k_max << ',' << num(f.c1) << ','
        << num(f.c2) << ',' << num(f.c2_se) << ',' << num(f.c2_ci_lo) << ',' << num(f.c2_ci_hi) << ','
        << num(f.rms_residual) << ",\n";
  } else {
    out << csv_field(graph) << ',' << num(q) << ",,,,,,,,," << csv_field(z.fit_note) << '\n';
  }
}

void cmd_mc(const Globals& G, const McCli& o, json inputs) {
  Run run(G, "mc", std::move(inputs));
  const Graph g = parse_graph_spec(o.graph, run.seed());
  const auto params = o.model.params();
  const auto mo = make_mc_options(o, run.seed(), run.threads(), g);
  auto out = run.open("mc.csv");
  write_mc_csv_header(out);
  const bool all = o.functional == "all";
  if (!all && o.functional != "marginal" && o.functional != "proportion" && o.functional != "zeros_tail")
    throw std::invalid_argument("functional must be marginal, proportion, zeros_tail or all");
  json res = json::object();
  if (all) {
    const auto s = mc_standard(g, params, o.vertex, o.a, o.k_max, mo);
    write_mc_csv_row(out, "marginal_one[" + std::to_string(o.vertex) + "]", params.p(), g.label(), s.marginal_one, mo.seed);
    write_mc_csv_row(out, "proportion_tail[" + num(o.a) + "]", params.p(), g.label(), s.proportion, mo.seed);
    for (std::size_t k = 0; k < s.zeros.tail.size(); ++k)
      write_mc_csv_row(out, "zeros_tail[" + std::to_string(k) + "]", params.p(), g.label(), s.zeros.tail[k], mo.seed);
    auto fit = run.open("tail_fit.csv");
    write_fit_csv(fit, g.label(), params.q(), s.zeros);
    res = json{{"marginal_one", s.marginal_one}, {"proportion", s.proportion}, {"zeros", s.zeros}};
    run.say("pi(eta_x=1) = " + num(s.marginal_one.mean) + " +- " + num(s.marginal_one.se));
    run.say("pi(bar eta >= a) = " + num(s.proportion.mean) + " +- " + num(s.proportion.se));
    if (s.zeros.fit) run.say("tail slope c2 = " + num(s.zeros.fit->c2) + " +- " + num(s.zeros.fit->c2_se));
  } else if (o.functional == "marginal") {
    const auto e = mc_marginal_one(g, params, o.vertex, mo);
    write_mc_csv_row(out, "marginal_one[" + std::to_string(o.vertex) + "]", params.p(), g.label(), e, mo.seed);
    res["marginal_one"] = e;
    run.say("pi(eta_x=1) = " + num(e.mean) + " +- " + num(e.se));
  } else if (o.functional == "proportion") {
    const auto e = mc_proportion_tail(g, params, o.a, mo);
    write_mc_csv_row(out, "proportion_tail[" + num(o.a) + "]", params.p(), g.label(), e, mo.seed);
    res["proportion"] = e;
    run.say("pi(bar eta >= a) = " + num(e.mean) + " +- " + num(e.se));
  } else {
    const auto z = mc_zeros_tail(g, params, o.k_max, mo);
    for (std::size_t k = 0; k < z.tail.size(); ++k)
      write_mc_csv_row(out, "zeros_tail[" + std::to_string(k) + "]", params.p(), g.label(), z.tail[k], mo.seed);
    auto fit = run.open("tail_fit.csv");
    write_fit_csv(fit, g.label(), params.q(), z);
    res["zeros"] = z;
    if (z.fit) run.say("tail slope c2 = " + num(z.fit->c2) + " +- " + num(z.fit->c2_se));
  }
  run.result("mc", res);
  run.finish();
}

struct BlocksOpts {
  std::string graph;
  ModelOpts model;
  std::string flavor = "two_block";
  std::optional<double> L;
  std::size_t levels = 20;
  std::size_t realizations = 20;
  bool check = false;
};

void cmd_blocks(const Globals& G, const BlocksOpts& o, json inputs) {
  Run run(G, "blocks", std::move(inputs));
  const Graph g = parse_graph_spec(o.graph, run.seed());
  const auto params = o.model.params();
  const auto flavor = parse_block_flavor(o.flavor);
  const int d = int(g.max_degree());
  const double L = o.L ? *o.L : (flavor == BlockFlavor::two_block ? hat_L(params.p(), d) : tilde_L(params.p(), d));
  const auto r = sample_nice_rate(g, flavor, params, L, o.levels, o.realizations, run.seed());
  auto out = run.open("blocks.csv");
  write_block_csv_header(out);
  write_block_csv_row(out, r);
  run.result("rate", r);
  run.say(std::string(to_string(flavor)) + " L=" + num(L) + " nice_rate=" + num(r.rate.mean) + " +- " +
          num(r.rate.se) + " analytic_lb=" + num(r.analytic_lb));
  if (o.check) {
    std::uint64_t pass = 0, fail = 0;
    for (std::size_t rep = 0; rep < o.realizations; ++rep) {
      const auto gc = sample_graphical(g, params, double(o.levels) * L, run.seed(), std::uint32_t(rep));
      ReplayOptions ro;
      ro.semantics = o.model.all_ones();
      for (std::size_t k = 0; k <= o.levels; ++k) ro.snapshot_times.push_back(double(k) * L);
      const auto rp = replay(g, parse_init("random:0.5", g.num_vertices(), run.seed() + rep), gc, ro);
      const BlockInspector ins(g, gc);
      for (std::size_t k = 0; k < o.levels; ++k) {
        const Window w{double(k) * L, double(k + 1) * L};
        if (flavor == BlockFlavor::two_block) {
          for (const auto& [x, y] : g.edges()) {
            const auto c = block2_proposition_check(ins.block2_nice({x, y}, w), {x, y}, rp.snapshots[k], rp.snapshots[k + 1]);
            pass += c == ClaimOutcome::pass;
            fail += c == ClaimOutcome::fail;
          }
        } else {
          for (const auto& b : separated_block4_layout(g)) {
            const auto c = block4_propagation_check(ins.block4_nice(b, w), b, rp.snapshots[k], rp.snapshots[k + 1]);
            pass += c == ClaimOutcome::pass;
            fail += c == ClaimOutcome::fail;
          }
        }
      }
    }
    run.result("claim_checks", json{{"pass", pass}, {"fail", fail}});
    run.say("claim checks: pass=" + std::to_string(pass) + " fail=" + std::to_string(fail));
  }
  run.finish();
}

struct PercolateOpts {
  std::size_t N = 10;
  std::vector<double> theta{0.95};
  std::size_t K = 3;
  std::size_t mx = 0;
  std::size_t my = 0;
  double h = 0.5;
  std::size_t samples = 2000;
  bool contour = false;
};

void cmd_percolate(const Globals& G, const PercolateOpts& o, json inputs) {
  Run run(G, "percolate", std::move(inputs));
  auto out = run.open("percolation.csv");
  write_percolation_csv_header(out);
  json res = json::array();
  std::vector<std::size_t> all_sites;
  for (std::size_t m = 0; m <= 2 * o.N; m += 2) all_sites.push_back(m);
  for (double th : o.theta) {
    const auto c = prob_connect(o.N, th, o.K, o.mx, o.my, o.samples, run.seed());
    const auto gl = prob_good_level(o.N, th, o.K, o.h, all_sites, o.samples, run.seed());
    write_percolation_csv_row(out, o.N, th, o.K, o.h, "connect", c, run.seed());
    write_percolation_csv_row(out, o.N, th, o.K, o.h, "good_level", gl, run.seed());
    json row{{"theta", th}, {"connect", c}, {"good_level", gl}};
    if (o.contour) {
      try {
        row["contour"] = contour_bounds(o.N, th, o.h, o.K);
      } catch (const std::domain_error& e) {
        row["contour_flag"] = e.what();
      }
    }
    run.say("theta=" + num(th) + " P[x->y]=" + num(c.estimate.mean) + " P[good]=" + num(gl.estimate.mean) +
            (gl.note.empty() ? "" : " (" + gl.note + ")"));
    res.push_back(row);
  }
  run.result("percolation", res);
  run.finish();
}

struct FormulasOpts {
  std::vector<double> p{0.02, 0.01, 0.005, 0.0015};
  std::vector<int> d{2, 4};
  std::optional<double> L;
};

void cmd_formulas(const Globals& G, const FormulasOpts& o, json inputs) {
  Run run(G, "formulas", std::move(inputs), false);
  std::vector<BoundReport> rows;
  for (int d : o.d)
    for (double p : o.p) {
      const double Lh = o.L ? *o.L : hat_L(p, d);
      const double Lt = o.L ? *o.L : tilde_L(p, d);
      rows.push_back(report_hat_L(p, d));
      rows.push_back(report_tilde_L(p, d));
      rows.push_back(report_stick(Lh, 1.0 - p, 2));
      rows.push_back(report_block2(Lh, p, d));
      rows.push_back(report_theta(Lt, p, d));
      rows.push_back(report_domination(p, d));
    }
  auto out = run.open("formulas.csv");
  write_formula_csv(out, rows);
  run.result("rows", rows);
  for (const auto& r : rows) run.say(r.formula + " " + r.inputs_string() + " = " + num(r.value));
  run.finish();
}

void cmd_q0(const Globals& G, int d, bool simple, json inputs) {
  Run run(G, "q0", std::move(inputs), false);
  const double v = simple ? q0_simple(d) : q0(d);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12f", v);
  run.result("q0", v);
  if (d == 2 && !simple) run.result("closed_form", q0_closed_form_d2());
  std::cout << buf << '\n';
  run.finish();
}

void cmd_theta(const Globals& G, double L, double p, int d, json inputs) {
  Run run(G, "theta", std::move(inputs), false);
  const auto r = report_theta(L, p, d);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10f", r.value);
  run.result("theta", r);
  std::cout << buf << (r.flags.empty() ? "" : " [" + r.flags_string() + "]") << '\n';
  run.finish();
}

struct DriftOpts {
  std::string graph;
  double q = 0.3;
  std::optional<double> h;
  std::size_t max_vertices = 16;
  bool rows = false;
};

void cmd_drift(const Globals& G, const DriftOpts& o, json inputs) {
  Run run(G, "drift", std::move(inputs), false);
  const Graph g = parse_graph_spec(o.graph, run.seed());
  const int d = int(g.max_degree());
  const double h = o.h ? *o.h : choose_h(o.q, d);
  std::vector<DriftRow> rows;
  const auto rep = verify_all_bounds(g, ModelParams::from_q(o.q), h, o.rows ? &rows : nullptr, o.max_vertices);
  if (o.rows) {
    auto out = run.open("drift.csv");
    write_drift_csv(out, rep, rows, g.num_vertices());
  }
  auto js = run.open("drift_report.json");
  js << json(rep).dump(2) << '\n';
  run.result("bounds_hold", rep.bounds_hold());
  run.result("max_drift", rep.max_drift);
  if (!rep.warning.empty()) std::cerr << "warning: " << rep.warning << '\n';
  run.say("h=" + num(h) + " configurations=" + std::to_string(rep.configurations) +
          " bounds_hold=" + (rep.bounds_hold() ? "true" : "false") + " max_drift=" + num(rep.max_drift));
  run.finish();
}

struct ChainsOpts {
  std::string graph;
  std::string mode = "exact";
  std::optional<Vertex> anchor;
  std::optional<std::size_t> cover;
  std::uint64_t budget = kDefaultChainBudget;
};

void cmd_chains(const Globals& G, const ChainsOpts& o, json inputs) {
  Run run(G, "chains", std::move(inputs), false);
  const Graph g = parse_graph_spec(o.graph, run.seed());
  auto out = run.open("chains.csv");
  out << "kind,index,length,vertices\n";
  auto seq = [](const ChainPath& c) {
    std::string s;
    for (Vertex v : c.vertices()) s += (s.empty() ? "" : " ") + std::to_string(v);
    return s;
  };
  if (o.cover) {
    const auto cv = chain_cover(g, *o.cover, o.budget);
    for (std::size_t i = 0; i < cv.chains.size(); ++i)
      out << "cover," << i << ',' << cv.chains[i].length() << ',' << seq(cv.chains[i]) << '\n';
    run.result("cover_size", cv.size());
    run.result("uncovered", cv.uncovered);
    run.say("cover: " + std::to_string(cv.size()) + " chains, " + std::to_string(cv.uncovered.size()) + " uncovered");
  } else {
    const auto mode = o.mode == "exact" ? ChainSearchMode::exact : ChainSearchMode::heuristic;
    if (o.mode != "exact" && o.mode != "heuristic") throw std::invalid_argument("mode must be exact or heuristic");
    const auto r = longest_chain(g, mode, o.anchor, o.budget);
    out << "longest,0," << r.chain.length() << ',' << seq(r.chain) << '\n';
    run.result("length", r.chain.length());
    run.result("exact", r.exact);
    run.say("longest chain length " + std::to_string(r.chain.length()) + (r.exact ? " (exact)" : " (lower bound)") +
            ": " + seq(r.chain));
  }
  run.finish();
}

// ---------------------------------------------------------------------------
// Presets. Budgets are multiplied by --scale (default 1).

std::size_t scaled(double base, double scale, double floor_value) {
  return static_cast<std::size_t>(std::max(floor_value, std::round(base * scale)));
}

void preset_thm1_survival(Run& run, double scale) {
  auto out = run.open("thm1_survival.csv");
  write_mc_csv_header(out);
  json res = json::array();
  for (double p : {0.001, 0.7}) {
    for (std::size_t N : {50u, 100u, 200u}) {
      const Graph g = cycle_graph(N);
      McOptions mo;
      mo.seed = run.seed();
      mo.threads = run.threads();
      mo.n_replicas = 4;
      mo.batches = 16;
      // About 1e6 rings per replica at scale 1.
      mo.budget = double(scaled(1e6 / double(N), scale, 50.0));
      const auto margs = mc_marginals(g, ModelParams(p), mo);
      // Vertex-averaged marginal (all vertices are equivalent on the cycle).
      double mean = 0.0, se = 0.0;
      for (const auto& e : margs) {
        mean += e.mean;
        se = std::max(se, e.se);
      }
      Estimate e = margs[0];
      write_mc_csv_row(out, "marginal_one[0]", p, g.label(), e, mo.seed);
      res.push_back(json{{"graph", g.label()}, {"p", p}, {"marginal_one", e}, {"vertex_average", mean / double(N)}});
      run.say(g.label() + " p=" + num(p) + " pi(eta_0=1)=" + num(e.mean) + " +- " + num(e.se));
    }
  }
  run.result("thm1_survival", res);
}

void preset_thm2_proportion(Run& run, double scale) {
  auto out = run.open("thm2_proportion.csv");
  write_mc_csv_header(out);
  const Graph g = cycle_graph(100);
  for (double p : {0.1, 0.3, 0.5, 0.6, 0.7, 0.8, 0.9}) {
    McOptions mo;
    mo.seed = run.seed();
    mo.threads = run.threads();
    mo.budget = double(scaled(2000.0, scale, 50.0));
    for (double a : {0.5, 0.9}) {
      const auto e = mc_proportion_tail(g, ModelParams(p), a, mo);
      write_mc_csv_row(out, "proportion_tail[" + num(a) + "]", p, g.label(), e, mo.seed);
      run.say("p=" + num(p) + " a=" + num(a) + " pi(bar eta>=a)=" + num(e.mean));
    }
  }
}

void preset_thm3_extinction(Run& run, double scale) {
  struct Case {
    Graph g;
    double q;
    std::size_t k_max;
  };
  const std::vector<Case> cases{{cycle_graph(50), 0.3, 20}, {torus2d_graph(7, 7), 0.15, 20}};
  auto fit_out = run.open("thm3_tail_fit.csv");
  fit_out << "graph,q,k_min,k_max,c1,c2,c2_stderr,c2_ci_lo,c2_ci_hi,rms_residual,note\n";
  auto tail_out = run.open("thm3_zeros_tail.csv");
  write_mc_csv_header(tail_out);
  for (const auto& c : cases) {
    McOptions mo;
    mo.seed = run.seed();
    mo.threads = run.threads();
    mo.budget = double(scaled(40000.0, scale, 100.0));
    const auto params = ModelParams::from_q(c.q);
    const auto z = mc_zeros_tail(c.g, params, c.k_max, mo);
    for (std::size_t k = 0; k < z.tail.size(); ++k)
      write_mc_csv_row(tail_out, "zeros_tail[" + std::to_string(k) + "]", params.p(), c.g.label(), z.tail[k], mo.seed);
    std::ostringstream row;
    write_fit_csv(row, c.g.label(), c.q, z);
    const std::string s = row.str();
    fit_out << s.substr(s.find('\n') + 1);
    if (z.fit)
      run.say(c.g.label() + " q=" + num(c.q) + " c2=" + num(z.fit->c2) + " CI [" + num(z.fit->c2_ci_lo) + ", " +
              num(z.fit->c2_ci_hi) + "]");
  }
}

void preset_classic_eta_c(Run& run, double scale) {
  const Graph g = cycle_graph(1000);
  const auto burn = static_cast<std::uint64_t>(scaled(2e7, scale, 1e4));
  const auto steps = static_cast<std::uint64_t>(scaled(2e7, scale, 1e4));
  const auto st = classical_long_run(g, burn, steps, std::max<std::uint64_t>(1, steps / 1000), run.seed());
  auto out = run.open("classic_fitness_histogram.csv");
  out << "bin_lo,bin_hi,count,density\n";
  const double w = 1.0 / double(st.histogram.size());
  for (std::size_t b = 0; b < st.histogram.size(); ++b)
    out << num(double(b) * w) << ',' << num(double(b + 1) * w) << ',' << st.histogram[b] << ','
        << num(double(st.histogram[b]) / double(st.samples) / w) << '\n';
  run.result("mass_below_0.55", st.mass_below(0.55));
  run.result("ks_uniform_0.7_1", st.ks_uniform());
  run.say("mass below 0.55: " + num(st.mass_below(0.55)) + ", KS on [0.7,1]: " + num(st.ks_uniform()));
}

void preset_block_bounds(Run& run, double scale) {
  auto out = run.open("block_bounds.csv");
  write_block_csv_header(out);
  const std::size_t reps = scaled(200.0, scale, 2.0);
  for (int d : {2, 4}) {
    const Graph g = d == 2 ? cycle_graph(70) : torus2d_graph(10, 10);
    for (double p : {0.02, 0.01, 0.005, 0.0015}) {
      const auto r2 = sample_nice_rate(g, BlockFlavor::two_block, ModelParams(p), hat_L(p, d), 10, reps, run.seed());
      const auto r4 = sample_nice_rate(g, BlockFlavor::four_block, ModelParams(p), tilde_L(p, d), 10, reps, run.seed());
      write_block_csv_row(out, r2);
      write_block_csv_row(out, r4);
      run.say("d=" + std::to_string(d) + " p=" + num(p) + " two_block " + num(r2.rate.mean) + " >= " +
              num(r2.analytic_lb) + ", four_block " + num(r4.rate.mean) + " >= " + num(r4.analytic_lb));
    }
  }
}

void preset_percolation_sweep(Run& run, double scale) {
  auto out = run.open("percolation_sweep.csv");
  write_percolation_csv_header(out);
  const std::size_t n = scaled(2000.0, scale, 50.0);
  for (std::size_t N : {5u, 10u, 20u}) {
    std::vector<std::size_t> all;
    for (std::size_t m = 0; m <= 2 * N; m += 2) all.push_back(m);
    for (double th : {0.6, 0.7, 0.8, 0.9, 0.95, 0.99}) {
      const auto c = prob_connect(N, th, 3, N - N % 2, N - N % 2, n, run.seed());
      const auto gl = prob_good_level(N, th, 3, 0.5, all, n, run.seed());
      write_percolation_csv_row(out, N, th, 3, 0.5, "connect", c, run.seed());
      write_percolation_csv_row(out, N, th, 3, 0.5, "good_level", gl, run.seed());
    }
  }
  run.say("wrote percolation_sweep.csv");
}

void cmd_preset(const Globals& G, const std::string& name, double scale, json inputs) {
  static const std::map<std::string, void (*)(Run&, double)> presets{
      {"thm1_survival", preset_thm1_survival},   {"thm2_proportion", preset_thm2_proportion},
      {"thm3_extinction", preset_thm3_extinction}, {"classic_eta_c", preset_classic_eta_c},
      {"block_bounds", preset_block_bounds},     {"percolation_sweep", preset_percolation_sweep}};
  const auto it = presets.find(name);
  if (it == presets.end()) throw std::invalid_argument("unknown preset '" + name + "'");
  if (!(scale > 0.0)) throw std::invalid_argument("--scale must be positive");
  Run run(G, "preset_" + name, std::move(inputs));
  it->second(run, scale);
  run.finish();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bslab: discrete Bak-Sneppen laboratory"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals G;
  app.add_option("--seed", G.seed, "RNG seed (falls back to BSLAB_SEED)");
  app.add_option("--out", G.out, "output directory")->capture_default_str();
  app.add_option("--threads", G.threads, "replica threads (0 = all cores)")->capture_default_str();
  app.add_option("--config", G.config, "JSON run configuration");
  app.add_flag("--quiet", G.quiet, "no summary on stdout");

  auto add_model = [](CLI::App* sub, ModelOpts& m) {
    auto* p = sub->add_option("--p", m.p, "resampling probability of a one");
    auto* q = sub->add_option("--q", m.q, "1 - p");
    p->excludes(q);
    sub->add_option("--semantics", m.semantics, "all-ones semantics: restart|frozen")->capture_default_str();
  };

  SimulateOpts sim;
  auto* s_sim = app.add_subcommand("simulate", "run one trajectory");
  s_sim->set_help_flag("--help", "print help");
  s_sim->add_option("--graph", sim.graph, "graph spec")->required();
  add_model(s_sim, sim.model);
  s_sim->add_option("--flavor", sim.flavor, "continuous|embedded")->capture_default_str();
  s_sim->add_option("--time", sim.time, "continuous horizon")->capture_default_str();
  s_sim->add_option("--steps", sim.steps, "embedded steps")->capture_default_str();
  s_sim->add_option("--sample-every", sim.sample_every, "trace spacing")->capture_default_str();
  s_sim->add_option("--init", sim.init, "zeros|ones|random:P|bitstring")->capture_default_str();
  s_sim->add_flag("--log", sim.log, "write the continuous event log");

  ExactOpts ex;
  auto* s_ex = app.add_subcommand("exact", "exact stationary distribution");
  s_ex->set_help_flag("--help", "print help");
  s_ex->add_option("--graph", ex.graph, "graph spec")->required();
  add_model(s_ex, ex.model);
  s_ex->add_option("--flavor", ex.flavor, "continuous|embedded")->capture_default_str();
  s_ex->add_option("--max-vertices", ex.max_vertices, "state-space guard")->capture_default_str();
  s_ex->add_option("--lemma-t", ex.lemma_t, "run the escape/entry check at time t");
  s_ex->add_option("--lemma-k", ex.lemma_k, "A = {#zeros >= k}")->capture_default_str();

  McCli mc;
  auto* s_mc = app.add_subcommand("mc", "Monte Carlo estimates");
  s_mc->set_help_flag("--help", "print help");
  s_mc->add_option("--graph", mc.graph, "graph spec")->required();
  add_model(s_mc, mc.model);
  s_mc->add_option("--flavor", mc.flavor, "continuous|embedded")->capture_default_str();
  s_mc->add_option("--functional", mc.functional, "marginal|proportion|zeros_tail|all")->capture_default_str();
  s_mc->add_option("--vertex", mc.vertex, "vertex for the marginal")->capture_default_str();
  s_mc->add_option("--a", mc.a, "proportion threshold")->capture_default_str();
  s_mc->add_option("--kmax", mc.k_max, "largest k of the zero-count tail")->capture_default_str();
  s_mc->add_option("--budget", mc.budget, "per-replica time or steps")->capture_default_str();
  s_mc->add_option("--burn-in", mc.burn_in, "per replica, negative = 10%")->capture_default_str();
  s_mc->add_option("--replicas", mc.replicas, "independent replicas")->capture_default_str();
  s_mc->add_option("--batches", mc.batches, "pooled batches (>= 16)")->capture_default_str();
  s_mc->add_option("--init", mc.init, "zeros|ones|random:P|bitstring")->capture_default_str();

  BlocksOpts bl;
  auto* s_bl = app.add_subcommand("blocks", "block nice rates and zero-transport checks");
  s_bl->set_help_flag("--help", "print help");
  s_bl->add_option("--graph", bl.graph, "graph spec")->required();
  add_model(s_bl, bl.model);
  s_bl->add_option("--flavor", bl.flavor, "two_block|four_block")->capture_default_str();
  s_bl->add_option("--L", bl.L, "window length (default: optimising length)");
  s_bl->add_option("--levels", bl.levels, "windows per realization")->capture_default_str();
  s_bl->add_option("--realizations", bl.realizations, "graphical constructions")->capture_default_str();
  s_bl->add_flag("--check", bl.check, "also check zero transport on replayed trajectories");

  PercolateOpts pc;
  auto* s_pc = app.add_subcommand("percolate", "oriented percolation on the strip");
  s_pc->set_help_flag("--help", "print help");
  s_pc->add_option("--N", pc.N, "strip half-width")->capture_default_str();
  s_pc->add_option("--theta", pc.theta, "bond densities")->capture_default_str();
  s_pc->add_option("--K", pc.K, "height multiple")->capture_default_str();
  s_pc->add_option("--mx", pc.mx, "start coordinate")->capture_default_str();
  s_pc->add_option("--my", pc.my, "target coordinate")->capture_default_str();
  s_pc->add_option("--h", pc.h, "goodness parameter")->capture_default_str();
  s_pc->add_option("--samples", pc.samples, "samples per theta")->capture_default_str();
  s_pc->add_flag("--contour", pc.contour, "evaluate the contour bounds");

  FormulasOpts fo;
  auto* s_fo = app.add_subcommand("formulas", "closed-form bounds table");
  s_fo->set_help_flag("--help", "print help");
  s_fo->add_option("--p", fo.p, "p values")->capture_default_str();
  s_fo->add_option("--d", fo.d, "degrees")->capture_default_str();
  s_fo->add_option("--L", fo.L, "fixed window length");

  int q0_d = 2;
  bool q0_simple_flag = false;
  auto* s_q0 = app.add_subcommand("q0", "extinction threshold q0(d)");
  s_q0->set_help_flag("--help", "print help");
  s_q0->add_option("--d", q0_d, "degree")->capture_default_str();
  s_q0->add_flag("--simple", q0_simple_flag, "threshold from the simple drift bound");

  double th_L = 14.0, th_p = 0.0015;
  int th_d = 2;
  auto* s_th = app.add_subcommand("theta", "4-block nice-probability bound");
  s_th->set_help_flag("--help", "print help");
  s_th->add_option("--L", th_L, "window length")->capture_default_str();
  s_th->add_option("--p", th_p, "p")->capture_default_str();
  s_th->add_option("--d", th_d, "degree")->capture_default_str();

  DriftOpts dr;
  auto* s_dr = app.add_subcommand("drift", "exhaustive drift verification");
  s_dr->set_help_flag("--help", "print help");
  s_dr->add_option("--graph", dr.graph, "graph spec")->required();
  s_dr->add_option("--q", dr.q, "q = 1 - p")->capture_default_str();
  s_dr->add_option("--h", dr.h, "Lyapunov weight (default: window midpoint)");
  s_dr->add_option("--max-vertices", dr.max_vertices, "enumeration guard")->capture_default_str();
  s_dr->add_flag("--rows", dr.rows, "write per-configuration rows");

  ChainsOpts ch;
  auto* s_ch = app.add_subcommand("chains", "longest chains and chain covers");
  s_ch->set_help_flag("--help", "print help");
  s_ch->add_option("--graph", ch.graph, "graph spec")->required();
  s_ch->add_option("--mode", ch.mode, "exact|heuristic")->capture_default_str();
  s_ch->add_option("--anchor", ch.anchor, "vertex the chain must contain");
  s_ch->add_option("--cover", ch.cover, "cover by chains of this length");
  s_ch->add_option("--budget", ch.budget, "search budget")->capture_default_str();

  std::string preset_name;
  double preset_scale = 1.0;
  auto* s_pr = app.add_subcommand("preset", "named experiment sets");
  s_pr->set_help_flag("--help", "print help");
  s_pr->add_option("name", preset_name,
                   "thm1_survival|thm2_proportion|thm3_extinction|classic_eta_c|block_bounds|percolation_sweep")
      ->required();
  s_pr->add_option("--scale", preset_scale, "budget multiplier")->capture_default_str();

  std::set<std::string> names;
  for (const auto* sub : app.get_subcommands({})) names.insert(sub->get_name());

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = apply_config(args, names);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    auto inputs = [&](const CLI::App* sub) {
      json j = collect_inputs(sub);
      j["out"] = G.out;
      j["threads"] = G.threads;
      if (!G.config.empty()) j["config"] = G.config;
      return j;
    };
    if (*s_sim) cmd_simulate(G, sim, inputs(s_sim));
    else if (*s_ex) cmd_exact(G, ex, inputs(s_ex));
    else if (*s_mc) cmd_mc(G, mc, inputs(s_mc));
    else if (*s_bl) cmd_blocks(G, bl, inputs(s_bl));
    else if (*s_pc) cmd_percolate(G, pc, inputs(s_pc));
    else if (*s_fo) cmd_formulas(G, fo, inputs(s_fo));
    else if (*s_q0) cmd_q0(G, q0_d, q0_simple_flag, inputs(s_q0));
    else if (*s_th) cmd_theta(G, th_L, th_p, th_d, inputs(s_th));
    else if (*s_dr) cmd_drift(G, dr, inputs(s_dr));
    else if (*s_ch) cmd_chains(G, ch, inputs(s_ch));
    else if (*s_pr) cmd_preset(G, preset_name, preset_scale, inputs(s_pr));
  } catch (const BudgetExceeded& e) {
    std::cerr << "budget exceeded: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
