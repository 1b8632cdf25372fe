#pragma once

// Memetic search: greedy local descent driven by sensitivity sweeps, nested in
// a genetic global loop (binary tournament, single-point crossover, one-bit
// mutation, elitist merge).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "momtopo/core.hpp"
#include "momtopo/metrics.hpp"
#include "momtopo/parallel.hpp"
#include "momtopo/reanalysis.hpp"
#include "momtopo/shapes.hpp"

namespace momtopo {

using Rng = std::mt19937_64;

/// Uniform integer in [0, n), by rejection; identical on every platform.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  if (n == 0) throw InvalidArgument("uniform_index over an empty range");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

enum class DescentScope { survivors, offspring };

struct MemeticConfig {
  int i_max = 1000;
  double eps_loc = 0.0;
  int j_max = 20;
  double eps_glob = 0.0;
  int n_agents = 10;
  double p_c = 1.0;
  double p_m = 1.0;
  double c_bnd = 1.0;
  bool removals = true;
  bool additions = true;
  std::uint64_t seed = 1;
  DescentScope descent_scope = DescentScope::survivors;
  int threads = 1;

  void validate() const {
    std::vector<std::string> bad;
    if (i_max < 0) bad.push_back("i_max: must be >= 0");
    if (!(eps_loc >= 0.0)) bad.push_back("eps_loc: must be >= 0");
    if (j_max < 0) bad.push_back("j_max: must be >= 0");
    if (!(eps_glob >= 0.0)) bad.push_back("eps_glob: must be >= 0");
    if (n_agents < 2) bad.push_back("n_agents: must be >= 2");
    if (!(p_c >= 0.0 && p_c <= 1.0)) bad.push_back("p_c: must lie in [0, 1]");
    if (!(p_m >= 0.0 && p_m <= 1.0)) bad.push_back("p_m: must lie in [0, 1]");
    if (!(c_bnd >= 1.0)) bad.push_back("c_bnd: must be >= 1");
    if (threads < 1) bad.push_back("threads: must be >= 1");
    if (!bad.empty()) throw ConfigError(bad);
  }
};

struct Agent {
  Gene gene;
  double f = infinity;
  bool descended = false;
  bool failed = false;
};

// ---------------------------------------------------------------------------
// Local step

enum class LocalStop { local_minimum, relative_error, max_iterations, failed };

inline const char* to_string(LocalStop s) {
  switch (s) {
    case LocalStop::local_minimum: return "local_minimum";
    case LocalStop::relative_error: return "relative_error";
    case LocalStop::max_iterations: return "max_iterations";
    case LocalStop::failed: return "failed";
  }
  return "?";
}

struct DescentStep {
  int i;  // commits so far
  double f;
  int active_dofs;
};

struct DescentResult {
  Gene gene;
  double f = infinity;
  int commits = 0;
  LocalStop stop = LocalStop::local_minimum;
  std::vector<DescentStep> trace;  // entry 0 is the starting point
  std::string error;
};

/// Greedy descent: sweep, commit the most negative candidate, repeat.
inline DescentResult local_descent(const Gene& start, const OperatorSet& ops, const Objective& objective,
                                   const MemeticConfig& cfg, int threads = 1) {
  DescentResult out;
  out.gene = start;
  std::vector<bool> fixed_mask(static_cast<std::size_t>(ops.n_dof()), false);
  for (int f : start.param().fixed()) fixed_mask[f] = true;
  ReanalysisState state;
  try {
    state = init_state(ops, start, &objective);
  } catch (const NumericalError& e) {
    out.stop = LocalStop::failed;
    out.error = e.what();
    return out;
  }
  out.f = state.f;
  out.trace.push_back({0, state.f, state.size()});
  if (!std::isfinite(state.f)) {
    out.stop = LocalStop::failed;
    out.error = "objective not evaluable at the starting shape";
    return out;
  }
  DofList R, A;
  for (int i = 1;; ++i) {
    candidate_sets(state, fixed_mask, R, A);
    if (!cfg.removals) R.clear();
    if (!cfg.additions) A.clear();
    const auto map = sweep_sensitivity(state, R, A, threads);
    const int best = map.best();
    if (best < 0) {
      out.stop = LocalStop::local_minimum;
      break;
    }
    if (i > cfg.i_max) {
      out.stop = LocalStop::max_iterations;
      break;
    }
    const auto& e = map.entries[best];
    const double f_old = state.f;
    try {
      if (e.action == Action::remove)
        commit_remove(state, e.dof);
      else
        commit_add(state, e.dof);
    } catch (const NumericalError& err) {
      out.stop = LocalStop::failed;
      out.error = err.what();
      break;
    }
    out.gene.flip_dof(e.dof);
    ++out.commits;
    // a refresh can shift f by rounding; never accept a non-improving step
    if (!(state.f < f_old)) {
      out.gene.flip_dof(e.dof);
      --out.commits;
      out.stop = LocalStop::local_minimum;
      break;
    }
    out.f = state.f;
    out.trace.push_back({out.commits, state.f, state.size()});
    if ((f_old - state.f) / std::abs(f_old) < cfg.eps_loc) {
      out.stop = LocalStop::relative_error;
      break;
    }
  }
  if (out.stop == LocalStop::failed) out.f = infinity;
  return out;
}

/// Objective of a gene without descent; +inf when the system is singular.
inline double evaluate_gene(const Gene& g, const OperatorSet& ops, const Objective& objective) {
  try {
    return init_state(ops, g, &objective).f;
  } catch (const NumericalError&) {
    return infinity;
  }
}

// ---------------------------------------------------------------------------
// Global step

/// N_ags - 2 uniform random genes after the all-zeros and all-ones genes.
inline std::vector<Gene> init_population(const MemeticConfig& cfg, const ParamPtr& param, Rng& rng) {
  if (cfg.n_agents < 2) throw ConfigError({"n_agents: must be >= 2"});
  std::vector<Gene> pop;
  pop.push_back(Gene::zeros(param));
  pop.push_back(Gene::ones(param));
  for (int a = 2; a < cfg.n_agents; ++a) {
    Gene g(param);
    for (int b = 0; b < g.n_opt(); ++b) g.set(b, (rng() >> 63) != 0);
    pop.push_back(std::move(g));
  }
  return pop;
}

inline bool better(double a, double b) {
  // NaN ranks last
  if (std::isnan(b)) return !std::isnan(a);
  return a < b;
}

/// N_ags binary tournaments between two distinct random agents; returns
/// indices into `agents`.
inline std::vector<int> tournament_select(const std::vector<Agent>& agents, Rng& rng) {
  const int n = static_cast<int>(agents.size());
  if (n < 2) throw InvalidArgument("tournament needs at least two agents");
  std::vector<int> pool;
  pool.reserve(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    const int i = static_cast<int>(uniform_index(rng, n));
    int k = static_cast<int>(uniform_index(rng, n - 1));
    if (k >= i) ++k;
    const bool pick_k = better(agents[k].f, agents[i].f) || (agents[k].f == agents[i].f && k < i);
    pool.push_back(pick_k ? k : i);
  }
  return pool;
}

/// Cut position in [1, N_opt - 1]; offspring take bits [0, cut) from one
/// parent and [cut, N_opt) from the other.
inline std::pair<Gene, Gene> crossover_pair(const Gene& a, const Gene& b, int cut) {
  if (!a.same_parameterization(b)) throw InvalidArgument("crossover of genes with different parameterizations");
  Gene c = a, d = b;
  for (int i = cut; i < a.n_opt(); ++i) {
    c.set(i, b.bit(i));
    d.set(i, a.bit(i));
  }
  return {std::move(c), std::move(d)};
}

inline int draw_cut(int n_opt, Rng& rng) {
  if (n_opt < 2) return n_opt;
  return 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n_opt - 1)));
}

/// Shuffles the pool and crosses adjacent pairs; each pair yields two
/// complementary offspring. An odd pool pairs its last parent with the first.
inline std::vector<Gene> crossover(const std::vector<Gene>& parents, double p_c, Rng& rng) {
  std::vector<Gene> pool = parents;
  for (int i = static_cast<int>(pool.size()) - 1; i > 0; --i)
    std::swap(pool[i], pool[uniform_index(rng, static_cast<std::uint64_t>(i + 1))]);
  std::vector<Gene> out;
  out.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); i += 2) {
    const Gene& a = pool[i];
    const Gene& b = (i + 1 < pool.size()) ? pool[i + 1] : pool[0];
    const bool cross = uniform01(rng) < p_c;
    Gene c = a, d = b;
    if (cross && a.n_opt() >= 2) std::tie(c, d) = crossover_pair(a, b, draw_cut(a.n_opt(), rng));
    out.push_back(std::move(c));
    if (out.size() < pool.size()) out.push_back(std::move(d));
  }
  return out;
}

/// Flips one uniformly chosen bit with probability p_m.
inline Gene mutate(Gene g, double p_m, Rng& rng) {
  if (g.n_opt() == 0) return g;
  if (uniform01(rng) < p_m) g.flip(static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(g.n_opt()))));
  return g;
}

/// Best N_ags of parents followed by offspring; stable, so ties keep parents.
inline std::vector<Agent> elitist_merge(const std::vector<Agent>& parents, const std::vector<Agent>& offspring) {
  std::vector<Agent> all = parents;
  all.insert(all.end(), offspring.begin(), offspring.end());
  std::stable_sort(all.begin(), all.end(), [](const Agent& a, const Agent& b) { return better(a.f, b.f); });
  all.resize(parents.size());
  return all;
}

// ---------------------------------------------------------------------------
// Memetic loop

enum class Termination { bound, relative_error, max_iterations };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::bound: return "bound";
    case Termination::relative_error: return "relative_error";
    case Termination::max_iterations: return "max_iterations";
  }
  return "?";
}

struct TraceRow {
  int j;
  int i;
  int agent;
  double f;
  double q;  // f / f_bound, NaN without a bound
  int active_dofs;
};

struct GenerationStats {
  int j;
  double best, worst, mean;
};

struct MemeticResult {
  Gene best;
  double best_f = infinity;
  int generations = 0;
  Termination reason = Termination::max_iterations;
  std::vector<Agent> population;
  std::vector<TraceRow> trace;
  std::vector<GenerationStats> stats;
  int evaluations = 0;
  int failed = 0;
};

namespace detail {

inline GenerationStats stats_of(int j, const std::vector<Agent>& agents) {
  GenerationStats s{j, infinity, -infinity, 0.0};
  int finite = 0;
  for (const auto& a : agents) {
    s.best = std::min(s.best, a.f);
    s.worst = std::max(s.worst, a.f);
    if (std::isfinite(a.f)) {
      s.mean += a.f;
      ++finite;
    }
  }
  s.mean = finite ? s.mean / finite : infinity;
  return s;
}

}  // namespace detail

/// Runs the memetic loop. `f_bound` (the objective value of the fundamental
/// bound, 1 for a normalized objective) enables the distance-from-bound stop.
inline MemeticResult memetic_run(const OperatorSet& ops, const Objective& objective, const ParamPtr& param,
                                 const MemeticConfig& cfg, std::optional<double> f_bound = std::nullopt) {
  cfg.validate();
  if (param->n_dof() != ops.n_dof()) throw InvalidArgument("parameterization does not match the operator set");
  if (f_bound && !(*f_bound > 0.0)) throw InvalidArgument("bound objective value must be positive");
  Rng rng(cfg.seed);
  MemeticResult res;
  const double fb = f_bound.value_or(std::numeric_limits<double>::quiet_NaN());

  // Descends every agent in `idx` in parallel; traces are merged in agent order.
  auto descend = [&](std::vector<Agent>& agents, const std::vector<int>& idx, int j) {
    std::vector<DescentResult> results(idx.size());
    const int n = static_cast<int>(idx.size());
    const int outer = std::max(1, std::min(cfg.threads, n));
    parallel_for(n, outer, [&](int begin, int end, int) {
      for (int t = begin; t < end; ++t) results[t] = local_descent(agents[idx[t]].gene, ops, objective, cfg);
    });
    for (int t = 0; t < n; ++t) {
      auto& a = agents[idx[t]];
      auto& r = results[t];
      a.gene = std::move(r.gene);
      a.f = r.f;
      a.descended = true;
      a.failed = r.stop == LocalStop::failed;
      res.evaluations += 1 + r.commits;
      if (a.failed) ++res.failed;
      for (const auto& st : r.trace) res.trace.push_back({j, st.i, idx[t], st.f, st.f / fb, st.active_dofs});
    }
  };

  auto evaluate = [&](std::vector<Agent>& agents) {
    const int n = static_cast<int>(agents.size());
    const int outer = std::max(1, std::min(cfg.threads, n));
    parallel_for(n, outer, [&](int begin, int end, int) {
      for (int t = begin; t < end; ++t) agents[t].f = evaluate_gene(agents[t].gene, ops, objective);
    });
    for (int t = 0; t < n; ++t) {
      agents[t].failed = !std::isfinite(agents[t].f);
      ++res.evaluations;
    }
  };

  auto sort_agents = [](std::vector<Agent>& agents) {
    std::stable_sort(agents.begin(), agents.end(), [](const Agent& a, const Agent& b) { return better(a.f, b.f); });
  };

  std::vector<Agent> pop;
  for (auto& g : init_population(cfg, param, rng)) pop.push_back({std::move(g)});
  {
    std::vector<int> all(pop.size());
    for (std::size_t i = 0; i < pop.size(); ++i) all[i] = static_cast<int>(i);
    descend(pop, all, 1);
  }
  sort_agents(pop);
  if (std::all_of(pop.begin(), pop.end(), [](const Agent& a) { return !std::isfinite(a.f); }))
    throw NumericalError(NumericalError::Kind::singular_system, "every initial agent failed to evaluate");
  res.stats.push_back(detail::stats_of(1, pop));

  int j = 1;
  while (true) {
    const double best_f = pop.front().f;
    if (f_bound && best_f / *f_bound < cfg.c_bnd) {
      res.reason = Termination::bound;
      break;
    }
    if (j > cfg.j_max) {
      res.reason = Termination::max_iterations;
      break;
    }
    const double worst_before = pop.back().f;

    std::vector<Gene> parents;
    for (int k : tournament_select(pop, rng)) parents.push_back(pop[k].gene);
    std::vector<Agent> offspring;
    for (auto& g : crossover(parents, cfg.p_c, rng)) offspring.push_back({mutate(std::move(g), cfg.p_m, rng)});

    if (cfg.descent_scope == DescentScope::offspring) {
      std::vector<int> all(offspring.size());
      for (std::size_t i = 0; i < offspring.size(); ++i) all[i] = static_cast<int>(i);
      descend(offspring, all, j + 1);
    } else {
      evaluate(offspring);
    }
    pop = elitist_merge(pop, offspring);
    if (cfg.descent_scope == DescentScope::survivors) {
      std::vector<int> todo;
      for (std::size_t i = 0; i < pop.size(); ++i)
        if (!pop[i].descended) todo.push_back(static_cast<int>(i));
      descend(pop, todo, j + 1);
      sort_agents(pop);
    }
    ++j;
    res.stats.push_back(detail::stats_of(j, pop));

    if (f_bound && pop.front().f / *f_bound < cfg.c_bnd) {
      res.reason = Termination::bound;
      break;
    }
    const double worst_after = pop.back().f;
    if (std::isfinite(worst_before) && std::isfinite(worst_after) &&
        (worst_before - worst_after) / std::abs(worst_before) < cfg.eps_glob) {
      res.reason = Termination::relative_error;
      break;
    }
  }
  res.generations = j;
  res.population = pop;
  res.best = pop.front().gene;
  res.best_f = pop.front().f;
  return res;
}

}  // namespace momtopo
