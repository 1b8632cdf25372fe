#pragma once

// JSON run configuration for the memetic optimizer. Validation collects every
// offending key before failing.

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "momtopo/core.hpp"
#include "momtopo/metrics.hpp"
#include "momtopo/optimizer.hpp"

namespace momtopo {

struct RunConfig {
  MemeticConfig memetic;
  ObjectiveSpec objective = ObjectiveSpec::tuned_q();
  DofList fixed_dofs;
  std::optional<DofIndex> gap_dof;
  // "auto": compute the bound on the evaluation domain; "none"; or a fixed value
  std::optional<double> q_lb;
  bool bound_auto = true;
};

namespace detail {

class ConfigReader {
 public:
  explicit ConfigReader(const nlohmann::json& j) : j_(j) {}

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      bad(std::string(key) + ": wrong type");
    }
  }

  void bad(std::string msg) { problems_.push_back(std::move(msg)); }
  std::vector<std::string>& problems() { return problems_; }
  const nlohmann::json& json() const { return j_; }
  void mark(const char* key) { seen_.insert(key); }

  void unknown_keys() {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) bad(it.key() + ": unknown key");
  }

 private:
  const nlohmann::json& j_;
  std::set<std::string> seen_;
  std::vector<std::string> problems_;
};

inline std::optional<Vec3> vec3_from(const nlohmann::json& v) {
  if (!v.is_array() || v.size() != 3) return std::nullopt;
  Vec3 out;
  for (int i = 0; i < 3; ++i) {
    if (!v[i].is_number()) return std::nullopt;
    out[i] = v[i].get<double>();
  }
  return out;
}

inline void parse_term(const nlohmann::json& t, std::size_t idx, ObjectiveTerm& term,
                       std::vector<std::string>& bad) {
  const std::string at = "objective[" + std::to_string(idx) + "]";
  if (!t.is_object()) {
    bad.push_back(at + ": must be an object");
    return;
  }
  for (auto it = t.begin(); it != t.end(); ++it)
    if (it.key() != "kind" && it.key() != "weight" && it.key() != "params") bad.push_back(at + "." + it.key() + ": unknown key");
  if (!t.contains("kind") || !t["kind"].is_string()) {
    bad.push_back(at + ".kind: required string");
  } else if (auto k = term_kind_from_string(t["kind"].get<std::string>())) {
    term.kind = *k;
  } else {
    bad.push_back(at + ".kind: unknown kind '" + t["kind"].get<std::string>() + "'");
  }
  if (t.contains("weight")) {
    if (t["weight"].is_number())
      term.weight = t["weight"].get<double>();
    else
      bad.push_back(at + ".weight: must be a number");
  }
  if (!t.contains("params")) return;
  const auto& p = t["params"];
  if (!p.is_object()) {
    bad.push_back(at + ".params: must be an object");
    return;
  }
  for (auto it = p.begin(); it != p.end(); ++it) {
    const std::string& key = it.key();
    const auto& v = it.value();
    if (key == "direction" || key == "polarization") {
      auto vec = vec3_from(v);
      if (!vec)
        bad.push_back(at + ".params." + key + ": must be a 3-vector");
      else
        (key == "direction" ? term.direction : term.polarization) = *vec;
    } else if (key == "z_target") {
      if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
        term.z_target = cplx(v[0].get<double>(), v[1].get<double>());
      else
        bad.push_back(at + ".params.z_target: must be [re, im]");
    } else if (key == "port") {
      if (v.is_number_integer())
        term.port = v.get<int>();
      else
        bad.push_back(at + ".params.port: must be an integer");
    } else if (key == "matrix" || key == "denominator") {
      auto o = v.is_string() ? operator_from_string(v.get<std::string>()) : std::nullopt;
      if (!o)
        bad.push_back(at + ".params." + key + ": must name one of W, R0, X0, Xm, Xe, Rrho, RL");
      else if (key == "matrix")
        term.matrix = *o;
      else
        term.denominator = *o;
    } else {
      bad.push_back(at + ".params." + key + ": unknown key");
    }
  }
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError({"configuration must be a JSON object"});
  RunConfig rc;
  detail::ConfigReader r(j);
  auto& m = rc.memetic;
  r.get("i_max", m.i_max);
  r.get("eps_loc", m.eps_loc);
  r.get("j_max", m.j_max);
  r.get("eps_glob", m.eps_glob);
  r.get("n_agents", m.n_agents);
  r.get("p_c", m.p_c);
  r.get("p_m", m.p_m);
  r.get("c_bnd", m.c_bnd);
  r.get("removals", m.removals);
  r.get("additions", m.additions);
  r.get("seed", m.seed);
  r.get("threads", m.threads);
  r.get("fixed_dofs", rc.fixed_dofs);
  r.get("eval_domain", rc.objective.eval_domain);

  r.mark("descent_scope");
  if (j.contains("descent_scope")) {
    const auto& v = j["descent_scope"];
    if (v == "survivors")
      m.descent_scope = DescentScope::survivors;
    else if (v == "offspring")
      m.descent_scope = DescentScope::offspring;
    else
      r.bad("descent_scope: must be \"survivors\" or \"offspring\"");
  }
  r.mark("gap_dof");
  if (j.contains("gap_dof")) {
    if (j["gap_dof"].is_number_integer())
      rc.gap_dof = j["gap_dof"].get<int>();
    else
      r.bad("gap_dof: must be an integer");
  }
  r.mark("bound");
  if (j.contains("bound")) {
    const auto& v = j["bound"];
    if (v == "auto") {
      rc.bound_auto = true;
    } else if (v == "none") {
      rc.bound_auto = false;
    } else if (v.is_number() && v.get<double>() > 0.0) {
      rc.bound_auto = false;
      rc.q_lb = v.get<double>();
    } else {
      r.bad("bound: must be \"auto\", \"none\" or a positive number");
    }
  }
  r.mark("objective");
  if (j.contains("objective")) {
    const auto& o = j["objective"];
    if (!o.is_array() || o.empty()) {
      r.bad("objective: must be a non-empty array of terms");
    } else {
      rc.objective.terms.clear();
      for (std::size_t i = 0; i < o.size(); ++i) {
        ObjectiveTerm t;
        detail::parse_term(o[i], i, t, r.problems());
        rc.objective.terms.push_back(t);
      }
    }
  }
  r.unknown_keys();

  auto& bad = r.problems();
  try {
    m.validate();
  } catch (const ConfigError& e) {
    bad.insert(bad.end(), e.problems().begin(), e.problems().end());
  }
  try {
    rc.objective.validate();
  } catch (const ConfigError& e) {
    bad.insert(bad.end(), e.problems().begin(), e.problems().end());
  }
  if (!bad.empty()) throw ConfigError(bad);
  return rc;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open configuration: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError({std::string("not valid JSON: ") + e.what()});
  }
  return parse_config(j);
}

/// Range checks that need the operator set.
inline void check_config_against(const RunConfig& rc, int n_dof) {
  std::vector<std::string> bad;
  for (int d : rc.fixed_dofs)
    if (d < 0 || d >= n_dof) bad.push_back("fixed_dofs: DOF " + std::to_string(d) + " out of range");
  for (int d : rc.objective.eval_domain)
    if (d < 0 || d >= n_dof) bad.push_back("eval_domain: DOF " + std::to_string(d) + " out of range");
  if (rc.gap_dof && (*rc.gap_dof < 0 || *rc.gap_dof >= n_dof)) bad.push_back("gap_dof: out of range");
  for (std::size_t i = 0; i < rc.objective.terms.size(); ++i) {
    const auto& t = rc.objective.terms[i];
    if (t.port && (*t.port < 0 || *t.port >= n_dof))
      bad.push_back("objective[" + std::to_string(i) + "].params.port: out of range");
  }
  if (!bad.empty()) throw ConfigError(bad);
}

}  // namespace momtopo
