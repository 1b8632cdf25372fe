#include <gtest/gtest.h>

#include "momtopo/config.hpp"

using namespace momtopo;
using nlohmann::json;

namespace {

std::vector<std::string> problems_of(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.problems();
  }
  return {};
}

bool mentions(const std::vector<std::string>& p, const std::string& key) {
  return std::any_of(p.begin(), p.end(), [&](const std::string& s) { return s.rfind(key, 0) == 0; });
}

}  // namespace

TEST(Config, DefaultsMatchTheStandardRun) {
  const auto rc = parse_config(json::object());
  EXPECT_EQ(rc.memetic.n_agents, 10);
  EXPECT_EQ(rc.memetic.p_c, 1.0);
  EXPECT_EQ(rc.memetic.p_m, 1.0);
  EXPECT_TRUE(rc.memetic.removals);
  EXPECT_TRUE(rc.memetic.additions);
  EXPECT_TRUE(rc.bound_auto);
  ASSERT_EQ(rc.objective.terms.size(), 2u);
  EXPECT_EQ(rc.objective.terms[1].weight, 0.5);
}

TEST(Config, EveryKeyIsRead) {
  const json j = json::parse(R"({
    "i_max": 50, "eps_loc": 1e-6, "j_max": 7, "eps_glob": 1e-4, "n_agents": 6,
    "p_c": 0.8, "p_m": 0.5, "c_bnd": 1.4, "removals": true, "additions": false,
    "seed": 99, "threads": 2, "descent_scope": "offspring",
    "fixed_dofs": [3, 4], "gap_dof": 5, "eval_domain": [1, 2, 3], "bound": 36.3,
    "objective": [
      {"kind": "Q_untuned"},
      {"kind": "radiation_intensity", "weight": -0.1,
       "params": {"direction": [0, 0, 1], "polarization": [0, 1, 0]}},
      {"kind": "input_impedance_target", "params": {"z_target": [50, 0], "port": 5}},
      {"kind": "custom_quadratic", "params": {"matrix": "Xm", "denominator": "R0"}}
    ]})");
  const auto rc = parse_config(j);
  EXPECT_EQ(rc.memetic.i_max, 50);
  EXPECT_EQ(rc.memetic.j_max, 7);
  EXPECT_EQ(rc.memetic.n_agents, 6);
  EXPECT_EQ(rc.memetic.seed, 99u);
  EXPECT_FALSE(rc.memetic.additions);
  EXPECT_EQ(rc.memetic.descent_scope, DescentScope::offspring);
  EXPECT_EQ(rc.fixed_dofs, (DofList{3, 4}));
  EXPECT_EQ(*rc.gap_dof, 5);
  EXPECT_FALSE(rc.bound_auto);
  EXPECT_EQ(*rc.q_lb, 36.3);
  ASSERT_EQ(rc.objective.terms.size(), 4u);
  EXPECT_EQ(rc.objective.terms[1].polarization, Vec3::UnitY());
  EXPECT_EQ(rc.objective.terms[2].z_target, cplx(50.0, 0.0));
  EXPECT_EQ(*rc.objective.terms[3].denominator, OperatorName::R0);
}

TEST(Config, AllBadKeysAreReportedTogether) {
  const json j = json::parse(R"({
    "n_agents": 1, "p_c": "high", "colour": "red", "descent_scope": "everyone",
    "bound": -2, "objective": [{"kind": "Q_magic"}, {"kind": "custom_quadratic", "params": {"matrix": "Q"}}]})");
  const auto p = problems_of(j);
  EXPECT_TRUE(mentions(p, "n_agents"));
  EXPECT_TRUE(mentions(p, "p_c"));
  EXPECT_TRUE(mentions(p, "colour"));
  EXPECT_TRUE(mentions(p, "descent_scope"));
  EXPECT_TRUE(mentions(p, "bound"));
  EXPECT_TRUE(mentions(p, "objective[0].kind"));
  EXPECT_TRUE(mentions(p, "objective[1].params.matrix"));
}

TEST(Config, RangeChecksAgainstOperatorSet) {
  const auto rc = parse_config(json::parse(R"({"fixed_dofs": [0, 12], "gap_dof": -1, "eval_domain": [11]})"));
  try {
    check_config_against(rc, 12);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.problems().size(), 2u);
  }
  EXPECT_NO_THROW(check_config_against(parse_config(json::parse(R"({"fixed_dofs": [11]})")), 12));
}

TEST(Config, BoundModes) {
  EXPECT_TRUE(parse_config(json::parse(R"({"bound": "auto"})")).bound_auto);
  const auto none = parse_config(json::parse(R"({"bound": "none"})"));
  EXPECT_FALSE(none.bound_auto);
  EXPECT_FALSE(none.q_lb.has_value());
}

TEST(Config, UnreadableFilesAreIoErrors) {
  EXPECT_THROW(load_config("/nonexistent/momtopo.json"), IoError);
  EXPECT_THROW(parse_config(json::array()), ConfigError);
}
