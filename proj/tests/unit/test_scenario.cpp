#include <gtest/gtest.h>

#include <string>

#include "csbp/error.hpp"
#include "csbp/scenario.hpp"

using namespace csbp;

namespace {

ErrorCode code_of(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error for " << text;
  return ErrorCode::kDomain;
}

}  // namespace

TEST(Scenario, DefaultsFromEmptyDocument) {
  const auto c = parse_scenario("{}");
  EXPECT_EQ(c.branching.alpha, -1.0);
  EXPECT_EQ(c.branching.beta, 1.0);
  EXPECT_EQ(c.immigration.delta, 1.0);
  EXPECT_EQ(c.replicates, 100000u);
  EXPECT_EQ(c.seed, 20240601u);
  EXPECT_EQ(c.r_grid.size(), 3u);
  EXPECT_EQ(c.theta_grid.size(), 4u);
}

TEST(Scenario, NormalizedRoundTrip) {
  for (const char* name : {"quadratic_drift.json", "compound_exponential.json", "finite_atoms.json"}) {
    const auto c = load_scenario(std::string(CSBP_CONFIG_DIR) + "/" + name);
    const std::string once = normalized_json(c);
    const auto again = parse_scenario(once);
    EXPECT_EQ(normalized_json(again), once) << name;
    EXPECT_EQ(scenario_digest(again), scenario_digest(c)) << name;
    EXPECT_EQ(scenario_digest(c).size(), 16u);
  }
}

TEST(Scenario, DigestTracksContent) {
  auto a = parse_scenario("{}");
  auto b = parse_scenario(R"({"seed": 20240601})");
  EXPECT_EQ(scenario_digest(a), scenario_digest(b));
  b.seed = 1;
  EXPECT_NE(scenario_digest(a), scenario_digest(b));
}

TEST(Scenario, JumpFamilies) {
  const auto c = parse_scenario(R"({
    "branching": {"alpha": -1, "beta": 0.5,
                  "pi": {"family": "compound_exponential", "rate": 1, "decay": 2}},
    "immigration": {"delta": 0, "nu": {"family": "finite_atoms", "atoms": [{"location": 1, "mass": 1}]}}
  })");
  EXPECT_TRUE(std::holds_alternative<CompoundExponential>(c.branching.pi.family()));
  EXPECT_TRUE(std::holds_alternative<FiniteAtoms>(c.immigration.nu.family()));
}

TEST(Scenario, Rejections) {
  EXPECT_EQ(code_of(R"({"sede": 1})"), ErrorCode::kConfig);
  EXPECT_EQ(code_of(R"({"kernel": {"backend": "auto", "extra": 1}})"), ErrorCode::kConfig);
  EXPECT_EQ(code_of("{not json"), ErrorCode::kConfig);
  EXPECT_EQ(code_of(R"({"r_grid": [0.5, 1.5]})"), ErrorCode::kConfig);
  EXPECT_EQ(code_of(R"({"theta_grid": [-1]})"), ErrorCode::kConfig);
  EXPECT_EQ(code_of(R"({"r_grid": []})"), ErrorCode::kConfig);
  EXPECT_EQ(code_of(R"({"horizon": 0})"), ErrorCode::kConfig);
  EXPECT_EQ(code_of(R"({"x": -1})"), ErrorCode::kConfig);
  EXPECT_EQ(code_of(R"({"branching": {"pi": {"family": "stable"}}})"), ErrorCode::kConfig);
  EXPECT_EQ(code_of(R"({"branching": {"alpha": 1, "beta": 1}})"), ErrorCode::kNotSupercritical);
  EXPECT_THROW(load_scenario("/nonexistent/scenario.json"), Error);
}

TEST(Scenario, ModelFollowsConfig) {
  const auto c = load_scenario(std::string(CSBP_CONFIG_DIR) + "/quadratic_drift.json");
  const ScenarioModel m(c);
  EXPECT_NEAR(m.solver().lambda_star(), 1.0, 1e-14);
  EXPECT_EQ(m.kernel().backend(), KernelBackend::kQuadraticExact);
  EXPECT_EQ(m.simulator().horizon(), c.horizon);
}
