#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "ldcluster/config.hpp"
#include "ldcluster/errors.hpp"

using namespace ldcluster;
using nlohmann::json;

TEST(Config, DefaultsValidate) {
  const ExperimentConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_TRUE(c.noise_spec().is_gaussian());
  EXPECT_EQ(c.sampler.n_ladder, (std::vector<int>{500, 1000, 2000, 4000}));
}

TEST(Config, JsonRoundTrip) {
  const json j = {{"model", {{"alpha", 0.7}, {"epsilon", 0.3}, {"coefficients", "unit_start"}}},
                  {"noise", {{"family", "matched"}, {"sigma_Z2", 2.0}, {"knob", 0.5}}},
                  {"sampler", {{"n_ladder", {100, 200}}, {"in_event_target", 10}}},
                  {"fbm", {{"dt", 0.125}}},
                  {"run", {{"seed", 5}, {"threads", 3}}}};
  const ExperimentConfig c = config_from_json(j);
  EXPECT_EQ(c.alpha, 0.7);
  EXPECT_EQ(c.coefficients, CoefficientFamily::unit_start);
  EXPECT_EQ(c.noise.family, "matched");
  EXPECT_NEAR(c.noise_spec().sigma_Z2(), 2.0, 1e-12);
  EXPECT_EQ(c.run.threads, 3);
  const ExperimentConfig back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
}

TEST(Config, MixtureVarianceFromComponents) {
  const json j = {{"noise",
                   {{"family", "symmetric_gaussian_mixture"},
                    {"components", {{{"w", 0.5}, {"mu", 0.0}, {"s", 1.0}}, {{"w", 0.5}, {"mu", 1.0}, {"s", 1.0}}}}}}};
  const ExperimentConfig c = config_from_json(j);
  EXPECT_NEAR(c.noise.sigma_Z2, 1.5, 1e-15);
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(config_from_json(json{{"model", {{"alpah", 0.7}}}}), ValidationError);
  EXPECT_THROW(config_from_json(json{{"extra", 1}}), ValidationError);
  EXPECT_THROW(config_from_json(json{{"model", {{"alpha", 1.5}}}}), ValidationError);
  EXPECT_THROW(config_from_json(json{{"model", {{"alpha", "x"}}}}), ValidationError);
  EXPECT_THROW(config_from_json(json{{"sampler", {{"jmax_factor", 0}}}}), ConfigurationError);
  EXPECT_THROW(config_from_json(json{{"noise", {{"family", "cauchy"}}}}), ValidationError);
  EXPECT_THROW(config_from_json(json{{"noise", {{"family", "matched"}, {"kappa", 6}}}}), InfeasibleError);
  EXPECT_THROW(load_config("/nonexistent.json"), IoError);
}

TEST(Config, LoadFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "ldcluster_test_config.json";
  std::ofstream(path) << R"({"model": {"epsilon": 0.7}})";
  EXPECT_EQ(load_config(path.string()).epsilon, 0.7);
  std::ofstream(path) << "{not json";
  EXPECT_THROW(load_config(path.string()), ValidationError);
  std::filesystem::remove(path);
}

TEST(Config, AlphaErrorNamesTheInterval) {
  try {
    config_from_json(json{{"model", {{"alpha", 0.4}}}});
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("(1/2, 1)"), std::string::npos) << e.what();
    EXPECT_EQ(e.module(), "params");
  }
}
