#include <gtest/gtest.h>

#include <fstream>

#include "helpers.hpp"
#include "unoranic/config.hpp"
#include "unoranic/errors.hpp"

using namespace unoranic;
using namespace unoranic::config;
using unoranic::fixtures::TempDir;

TEST(ConfigJson, TrainConfigRoundTrip) {
  train::TrainConfig c;
  c.arch.latent_dim = 32;
  c.weights = {0.5, 0.001};
  c.policy.identity_probability = 0.25;
  c.policy.kinds = {augment::CorruptionKind::gamma, augment::CorruptionKind::solarize};
  c.recon_norm = loss::ReconNorm::mse;
  c.lri_input = train::LriInput::clean;
  c.seed = 0xFFFFFFFFFFFFULL;
  const auto j = to_json(c);
  const auto back = train_config_from_json(j);
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(back.arch, c.arch);
  EXPECT_EQ(back.policy.kinds, c.policy.kinds);
  EXPECT_EQ(back.seed, c.seed);
}

TEST(ConfigJson, PartialOverlayKeepsDefaults) {
  const auto c = train_config_from_json(Json::parse(R"({"max_epochs": 7, "weights": {"consistency": 0.001}})"));
  EXPECT_EQ(c.max_epochs, 7);
  EXPECT_EQ(c.weights.consistency, 0.001);
  EXPECT_EQ(c.weights.reconstruction, 1.0);
  EXPECT_EQ(c.lr_cycle_steps, 2000);
  EXPECT_EQ(c.patience, 10);
}

TEST(ConfigJson, StrictKeysAndTypes) {
  EXPECT_THROW(train_config_from_json(Json::parse(R"({"max_epoch": 7})")), ConfigError);
  EXPECT_THROW(train_config_from_json(Json::parse(R"({"max_epochs": "7"})")), ConfigError);
  EXPECT_THROW(train_config_from_json(Json::parse(R"({"max_epochs": 7.5})")), ConfigError);
  EXPECT_THROW(train_config_from_json(Json::parse(R"({"batch_size": -1})")), ConfigError);
  EXPECT_THROW(train_config_from_json(Json::parse(R"({"consistency_in_graph": 1})")), ConfigError);
  EXPECT_THROW(train_config_from_json(Json::parse(R"({"weights": {"recon": 1}})")), ConfigError);
  EXPECT_THROW(train_config_from_json(Json::parse(R"({"arch": {"latent_dim": 0}})")), ConfigError);
  EXPECT_THROW(train_config_from_json(Json::parse(R"({"policy": {"kinds": ["fog"]}})")), ConfigError);
  EXPECT_THROW(train_config_from_json(Json::parse(R"({"model_kind": "vae"})")), ConfigError);
  EXPECT_THROW(train_config_from_json(Json::parse(R"([1, 2])")), ConfigError);
  EXPECT_THROW(train_config_from_json(Json::parse(R"({"patience": 0})")), ConfigError);
}

TEST(ConfigJson, PolicyAndSyntheticSpec) {
  const auto p = policy_from_json(Json::parse(R"({"severity_weights": [0, 0, 1, 0, 0]})"));
  EXPECT_EQ(p.kinds, augment::AugmentationPolicy::training_default().kinds);
  EXPECT_EQ(p.severity_weights[2], 1.0);
  EXPECT_THROW(policy_from_json(Json::parse(R"({"severity_weights": [1, 1]})")), ConfigError);
  EXPECT_THROW(policy_from_json(Json::parse(R"({"kinds": []})")), ConfigError);

  data::SyntheticSpec s;
  s.train_count = 12;
  s.channels = 3;
  const auto back = synthetic_spec_from_json(to_json(s));
  EXPECT_EQ(to_json(back), to_json(s));
  EXPECT_THROW(synthetic_spec_from_json(Json::parse(R"({"image_side": 2})")), ConfigError);
}

TEST(ConfigJson, Files) {
  TempDir dir("cfg");
  const auto j = to_json(train::TrainConfig{});
  write_json_file(dir / "a.json", j);
  EXPECT_EQ(read_json_file(dir / "a.json"), j);
  std::ifstream in(dir / "a.json");
  std::string text((std::istreambuf_iterator<char>(in)), {});
  EXPECT_EQ(text.back(), '\n');
  std::ofstream(dir / "bad.json") << "{ \"a\": ";
  try {
    read_json_file(dir / "bad.json");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.json"), std::string::npos);
  }
  EXPECT_THROW(read_json_file(dir / "none.json"), ConfigError);
}
