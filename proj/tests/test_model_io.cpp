#include <gtest/gtest.h>

#include "af/model_io.hpp"
#include "test_util.hpp"

using namespace af;

namespace {

AfModel small_model(std::uint64_t seed, FeatureMode mode = FeatureMode::x_plus_preds) {
  AfConfig cfg;
  cfg.num_trees = 6;
  cfg.policy.min_leaf = 5;
  cfg.policy.depth_limit = 2;
  cfg.max_iterations = 2;
  cfg.search_configurations = false;
  cfg.feature_mode = mode;
  cfg.seed = seed;
  return train_af(test::random_dataset(160, 3, 3, seed), cfg);
}

}  // namespace

TEST(ModelIo, RoundTripPreservesPredictions) {
  for (auto mode : kAllFeatureModes) {
    const AfModel model = small_model(5, mode);
    test::TempFile file("", ".json");
    save_model(model, file.path());
    const AfModel back = load_model(file.path());
    EXPECT_EQ(back.config, model.config);
    EXPECT_EQ(back.weights.candidates, model.weights.candidates);
    Rng rng(1);
    for (int r = 0; r < 100; ++r) {
      std::vector<double> x(3);
      for (auto& v : x) v = rng.uniform();
      const auto a = predict_af(model, x), b = predict_af(back, x);
      EXPECT_EQ(a.label, b.label);
      EXPECT_EQ(a.distribution, b.distribution);
    }
  }
}

TEST(ModelIo, SerialisationIsDeterministic) {
  EXPECT_EQ(serialize_model(small_model(9)), serialize_model(small_model(9)));
  EXPECT_NE(serialize_model(small_model(9)), serialize_model(small_model(10)));
}

TEST(ModelIo, ReserialisingALoadedModelIsIdentity) {
  const std::string text = serialize_model(small_model(2));
  EXPECT_EQ(serialize_model(model_from_json(Json::parse(text))), text);
}

TEST(ModelIo, MalformedFilesAreUserErrors) {
  test::TempFile garbage("{not json", ".json");
  EXPECT_THROW(load_model(garbage.path()), Error);
  test::TempFile wrong_version(R"({"format_version": 99})", ".json");
  EXPECT_THROW(load_model(wrong_version.path()), Error);
  test::TempFile missing_parts(R"({"format_version": 1})", ".json");
  EXPECT_THROW(load_model(missing_parts.path()), Error);
  EXPECT_THROW(load_model("/nonexistent/model.json"), Error);
}

TEST(ConfigJson, RoundTripAndUnknownKey) {
  AfConfig cfg;
  cfg.reward = RewardVariant::kl;
  cfg.top_k = 3;
  cfg.policy.depth_limit = 4;
  AfConfig back;
  apply_config_json(config_to_json(cfg), back);
  EXPECT_EQ(back, cfg);
  AfConfig c;
  EXPECT_THROW(apply_config_json(Json::parse(R"({"rewrad": "kl"})"), c), Error);
  EXPECT_THROW(apply_config_json(Json::parse(R"({"reward": "nope"})"), c), Error);
  EXPECT_THROW(apply_config_json(Json::parse(R"([1, 2])"), c), Error);
}
