#include <gtest/gtest.h>

#include <set>

#include "hicd/checks.hpp"
#include "hicd/error.hpp"
#include "hicd/gradcheck.hpp"
#include "hicd/network.hpp"
#include "hicd/ops.hpp"
#include "testing.hpp"

namespace hicd {
namespace {

using testing::random_tensor;
using testing::to_vector;

ChangeDetector make_model(const ModelConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ChangeDetector(cfg, rng);
}

Tensor& param(std::vector<NamedTensor>& params, const std::string& name) {
  for (auto& [n, t] : params)
    if (n == name) return t;
  throw std::runtime_error("no parameter " + name);
}

TEST(ModelConfig, Validation) {
  EXPECT_NO_THROW(ModelConfig{}.validate());
  ModelConfig c;
  c.backbone_channels = {16, 32};
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.head_channels = {8, 0};
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.feature_dim = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  std::mt19937_64 rng(1);
  EXPECT_THROW(ChangeDetector(c, rng), ConfigError);
}

TEST(ModelConfig, JsonRoundTrip) {
  ModelConfig c;
  c.feature_dim = 12;
  c.backbone_channels = {4, 5, 6};
  EXPECT_EQ(nlohmann::json(c).get<ModelConfig>(), c);
}

TEST(Network, BackboneShapeAndDeterminism) {
  const ChangeDetector model = make_model(ModelConfig{}, 1);
  std::mt19937_64 rng(2);
  const Tensor img = random_tensor({1, 32, 32, 3}, rng, 0.0, 1.0);
  const Tensor f = model.backbone_forward(img, Mode::eval);
  EXPECT_EQ(f.shape(), (Shape{1, 8, 8, 64}));
  EXPECT_EQ(to_vector(f), to_vector(model.backbone_forward(img, Mode::eval)));
}

TEST(Network, BackboneRejectsBadInput) {
  const ChangeDetector model = make_model(tiny_model_config(), 1);
  std::mt19937_64 rng(3);
  EXPECT_THROW(model.backbone_forward(random_tensor({1, 10, 8, 3}, rng), Mode::eval), DimensionError);
  EXPECT_THROW(model.backbone_forward(random_tensor({1, 8, 8, 4}, rng), Mode::eval), DimensionError);
  EXPECT_THROW(model.backbone_forward(random_tensor({8, 8, 3}, rng), Mode::eval), DimensionError);
  EXPECT_THROW(model.forward(random_tensor({1, 8, 8, 3}, rng), random_tensor({1, 16, 8, 3}, rng), Mode::eval),
               DimensionError);
}

TEST(Network, BothTemporalBranchesShareParameters) {
  ChangeDetector model = make_model(tiny_model_config(), 4);
  std::mt19937_64 rng(5);
  const Tensor img = random_tensor({1, 8, 8, 3}, rng, 0.0, 1.0);
  const auto before = model.forward(img, img, Mode::eval);
  EXPECT_EQ(to_vector(before.f1), to_vector(before.f2));

  auto params = model.parameters();
  auto w = param(params, "backbone.0.conv.weight").mutable_values();
  for (auto& v : w) v *= 1.5;
  const auto after = model.forward(img, img, Mode::eval);
  EXPECT_EQ(to_vector(after.f1), to_vector(after.f2));
  EXPECT_NE(to_vector(after.f1), to_vector(before.f1));
}

TEST(Network, FuseShapeAndAsymmetry) {
  const ChangeDetector model = make_model(ModelConfig{}, 6);
  std::mt19937_64 rng(7);
  const Tensor a = random_tensor({1, 4, 4, 64}, rng), b = random_tensor({1, 4, 4, 64}, rng);
  const Tensor ab = model.fuse(a, b, Mode::eval);
  EXPECT_EQ(ab.shape(), (Shape{1, 4, 4, 32}));
  EXPECT_NE(to_vector(ab), to_vector(model.fuse(b, a, Mode::eval)));
  EXPECT_THROW(model.fuse(a, random_tensor({1, 4, 2, 64}, rng), Mode::eval), DimensionError);
}

TEST(Network, FuseOfZerosIsZero) {
  const ChangeDetector model = make_model(ModelConfig{}, 8);
  const Tensor z({1, 3, 3, 64}, std::vector<double>(9 * 64, 0.0));
  for (auto mode : {Mode::eval, Mode::train})
    for (double v : to_vector(model.fuse(z, z, mode))) EXPECT_EQ(v, 0.0);
}

TEST(Network, HeadShapeAndPrediction) {
  const ChangeDetector model = make_model(ModelConfig{}, 9);
  std::mt19937_64 rng(10);
  const ChangeMap out = model.predict_head(random_tensor({1, 8, 8, 32}, rng, 0.0, 1.0), Mode::eval);
  EXPECT_EQ(out.logits.shape(), (Shape{1, 32, 32, 2}));
  ASSERT_EQ(out.prediction.size(), 32u * 32u);
  const auto l = to_vector(out.logits);
  for (std::size_t p = 0; p < out.prediction.size(); ++p) {
    ASSERT_TRUE(std::isfinite(l[2 * p]) && std::isfinite(l[2 * p + 1]));
    EXPECT_EQ(out.prediction[p], l[2 * p + 1] > l[2 * p] ? 1 : 0);
  }
}

TEST(Network, ForwardExposesConsistentShapes) {
  const ModelConfig cfg = tiny_model_config();
  const ChangeDetector model = make_model(cfg, 11);
  std::mt19937_64 rng(12);
  const auto out =
      model.forward(random_tensor({2, 16, 12, 3}, rng, 0, 1), random_tensor({2, 16, 12, 3}, rng, 0, 1), Mode::train);
  EXPECT_EQ(out.f1.shape(), (Shape{2, 4, 3, cfg.feature_dim}));
  EXPECT_EQ(out.fc.shape(), (Shape{2, 4, 3, cfg.fusion_dim}));
  EXPECT_EQ(out.change.logits.shape(), (Shape{2, 16, 12, 2}));
  EXPECT_EQ(out.change.prediction.size(), 2u * 16u * 12u);
}

TEST(Network, ConstantImageGivesConstantInteriorFeatures) {
  const ChangeDetector model = make_model(ModelConfig{}, 13);
  const Tensor img({1, 32, 32, 3}, std::vector<double>(32 * 32 * 3, 0.4));
  const Tensor f = model.backbone_forward(img, Mode::eval);
  const auto v = to_vector(f);
  const std::size_t d = 64;
  // Padding reaches feature rows/cols 0, 1 and 7; the rest see only image content.
  const auto at = [&](std::size_t y, std::size_t x, std::size_t c) { return v[(y * 8 + x) * d + c]; };
  for (std::size_t y = 2; y < 7; ++y)
    for (std::size_t x = 2; x < 7; ++x)
      for (std::size_t c = 0; c < d; ++c) ASSERT_NEAR(at(y, x, c), at(2, 2, c), 1e-12);
}

TEST(Network, TeacherAndStudentHaveEqualParameterCounts) {
  const ChangeDetector teacher = make_model(ModelConfig{}, 1), student = make_model(ModelConfig{}, 2);
  EXPECT_EQ(teacher.parameter_count(), student.parameter_count());
  EXPECT_GT(teacher.parameter_count(), 0u);
}

TEST(Network, InitializationIsSeeded) {
  const auto a = make_model(tiny_model_config(), 3).state(), b = make_model(tiny_model_config(), 3).state();
  const auto c = make_model(tiny_model_config(), 4).state();
  for (const auto& [name, t] : a) EXPECT_EQ(to_vector(t), to_vector(b.at(name))) << name;
  EXPECT_NE(to_vector(a.at("backbone.0.conv.weight")), to_vector(c.at("backbone.0.conv.weight")));
  for (const auto& [name, t] : a)
    if (name.ends_with(".bias")) {
      for (double v : to_vector(t)) EXPECT_EQ(v, 0.0) << name;
    }
}

TEST(Network, TrainModeUpdatesRunningStatistics) {
  ChangeDetector model = make_model(tiny_model_config(), 14);
  std::mt19937_64 rng(15);
  const Tensor img = random_tensor({2, 8, 8, 3}, rng, 0, 1);
  const auto before = model.state();
  model.forward(img, img, Mode::eval);
  EXPECT_EQ(to_vector(model.state().at("backbone.0.bn.running_mean")),
            to_vector(before.at("backbone.0.bn.running_mean")));
  model.forward(img, img, Mode::train);
  EXPECT_NE(to_vector(model.state().at("backbone.0.bn.running_mean")),
            to_vector(before.at("backbone.0.bn.running_mean")));
}

TEST(Network, CloneIsDeep) {
  ChangeDetector model = make_model(tiny_model_config(), 16);
  const ChangeDetector copy = model.clone();
  const auto snapshot = copy.state();
  auto params = model.parameters();
  for (auto& v : param(params, "head.classifier.weight").mutable_values()) v += 1.0;
  std::mt19937_64 rng(17);
  const Tensor img = random_tensor({2, 8, 8, 3}, rng, 0, 1);
  model.forward(img, img, Mode::train);
  for (const auto& [name, t] : copy.state()) EXPECT_EQ(to_vector(t), to_vector(snapshot.at(name))) << name;
}

TEST(Network, StateRoundTrip) {
  const ChangeDetector a = make_model(tiny_model_config(), 18);
  ChangeDetector b = make_model(tiny_model_config(), 19);
  b.load_state(a.state());
  std::mt19937_64 rng(20);
  const Tensor x = random_tensor({1, 8, 8, 3}, rng, 0, 1), y = random_tensor({1, 8, 8, 3}, rng, 0, 1);
  EXPECT_EQ(to_vector(a.forward(x, y, Mode::eval).change.logits), to_vector(b.forward(x, y, Mode::eval).change.logits));

  auto missing = a.state();
  missing.erase("fusion.conv1.weight");
  EXPECT_THROW(b.load_state(missing), ParameterError);
  auto wrong = a.state();
  wrong["fusion.conv1.weight"] = Tensor({1}, {0.0});
  EXPECT_THROW(b.load_state(wrong), DimensionError);
}

TEST(Network, ParameterNamesAreUniqueAndStable) {
  const auto params = make_model(ModelConfig{}, 21).parameters();
  std::set<std::string> names;
  for (const auto& [n, t] : params) names.insert(n);
  EXPECT_EQ(names.size(), params.size());
  const auto again = make_model(ModelConfig{}, 22).parameters();
  for (std::size_t i = 0; i < params.size(); ++i) EXPECT_EQ(params[i].first, again[i].first);
}

TEST(Network, CrossEntropyGradcheckThroughFullModel) {
  ChangeDetector model = make_model(tiny_model_config(), 23);
  std::mt19937_64 rng(24);
  const Tensor x = random_tensor({1, 8, 8, 3}, rng, 0, 1), y = random_tensor({1, 8, 8, 3}, rng, 0, 1);
  std::vector<std::uint8_t> labels(64);
  for (auto& l : labels) l = static_cast<std::uint8_t>(rng() % 2);
  std::vector<Tensor> leaves;
  for (const auto& [n, t] : model.parameters()) leaves.push_back(t);
  GradcheckOptions opt;
  opt.tol = 1e-3;
  const auto report = gradcheck(
      [&] { return cross_entropy(model.forward(x, y, Mode::train).change.logits, labels); }, leaves, opt);
  EXPECT_TRUE(report.passed) << "max rel error " << report.max_rel_error << ", failed " << report.failed;
  EXPECT_GT(report.checked, 100u);
}

}  // namespace
}  // namespace hicd
