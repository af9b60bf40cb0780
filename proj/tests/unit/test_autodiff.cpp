#include <gtest/gtest.h>

#include <functional>
#include <string>

#include "hicd/correlation.hpp"
#include "hicd/distillation.hpp"
#include "hicd/error.hpp"
#include "hicd/gradcheck.hpp"
#include "hicd/ops.hpp"
#include "testing.hpp"

namespace hicd {
namespace {

using testing::kink_free_tensor;
using testing::random_tensor;
using testing::to_vector;

TEST(Tensor, RejectsMismatchedData) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
  EXPECT_THROW(Tensor({0, 3}, {}), DimensionError);
}

TEST(Tensor, ItemRequiresScalar) {
  EXPECT_THROW(Tensor::zeros({2}).item(), ContractViolation);
  EXPECT_DOUBLE_EQ(Tensor::scalar(4.5).item(), 4.5);
}

TEST(Tensor, OpResultsAreImmutable) {
  Tensor a = Tensor::full({2}, 1.0, true);
  Tensor b = add(a, a);
  EXPECT_THROW(b.mutable_values(), StateError);
  EXPECT_NO_THROW(a.mutable_values());
}

TEST(Ops, MatmulOfOnes) {
  const Tensor c = matmul(Tensor::full({2, 3}, 1.0), Tensor::full({3, 2}, 1.0));
  EXPECT_EQ(c.shape(), (Shape{2, 2}));
  for (double v : c.values()) EXPECT_DOUBLE_EQ(v, 3.0);
}

TEST(Ops, Relu) {
  EXPECT_EQ(to_vector(relu(Tensor({3}, {-1.0, 0.0, 2.0}))), (std::vector<double>{0.0, 0.0, 2.0}));
}

TEST(Ops, ReluGradientAtZeroIsZero) {
  Tensor x({3}, {-1.0, 0.0, 2.0}, true);
  backward(sum(relu(x)));
  EXPECT_EQ(to_vector(Tensor({3}, {x.grad().begin(), x.grad().end()})), (std::vector<double>{0.0, 0.0, 1.0}));
}

TEST(Ops, ConvWithNormalizedKernelKeepsConstantImage) {
  const Tensor img = Tensor::full({5, 5, 1}, 0.37);
  std::vector<double> k(9, 1.0 / 9.0);
  const Tensor out = conv2d(img, Tensor({3, 3, 1, 1}, k), {1, 1, PadMode::reflect});
  EXPECT_EQ(out.shape(), (Shape{5, 5, 1}));
  for (double v : out.values()) EXPECT_NEAR(v, 0.37, 1e-15);
}

TEST(Ops, ShapeErrorsNameTheOperation) {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("matmul"), std::string::npos);
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos) << msg;
  }
  EXPECT_THROW(add(Tensor::zeros({2, 3}), Tensor::zeros({3, 2})), DimensionError);
  EXPECT_THROW(conv2d(Tensor::zeros({4, 4, 2}), Tensor::zeros({3, 3, 3, 1})), DimensionError);
  EXPECT_THROW(concat({Tensor::zeros({2, 3}), Tensor::zeros({2, 4})}, 0), DimensionError);
  EXPECT_THROW(reshape(Tensor::zeros({2, 3}), {4}), DimensionError);
}

TEST(Ops, BatchnormRequiresPositiveEps) {
  const Tensor x = Tensor::full({2, 3}, 1.0);
  EXPECT_THROW(batchnorm_lite(x, Tensor::full({3}, 1.0), Tensor::zeros({3}), 0.0), ParameterError);
}

TEST(Ops, TransposedConvIsAdjointOfConv) {
  // <conv(x), y> == <x, conv^T(y)> for matching geometry.
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor({1, 8, 8, 2}, rng);
  const Tensor k = random_tensor({4, 4, 2, 3}, rng);
  const Tensor y = random_tensor({1, 4, 4, 3}, rng);
  const Tensor cx = conv2d(x, k, {2, 1, PadMode::zeros});
  // transposed_conv2d wants [kh, kw, out, in] = [4, 4, 2, 3]: the same memory layout.
  const Tensor ty = transposed_conv2d(y, k, 2, 1);
  ASSERT_EQ(ty.shape(), x.shape());
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < cx.numel(); ++i) lhs += cx.at(i) * y.at(i);
  for (std::size_t i = 0; i < x.numel(); ++i) rhs += x.at(i) * ty.at(i);
  EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::abs(lhs)));
}

TEST(Backward, SumGivesOnes) {
  std::mt19937_64 rng(1);
  Tensor x = random_tensor({2, 3, 4}, rng, -1, 1, true);
  backward(sum(x));
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, SquareGivesTwiceInput) {
  Tensor x({3}, {1.0, 2.0, 3.0}, true);
  backward(sum(mul(x, x)));
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{2.0, 4.0, 6.0}));
}

TEST(Backward, NonScalarLossIsContractViolation) {
  Tensor x = Tensor::full({2}, 1.0, true);
  EXPECT_THROW(backward(mul_scalar(x, 2.0)), ContractViolation);
}

TEST(Backward, EmptyTapeIsContractViolation) {
  EXPECT_THROW(backward(Tensor::scalar(1.0)), ContractViolation);
}

TEST(Backward, LeafGradientsAccumulateAcrossCalls) {
  Tensor x({2}, {1.0, -2.0}, true);
  backward(sum(mul_scalar(x, 3.0)));
  backward(sum(mul_scalar(x, 3.0)));
  for (double g : x.grad()) EXPECT_EQ(g, 6.0);
}

TEST(Backward, LossOnStudentFeaturesMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  Tensor s = random_tensor({2, 2, 3}, rng, -1, 1, true);
  const Tensor t = random_tensor({2, 2, 3}, rng);
  const auto report = gradcheck([&] { return loss_self(FeatureMap(s), FeatureMap(t)); }, {s});
  EXPECT_TRUE(report.passed) << report.max_rel_error;
  EXPECT_LT(report.max_rel_error, 1e-4);
}

TEST(Tape, InputsPrecedeConsumersAndEachNodeRunsOnce) {
  std::mt19937_64 rng(2);
  Tensor a = random_tensor({3, 3}, rng, -1, 1, true);
  Tensor b = random_tensor({3, 3}, rng, -1, 1, true);
  const Tensor shared = matmul(a, b);
  const Tensor loss = sum(add(mul(shared, shared), relu(shared)));
  auto tape = ComputationTape::record(loss);
  const auto records = tape.records();
  std::vector<std::size_t> seen;
  for (const auto& r : records) {
    for (auto in : r.input_ids) EXPECT_NE(std::find(seen.begin(), seen.end(), in), seen.end());
    EXPECT_EQ(std::find(seen.begin(), seen.end(), r.id), seen.end()) << "duplicate node";
    seen.push_back(r.id);
  }
  const std::size_t ops = static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const TapeRecord& r) { return r.op != "leaf"; }));
  EXPECT_EQ(tape.run_backward(), ops);
}

TEST(Tape, NoGradGuardSkipsRecording) {
  Tensor x = Tensor::full({2}, 1.0, true);
  NoGradGuard guard;
  const Tensor y = mul(x, x);
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(y.is_leaf());
}

TEST(Tape, DetachCutsHistory) {
  Tensor x = Tensor::full({2}, 2.0, true);
  Tensor y = mul(x, x).detach();
  EXPECT_FALSE(y.requires_grad());
  EXPECT_EQ(y.at(0), 4.0);
}

// --- properties ---------------------------------------------------------------

struct OpCase {
  std::string name;
  std::vector<Shape> inputs;
  std::function<Tensor(const std::vector<Tensor>&)> f;
  bool positive = false;  // draw inputs in (0.5, 2)
};

std::vector<OpCase> differentiable_ops() {
  auto scalarize = [](const Tensor& t) {
    // Weighted sum so that every output element has a distinct cotangent.
    std::vector<double> w(t.numel());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.1 * static_cast<double>(i % 7);
    return sum(mul(t, Tensor(t.shape(), w)));
  };
  return {
      {"matmul", {{2, 3}, {3, 4}}, [=](auto& x) { return scalarize(matmul(x[0], x[1])); }},
      {"conv2d", {{1, 5, 5, 2}, {3, 3, 2, 3}}, [=](auto& x) { return scalarize(conv2d(x[0], x[1], {1, 1})); }},
      {"conv2d_stride2", {{2, 6, 6, 2}, {3, 3, 2, 2}}, [=](auto& x) { return scalarize(conv2d(x[0], x[1], {2, 1})); }},
      {"conv2d_reflect",
       {{1, 4, 4, 1}, {3, 3, 1, 2}},
       [=](auto& x) { return scalarize(conv2d(x[0], x[1], {1, 1, PadMode::reflect})); }},
      {"conv2d_pointwise", {{1, 3, 3, 3}, {1, 1, 3, 2}}, [=](auto& x) { return scalarize(conv2d(x[0], x[1])); }},
      {"transposed_conv2d",
       {{1, 3, 3, 2}, {4, 4, 3, 2}},
       [=](auto& x) { return scalarize(transposed_conv2d(x[0], x[1], 2, 1)); }},
      {"relu", {{3, 4}}, [=](auto& x) { return scalarize(relu(x[0])); }},
      {"add_broadcast", {{2, 3}, {3}}, [=](auto& x) { return scalarize(add(x[0], x[1])); }},
      {"sub", {{2, 3}, {2, 3}}, [=](auto& x) { return scalarize(sub(x[0], x[1])); }},
      {"mul_scalar", {{4}}, [=](auto& x) { return scalarize(mul_scalar(x[0], -1.7)); }},
      {"mul_broadcast", {{2, 3}, {2, 1}}, [=](auto& x) { return scalarize(mul(x[0], x[1])); }},
      {"div", {{2, 3}, {2, 3}}, [=](auto& x) { return scalarize(div(x[0], x[1])); }, true},
      {"sqrt", {{5}}, [=](auto& x) { return scalarize(sqrt(x[0])); }, true},
      {"power", {{5}}, [=](auto& x) { return scalarize(power(x[0], 2.5)); }, true},
      {"sum_axis", {{2, 3, 2}}, [=](auto& x) { return scalarize(sum(x[0], 1)); }},
      {"mean", {{3, 3}}, [=](auto& x) { return mean(x[0]); }},
      {"concat", {{2, 2}, {2, 3}}, [=](auto& x) { return scalarize(concat({x[0], x[1]}, 1)); }},
      {"reshape", {{2, 6}}, [=](auto& x) { return scalarize(reshape(x[0], {3, 4})); }},
      {"transpose2d", {{2, 5}}, [=](auto& x) { return scalarize(transpose2d(x[0])); }},
      {"select", {{3, 2, 2}}, [=](auto& x) { return scalarize(select(x[0], 1)); }},
      {"stack", {{2, 2}, {2, 2}}, [=](auto& x) { return scalarize(stack({x[0], x[1]})); }},
      {"upsample_bilinear", {{1, 3, 3, 2}}, [=](auto& x) { return scalarize(upsample_bilinear(x[0], 6, 5)); }},
      {"upsample_bicubic", {{1, 3, 4, 1}}, [=](auto& x) { return scalarize(upsample_bicubic(x[0], 7, 8)); }},
      {"batchnorm_lite",
       {{2, 3, 3, 2}, {2}, {2}},
       [=](auto& x) { return scalarize(batchnorm_lite(x[0], x[1], x[2], 1e-5)); }},
      {"cross_entropy",
       {{2, 3, 2}},
       [=](auto& x) {
         const std::vector<std::uint8_t> t{0, 1, 1, 0, 1, 0};
         return cross_entropy(x[0], t);
       }},
      {"normalize_rows", {{4, 3}}, [=](auto& x) { return scalarize(normalize_rows(x[0])); }},
  };
}

TEST(AutodiffProperty, EveryOpMatchesCentralDifferencesOn100Inputs) {
  for (const auto& op : differentiable_ops()) {
    std::mt19937_64 rng(std::hash<std::string>{}(op.name));
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<Tensor> inputs;
      for (const auto& s : op.inputs) {
        inputs.push_back(op.positive ? random_tensor(s, rng, 0.5, 2.0, true) : kink_free_tensor(s, rng));
      }
      const auto report = gradcheck([&] { return op.f(inputs); }, inputs);
      ASSERT_TRUE(report.passed) << op.name << " trial " << trial << " max rel " << report.max_rel_error;
      worst = std::max(worst, report.max_rel_error);
    }
    EXPECT_LT(worst, 1e-4) << op.name;
  }
}

TEST(AutodiffProperty, LeafUsedKTimesAccumulatesKFold) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 1 + trial % 5;
    Tensor x = random_tensor({3, 2}, rng, -1, 1, true);
    const Tensor w = random_tensor({3, 2}, rng);
    backward(sum(mul(x, w)));
    const auto single = to_vector(Tensor({6}, {x.grad().begin(), x.grad().end()}));
    x.zero_grad();
    Tensor acc = mul(x, w);
    for (std::size_t i = 1; i < k; ++i) acc = add(acc, mul(x, w));
    backward(sum(acc));
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(x.grad()[i], static_cast<double>(k) * single[i], 1e-12);
  }
}

TEST(AutodiffProperty, ReshapeRoundTripIsIdentity) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor x = random_tensor({2, 3, 4}, rng, -1, 1, true);
    const Tensor w = random_tensor({2, 3, 4}, rng);
    const Tensor y = reshape(reshape(x, {6, 4}), {2, 3, 4});
    EXPECT_EQ(to_vector(y), to_vector(x));
    backward(sum(mul(y, w)));
    for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(x.grad()[i], w.at(i));
  }
}

TEST(AutodiffProperty, ForwardValuesStayFinite) {
  std::mt19937_64 rng(8);
  for (const auto& op : differentiable_ops()) {
    std::vector<Tensor> inputs;
    for (const auto& s : op.inputs) inputs.push_back(random_tensor(s, rng, 0.5, 2.0));
    for (double v : op.f(inputs).values()) EXPECT_TRUE(std::isfinite(v)) << op.name;
  }
}

TEST(Gradcheck, MeanIsExact) {
  std::mt19937_64 rng(4);
  const auto report = gradcheck([](const Tensor& x) { return mean(x); }, random_tensor({3, 4}, rng), 1e-5, 1e-4);
  EXPECT_TRUE(report.passed);
  EXPECT_LT(report.max_rel_error, 1e-8);
}

TEST(Gradcheck, CrossLossThroughNormalization) {
  std::mt19937_64 rng(9);
  Tensor s1 = random_tensor({1, 4, 2}, rng, -1, 1, true), s2 = random_tensor({1, 4, 2}, rng, -1, 1, true);
  const Tensor t1 = random_tensor({1, 4, 2}, rng), t2 = random_tensor({1, 4, 2}, rng);
  const auto report = gradcheck(
      [&] { return loss_cross(FeatureMap(s1), FeatureMap(s2), FeatureMap(t1), FeatureMap(t2)); }, {s1, s2});
  EXPECT_TRUE(report.passed) << report.max_rel_error;
}

TEST(Gradcheck, ReluKinkIsExcludedNotFailed) {
  const auto report =
      gradcheck([](const Tensor& x) { return sum(relu(x)); }, Tensor({3}, {0.0, 0.5, -0.5}), 1e-5, 1e-4);
  EXPECT_TRUE(report.passed);
  EXPECT_EQ(report.excluded, 1u);
  EXPECT_EQ(report.failed, 0u);
  EXPECT_TRUE(report.entries[0].excluded);
}

TEST(Gradcheck, NonFiniteValueIsEvaluationError) {
  EXPECT_THROW(gradcheck([](const Tensor& x) { return sum(sqrt(x)); }, Tensor({2}, {-1.0, 1.0}), 1e-5, 1e-4),
               EvaluationError);
}

TEST(Gradcheck, DetectsAWrongGradient) {
  // An op whose backward is deliberately off by a factor of two.
  auto bad = [](const Tensor& x) {
    std::vector<double> v(x.values().begin(), x.values().end());
    for (auto& e : v) e *= 3.0;
    const Tensor y = Tensor::from_op("bad", x.shape(), std::move(v), {x}, [](auto g, InputGrads& grads) {
      for (std::size_t i = 0; i < g.size(); ++i) grads[0][i] += 6.0 * g[i];
    });
    return sum(y);
  };
  const auto report = gradcheck(bad, Tensor({2}, {0.3, 0.7}), 1e-5, 1e-4);
  EXPECT_FALSE(report.passed);
  EXPECT_EQ(report.failed, 2u);
}

}  // namespace
}  // namespace hicd
