#include "hicd/checks.hpp"

#include <random>

#include "hicd/distillation.hpp"
#include "hicd/ops.hpp"

namespace hicd {

ModelConfig tiny_model_config() {
  ModelConfig c;
  c.backbone_channels = {2, 3, 3};
  c.feature_dim = 3;
  c.fusion_dim = 3;
  c.head_channels = {2, 2};
  return c;
}

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v), true);
}

}  // namespace

std::vector<NamedGradcheck> loss_gradchecks(std::uint64_t seed, double tol) {
  std::mt19937_64 rng(seed);
  GradcheckOptions opt;
  opt.tol = tol;
  const Shape fs{2, 2, 3};
  const Tensor s1 = random_tensor(fs, rng), s2 = random_tensor(fs, rng), sc = random_tensor(fs, rng);
  const Tensor t1 = random_tensor(fs, rng).detach(), t2 = random_tensor(fs, rng).detach();
  const Tensor tc = random_tensor(fs, rng).detach();
  const Tensor bank = random_tensor({4, 3}, rng).detach();
  auto fm = [](const Tensor& t) { return FeatureMap(t); };

  std::vector<NamedGradcheck> out;
  out.push_back({"loss_s1", gradcheck([&] { return loss_self(fm(s1), fm(t1)); }, {s1}, opt)});
  out.push_back({"loss_s2", gradcheck([&] { return loss_self(fm(s2), fm(t2)); }, {s2}, opt)});
  out.push_back({"loss_c", gradcheck([&] { return loss_cross(fm(s1), fm(s2), fm(t1), fm(t2)); }, {s1, s2}, opt)});
  out.push_back(
      {"loss_g", gradcheck([&] { return loss_global(fm(s1), fm(s2), fm(t1), fm(t2), bank); }, {s1, s2}, opt)});
  out.push_back({"loss_cfd", gradcheck([&] { return loss_cfd(fm(sc), fm(tc)); }, {sc}, opt)});

  const ModelConfig cfg = tiny_model_config();
  std::mt19937_64 init(seed + 1);
  ChangeDetector student(cfg, init);
  ChangeDetector teacher(cfg, init);
  teacher.set_requires_grad(false);
  const Tensor i1 = random_tensor({1, 8, 8, 3}, rng).detach();
  const Tensor i2 = random_tensor({1, 8, 8, 3}, rng).detach();
  std::vector<std::uint8_t> labels(64);
  for (auto& l : labels) l = static_cast<std::uint8_t>(rng() & 1U);
  ModelOutput t_out;
  {
    NoGradGuard no_grad;
    t_out = teacher.forward(i1, i2, Mode::eval);
  }
  const LossWeights w;
  auto total = [&] {
    const ModelOutput s_out = student.forward(i1, i2, Mode::train);
    const DistillLosses d =
        distillation_losses({s_out.f1, s_out.f2, s_out.fc}, {t_out.f1, t_out.f2, t_out.fc}, bank, w);
    return loss_total(cross_entropy(s_out.change.logits, labels), d.sfd, d.cfd, w);
  };
  std::vector<Tensor> leaves;
  for (const auto& [name, p] : student.parameters()) leaves.push_back(p);
  out.push_back({"total_through_network", gradcheck(total, leaves, opt)});
  return out;
}

}  // namespace hicd
