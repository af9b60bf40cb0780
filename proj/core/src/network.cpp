#include "hicd/network.hpp"

#include <cmath>

#include "hicd/error.hpp"

namespace hicd {

void ModelConfig::validate() const {
  if (input_channels == 0) throw ConfigError("model: input_channels must be positive");
  if (backbone_channels.size() != 3) throw ConfigError("model: backbone_channels needs exactly 3 stages");
  if (head_channels.size() != 2) throw ConfigError("model: head_channels needs exactly 2 entries");
  for (auto c : backbone_channels)
    if (c == 0) throw ConfigError("model: zero backbone width");
  for (auto c : head_channels)
    if (c == 0) throw ConfigError("model: zero head width");
  if (feature_dim == 0 || fusion_dim == 0) throw ConfigError("model: feature and fusion dims must be positive");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"input_channels", c.input_channels},
                     {"backbone_channels", c.backbone_channels},
                     {"feature_dim", c.feature_dim},
                     {"fusion_dim", c.fusion_dim},
                     {"head_channels", c.head_channels}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.input_channels = j.value("input_channels", d.input_channels);
  c.backbone_channels = j.value("backbone_channels", d.backbone_channels);
  c.feature_dim = j.value("feature_dim", d.feature_dim);
  c.fusion_dim = j.value("fusion_dim", d.fusion_dim);
  c.head_channels = j.value("head_channels", d.head_channels);
  c.validate();
}

namespace {

Tensor kaiming(Shape shape, double fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v), true);
}

Tensor add_bias(const Tensor& x, const Tensor& bias) { return add(x, bias); }

}  // namespace

Conv2dLayer::Conv2dLayer(std::size_t kernel, std::size_t in, std::size_t out, std::size_t stride,
                         std::size_t padding, std::mt19937_64& rng)
    : weight(kaiming({kernel, kernel, in, out}, static_cast<double>(kernel * kernel * in), rng)),
      bias(Tensor::zeros({out}, true)),
      options{stride, padding, PadMode::zeros} {}

Tensor Conv2dLayer::forward(const Tensor& x) const { return add_bias(conv2d(x, weight, options), bias); }

TransposedConvLayer::TransposedConvLayer(std::size_t kernel, std::size_t in, std::size_t out, std::size_t stride_,
                                         std::size_t padding_, std::mt19937_64& rng)
    : weight(kaiming({kernel, kernel, out, in},
                     static_cast<double>(kernel * kernel * in) / static_cast<double>(stride_ * stride_), rng)),
      bias(Tensor::zeros({out}, true)),
      stride(stride_),
      padding(padding_) {}

Tensor TransposedConvLayer::forward(const Tensor& x) const {
  return add_bias(transposed_conv2d(x, weight, stride, padding), bias);
}

BatchNormLayer::BatchNormLayer(std::size_t channels)
    : gamma(Tensor::full({channels}, 1.0, true)),
      beta(Tensor::zeros({channels}, true)),
      running_mean(channels, 0.0),
      running_var(channels, 1.0) {}

Tensor BatchNormLayer::forward(const Tensor& x, Mode mode) const {
  if (mode == Mode::eval) return batchnorm_lite_eval(x, gamma, beta, running_mean, running_var, kEps);
  BatchNormStats stats;
  Tensor y = batchnorm_lite(x, gamma, beta, kEps, &stats);
  const double unbias =
      stats.count > 1 ? static_cast<double>(stats.count) / static_cast<double>(stats.count - 1) : 1.0;
  for (std::size_t c = 0; c < running_mean.size(); ++c) {
    running_mean[c] = kMomentum * running_mean[c] + (1.0 - kMomentum) * stats.mean[c];
    running_var[c] = kMomentum * running_var[c] + (1.0 - kMomentum) * stats.variance[c] * unbias;
  }
  return y;
}

ResidualBlock::ResidualBlock(std::size_t channels, std::mt19937_64& rng)
    : conv1(3, channels, channels, 1, 1, rng), conv2(3, channels, channels, 1, 1, rng), bn1(channels), bn2(channels) {}

Tensor ResidualBlock::forward(const Tensor& x, Mode mode) const {
  Tensor y = relu(bn1.forward(conv1.forward(x), mode));
  y = bn2.forward(conv2.forward(y), mode);
  return relu(add(x, y));
}

ChangeDetector::ChangeDetector(ModelConfig config, std::mt19937_64& rng) : config_(std::move(config)) {
  config_.validate();
  const std::size_t strides[3] = {2, 2, 1};
  std::size_t in = config_.input_channels;
  for (std::size_t i = 0; i < 3; ++i) {
    const std::size_t out = config_.backbone_channels[i];
    // The last stage emits linear (signed) features for the correlation losses.
    backbone_.push_back({Conv2dLayer(3, in, out, strides[i], 1, rng), BatchNormLayer(out), i + 1 < 3});
    in = out;
  }
  if (in != config_.feature_dim) {
    has_projection_ = true;
    projection_ = Conv2dLayer(1, in, config_.feature_dim, 1, 0, rng);
  }
  const std::size_t fd = config_.fusion_dim;
  fuse_conv1_ = Conv2dLayer(3, 2 * config_.feature_dim, fd, 1, 1, rng);
  fuse_bn_ = BatchNormLayer(fd);
  fuse_conv2_ = Conv2dLayer(3, fd, fd, 1, 1, rng);
  const std::size_t h0 = config_.head_channels[0], h1 = config_.head_channels[1];
  up1_ = TransposedConvLayer(4, fd, h0, 2, 1, rng);
  res1_ = ResidualBlock(h0, rng);
  up2_ = TransposedConvLayer(4, h0, h1, 2, 1, rng);
  res2_ = ResidualBlock(h1, rng);
  classifier_ = Conv2dLayer(1, h1, 2, 1, 0, rng);
}

Tensor ChangeDetector::backbone_forward(const Tensor& images, Mode mode) const {
  if (images.rank() != 4) throw DimensionError("backbone: expected [N, H, W, C], got " + shape_to_string(images.shape()));
  const std::size_t f = ModelConfig::downsample_factor;
  if (images.dim(1) % f != 0 || images.dim(2) % f != 0) {
    throw DimensionError("backbone: image extents " + std::to_string(images.dim(1)) + "x" +
                         std::to_string(images.dim(2)) + " are not divisible by " + std::to_string(f));
  }
  if (images.dim(3) != config_.input_channels) throw DimensionError("backbone: channel count mismatch");
  Tensor x = images;
  for (const auto& stage : backbone_) {
    x = stage.bn.forward(stage.conv.forward(x), mode);
    if (stage.relu) x = relu(x);
  }
  if (has_projection_) x = projection_.forward(x);
  return x;
}

Tensor ChangeDetector::fuse(const Tensor& f1, const Tensor& f2, Mode mode) const {
  if (f1.shape() != f2.shape()) {
    throw DimensionError("fuse: incompatible shapes " + shape_to_string(f1.shape()) + " and " +
                         shape_to_string(f2.shape()));
  }
  Tensor x = concat({f1, f2}, 3);
  x = relu(fuse_bn_.forward(fuse_conv1_.forward(x), mode));
  return relu(fuse_conv2_.forward(x));
}

ChangeMap ChangeDetector::predict_head(const Tensor& fc, Mode mode) const {
  Tensor x = res1_.forward(relu(up1_.forward(fc)), mode);
  x = res2_.forward(relu(up2_.forward(x)), mode);
  ChangeMap out;
  out.logits = classifier_.forward(x);
  out.prediction = argmax_last_axis(out.logits);
  return out;
}

ModelOutput ChangeDetector::forward(const Tensor& image1, const Tensor& image2, Mode mode) const {
  if (image1.shape() != image2.shape()) {
    throw DimensionError("forward: image shapes differ: " + shape_to_string(image1.shape()) + " vs " +
                         shape_to_string(image2.shape()));
  }
  ModelOutput out;
  out.f1 = backbone_forward(image1, mode);
  out.f2 = backbone_forward(image2, mode);
  out.fc = fuse(out.f1, out.f2, mode);
  out.change = predict_head(out.fc, mode);
  return out;
}

template <class Self, class Visitor>
void ChangeDetector::visit_parameters(Self& self, Visitor&& visit) {
  auto conv = [&](const std::string& name, auto& layer) {
    visit(name + ".weight", layer.weight);
    visit(name + ".bias", layer.bias);
  };
  auto bn = [&](const std::string& name, auto& layer) {
    visit(name + ".gamma", layer.gamma);
    visit(name + ".beta", layer.beta);
  };
  auto res = [&](const std::string& name, auto& block) {
    conv(name + ".conv1", block.conv1);
    bn(name + ".bn1", block.bn1);
    conv(name + ".conv2", block.conv2);
    bn(name + ".bn2", block.bn2);
  };
  for (std::size_t i = 0; i < self.backbone_.size(); ++i) {
    conv("backbone." + std::to_string(i) + ".conv", self.backbone_[i].conv);
    bn("backbone." + std::to_string(i) + ".bn", self.backbone_[i].bn);
  }
  if (self.has_projection_) conv("backbone.projection", self.projection_);
  conv("fusion.conv1", self.fuse_conv1_);
  bn("fusion.bn", self.fuse_bn_);
  conv("fusion.conv2", self.fuse_conv2_);
  conv("head.up1", self.up1_);
  res("head.res1", self.res1_);
  conv("head.up2", self.up2_);
  res("head.res2", self.res2_);
  conv("head.classifier", self.classifier_);
}

template <class Self, class Visitor>
void ChangeDetector::visit_batchnorms(Self& self, Visitor&& visit) {
  for (std::size_t i = 0; i < self.backbone_.size(); ++i) visit("backbone." + std::to_string(i) + ".bn", self.backbone_[i].bn);
  visit(std::string("fusion.bn"), self.fuse_bn_);
  visit(std::string("head.res1.bn1"), self.res1_.bn1);
  visit(std::string("head.res1.bn2"), self.res1_.bn2);
  visit(std::string("head.res2.bn1"), self.res2_.bn1);
  visit(std::string("head.res2.bn2"), self.res2_.bn2);
}

std::vector<NamedTensor> ChangeDetector::parameters() const {
  std::vector<NamedTensor> out;
  visit_parameters(*this, [&](const std::string& name, const Tensor& t) { out.emplace_back(name, t); });
  return out;
}

std::size_t ChangeDetector::parameter_count() const {
  std::size_t n = 0;
  visit_parameters(*this, [&](const std::string&, const Tensor& t) { n += t.numel(); });
  return n;
}

void ChangeDetector::set_requires_grad(bool flag) {
  visit_parameters(*this, [&](const std::string&, Tensor& t) {
    t.set_requires_grad(flag);
    t.zero_grad();
  });
}

std::map<std::string, Tensor> ChangeDetector::state() const {
  std::map<std::string, Tensor> out;
  visit_parameters(*this, [&](const std::string& name, const Tensor& t) { out.emplace(name, t.detach()); });
  visit_batchnorms(*this, [&](const std::string& name, const BatchNormLayer& layer) {
    const std::size_t c = layer.running_mean.size();
    out.emplace(name + ".running_mean", Tensor({c}, layer.running_mean));
    out.emplace(name + ".running_var", Tensor({c}, layer.running_var));
  });
  return out;
}

void ChangeDetector::load_state(const std::map<std::string, Tensor>& state) {
  auto fetch = [&](const std::string& name, const Shape& shape) -> const Tensor& {
    auto it = state.find(name);
    if (it == state.end()) throw ParameterError("checkpoint: missing tensor '" + name + "'");
    if (it->second.shape() != shape) {
      throw DimensionError("checkpoint: tensor '" + name + "' has shape " + shape_to_string(it->second.shape()) +
                           ", expected " + shape_to_string(shape));
    }
    return it->second;
  };
  visit_parameters(*this, [&](const std::string& name, Tensor& t) {
    const Tensor& src = fetch(name, t.shape());
    std::copy(src.values().begin(), src.values().end(), t.mutable_values().begin());
  });
  visit_batchnorms(*this, [&](const std::string& name, BatchNormLayer& layer) {
    const Shape shape{layer.running_mean.size()};
    const Tensor& mean = fetch(name + ".running_mean", shape);
    const Tensor& var = fetch(name + ".running_var", shape);
    layer.running_mean.assign(mean.values().begin(), mean.values().end());
    layer.running_var.assign(var.values().begin(), var.values().end());
  });
}

ChangeDetector ChangeDetector::clone() const {
  ChangeDetector copy(*this);
  visit_parameters(copy, [](const std::string&, Tensor& t) {
    t = Tensor(t.shape(), std::vector<double>(t.values().begin(), t.values().end()), t.requires_grad());
  });
  return copy;
}

}  // namespace hicd
