#pragma once

#include <cstddef>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hicd/ops.hpp"
#include "hicd/tensor.hpp"

namespace hicd {

struct ModelConfig {
  std::size_t input_channels = 3;
  std::vector<std::size_t> backbone_channels{16, 32, 64};
  std::size_t feature_dim = 64;
  std::size_t fusion_dim = 32;
  std::vector<std::size_t> head_channels{16, 8};
  static constexpr std::size_t downsample_factor = 4;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

enum class Mode { train, eval };

using NamedTensor = std::pair<std::string, Tensor>;

class Conv2dLayer {
 public:
  Conv2dLayer() = default;
  Conv2dLayer(std::size_t kernel, std::size_t in, std::size_t out, std::size_t stride, std::size_t padding,
              std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const;

  Tensor weight;  // [k, k, in, out]
  Tensor bias;    // [out]
  Conv2dOptions options;
};

class TransposedConvLayer {
 public:
  TransposedConvLayer() = default;
  TransposedConvLayer(std::size_t kernel, std::size_t in, std::size_t out, std::size_t stride, std::size_t padding,
                      std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const;

  Tensor weight;  // [k, k, out, in]
  Tensor bias;    // [out]
  std::size_t stride = 2;
  std::size_t padding = 1;
};

/// Per-batch statistics in training, running averages in eval.
class BatchNormLayer {
 public:
  static constexpr double kMomentum = 0.9;
  static constexpr double kEps = 1e-5;

  BatchNormLayer() = default;
  explicit BatchNormLayer(std::size_t channels);
  /// Training mode also folds the batch statistics into the running averages.
  Tensor forward(const Tensor& x, Mode mode) const;

  Tensor gamma;
  Tensor beta;
  // Running statistics are buffers, not parameters: mutated by training-mode forwards.
  mutable std::vector<double> running_mean;
  mutable std::vector<double> running_var;
};

class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(std::size_t channels, std::mt19937_64& rng);
  Tensor forward(const Tensor& x, Mode mode) const;

  Conv2dLayer conv1, conv2;
  BatchNormLayer bn1, bn2;
};

/// Per-pixel two-class change logits and their argmax.
struct ChangeMap {
  Tensor logits;                         // [N, H, W, 2]
  std::vector<std::uint8_t> prediction;  // N * H * W
};

struct ModelOutput {
  Tensor f1, f2;  // [N, H/4, W/4, feature_dim]
  Tensor fc;      // [N, H/4, W/4, fusion_dim]
  ChangeMap change;
};

/// Siamese change detector: shared conv backbone, two-conv fusion, and a
/// prediction head of two x2 deconvolutions with residual blocks.
class ChangeDetector {
 public:
  ChangeDetector(ModelConfig config, std::mt19937_64& init_rng);
  ChangeDetector(ChangeDetector&&) noexcept = default;
  ChangeDetector& operator=(ChangeDetector&&) noexcept = default;

  const ModelConfig& config() const { return config_; }

  Tensor backbone_forward(const Tensor& images, Mode mode) const;
  Tensor fuse(const Tensor& f1, const Tensor& f2, Mode mode) const;
  ChangeMap predict_head(const Tensor& fc, Mode mode) const;
  /// Both images go through the same backbone parameters.
  ModelOutput forward(const Tensor& image1, const Tensor& image2, Mode mode) const;

  /// Trainable tensors in a fixed order with stable names.
  std::vector<NamedTensor> parameters() const;
  std::size_t parameter_count() const;
  void set_requires_grad(bool flag);

  /// Parameters plus batch-norm running statistics.
  std::map<std::string, Tensor> state() const;
  void load_state(const std::map<std::string, Tensor>& state);
  /// Deep copy; the result shares no tensors with this model.
  ChangeDetector clone() const;

 private:
  // Copies share parameter tensors; only clone() may use this.
  ChangeDetector(const ChangeDetector&) = default;

  // visit(name, Tensor&) over every trainable tensor, in a fixed order.
  template <class Self, class Visitor>
  static void visit_parameters(Self& self, Visitor&& visit);
  template <class Self, class Visitor>
  static void visit_batchnorms(Self& self, Visitor&& visit);

  struct Stage {
    Conv2dLayer conv;
    BatchNormLayer bn;
    bool relu = true;
  };

  ModelConfig config_;
  std::vector<Stage> backbone_;
  Conv2dLayer projection_;  // 1x1, only when the last stage width differs from feature_dim
  bool has_projection_ = false;
  Conv2dLayer fuse_conv1_, fuse_conv2_;
  BatchNormLayer fuse_bn_;
  TransposedConvLayer up1_, up2_;
  ResidualBlock res1_, res2_;
  Conv2dLayer classifier_;
};

}  // namespace hicd
