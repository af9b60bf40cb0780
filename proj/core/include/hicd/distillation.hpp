#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <string_view>

#include "hicd/correlation.hpp"
#include "hicd/tensor.hpp"

// Hierarchical correlation distillation losses. In every loss the teacher side
// is detached, so gradients only reach student features.
namespace hicd {

struct LossWeights {
  double s1 = 1.0;
  double s2 = 1.0;
  double c = 1.0;
  double g = 0.4;
  double sfd = 5.0;
  double cfd = 0.25;

  static LossWeights zeros() { return {0, 0, 0, 0, 0, 0}; }
  /// "s1,s2,c,g,sfd,cfd"
  static LossWeights parse_csv(std::string_view csv);
  std::string to_csv() const;
  void validate() const;
  bool any_distillation() const;

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);

/// Mean squared difference over all entries: 1 / (rows * cols) * sum (a - b)^2.
Tensor corr_mse(const Tensor& a, const Tensor& b);

/// Self-correlation mismatch (L_s1 for the t1 maps, L_s2 for the t2 maps).
Tensor loss_self(const FeatureMap& student, const FeatureMap& teacher);

/// Cross-correlation mismatch between the bi-temporal pairs.
Tensor loss_cross(const FeatureMap& student_f1, const FeatureMap& student_f2, const FeatureMap& teacher_f1,
                  const FeatureMap& teacher_f2);

/// Sum of the two global-correlation mismatches against a shared bank sample.
Tensor loss_global(const FeatureMap& student_f1, const FeatureMap& student_f2, const FeatureMap& teacher_f1,
                   const FeatureMap& teacher_f2, const Tensor& bank_rows);

/// Self-correlation mismatch of the fused change features.
Tensor loss_cfd(const FeatureMap& student_fc, const FeatureMap& teacher_fc);

/// Individual SFD components; undefined tensors are absent terms.
struct SfdTerms {
  Tensor s1, s2, c, g;
};

/// s1 * L_s1 + s2 * L_s2 + c * L_c + g * L_g over the defined terms.
Tensor loss_sfd(const SfdTerms& terms, const LossWeights& weights);

/// ce + sfd_weight * sfd + cfd_weight * cfd; undefined sfd / cfd count as zero.
Tensor loss_total(const Tensor& ce, const Tensor& sfd, const Tensor& cfd, const LossWeights& weights);

/// Batched model features, each [N, h, w, d].
struct DistillFeatures {
  Tensor f1, f2, fc;
};

struct DistillLosses {
  SfdTerms terms;
  Tensor sfd;
  Tensor cfd;
};

/// Per-sample losses averaged over the batch. Terms whose effective weight is
/// zero are skipped entirely; an undefined `bank_rows` skips L_g.
DistillLosses distillation_losses(const DistillFeatures& student, const DistillFeatures& teacher,
                                  const Tensor& bank_rows, const LossWeights& weights);

}  // namespace hicd
