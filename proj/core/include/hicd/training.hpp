#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <nlohmann/json.hpp>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hicd/data.hpp"
#include "hicd/degradation.hpp"
#include "hicd/distillation.hpp"
#include "hicd/memory_bank.hpp"
#include "hicd/metrics.hpp"
#include "hicd/network.hpp"
#include "hicd/optim.hpp"

namespace hicd {

struct TrainConfig {
  double lr0 = 0.001;
  AdamWConfig adamw;
  double poly_power = 0.9;
  std::size_t total_steps = 2000;
  std::size_t batch_size = 4;
  std::size_t crop = 64;
  std::size_t scale = 4;
  std::uint64_t seed = 0;
  LossWeights weights;
  MemoryBankConfig bank;
  DegradationRanges ranges;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Independent random streams derived from one seed.
enum class Stream : std::uint64_t { init = 1, augment = 2, degrade = 3, bank = 4, eval = 5 };
std::mt19937_64 make_stream(std::uint64_t seed, Stream stream, std::uint64_t index = 0);

struct StepRecord {
  std::size_t step = 0;
  double lr = 0.0;
  double ce = 0.0;
  double sfd = 0.0;
  double cfd = 0.0;
  double total = 0.0;
  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

void to_json(nlohmann::json& j, const StepRecord& r);

struct TrainResult {
  ChangeDetector model;
  std::vector<StepRecord> curve;
};

using StepCallback = std::function<void(const StepRecord&)>;

/// Cross-entropy training on clean pairs with flip/rotate augmentation.
TrainResult train_teacher(const std::vector<ImagePair>& data, const ModelConfig& model, const TrainConfig& cfg,
                          const StepCallback& on_step = {});

/// Student training on (hq t1, upsampled degraded t2). A null teacher gives the
/// cross-entropy-only baseline. The teacher is only read, in eval mode.
TrainResult train_student(const std::vector<ImagePair>& data, const ChangeDetector* teacher, const ModelConfig& model,
                          const TrainConfig& cfg, const StepCallback& on_step = {});

/// One student step's inputs: hq t1 and the degraded, re-upsampled t2.
ImagePair degrade_pair(const ImagePair& hq, const DegradationSpec& spec);

enum class EvalSetting { clean, resolution, blur, noise, multi };
std::string_view to_string(EvalSetting s);
EvalSetting eval_setting_from_string(std::string_view name);
const std::vector<EvalSetting>& all_eval_settings();

/// Degradation applied to pair `index` under `setting`; deterministic in (seed, index).
DegradationSpec eval_spec(EvalSetting setting, std::size_t scale, std::uint64_t seed, std::size_t index,
                          const DegradationRanges& ranges = {});

struct EvalReport {
  EvalSetting setting = EvalSetting::clean;
  Confusion confusion;
  Scores scores;
};

void to_json(nlohmann::json& j, const EvalReport& r);

/// Prediction for (t1, processed t2) of pair `index`, as a flat H x W {0, 1} map.
/// May be called concurrently from CDTK_THREADS workers.
using Predictor = std::function<std::vector<std::uint8_t>(const Image& t1, const Image& t2, std::size_t index)>;

EvalReport evaluate(const std::vector<ImagePair>& data, EvalSetting setting, std::size_t scale, std::uint64_t seed,
                    const Predictor& predict, const DegradationRanges& ranges = {});
EvalReport evaluate(const ChangeDetector& model, const std::vector<ImagePair>& data, EvalSetting setting,
                    std::size_t scale, std::uint64_t seed, const DegradationRanges& ranges = {});

struct CheckpointInfo {
  std::string role;  // "teacher" or "student"
  bool frozen = false;
};

/// Directory with model.json plus one CDTK file per tensor.
void save_checkpoint(const std::filesystem::path& dir, const ChangeDetector& model, const CheckpointInfo& info);

struct LoadedCheckpoint {
  ChangeDetector model;
  CheckpointInfo info;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace hicd
