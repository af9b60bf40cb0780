#include "hicd/training.hpp"

#include <cmath>
#include <fstream>

#include "hicd/error.hpp"
#include "hicd/parallel.hpp"
#include "hicd/tensor_io.hpp"

namespace hicd {

void TrainConfig::validate() const {
  if (total_steps == 0) throw ConfigError("train: total_steps must be positive");
  if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
  if (crop == 0 || crop % ModelConfig::downsample_factor != 0) {
    throw ConfigError("train: crop must be a positive multiple of " + std::to_string(ModelConfig::downsample_factor));
  }
  if (scale == 0 || scale > crop) throw ConfigError("train: scale must lie in [1, crop]");
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) throw ConfigError("train: lr0 must be positive");
  if (!(poly_power > 0.0)) throw ConfigError("train: poly_power must be positive");
  weights.validate();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"lr0", c.lr0},
                     {"betas", {c.adamw.beta1, c.adamw.beta2}},
                     {"eps", c.adamw.eps},
                     {"weight_decay", c.adamw.weight_decay},
                     {"poly_power", c.poly_power},
                     {"total_steps", c.total_steps},
                     {"batch_size", c.batch_size},
                     {"crop", c.crop},
                     {"scale", c.scale},
                     {"seed", c.seed},
                     {"weights", c.weights},
                     {"bank",
                      {{"capacity", c.bank.capacity},
                       {"push_per_image", c.bank.push_per_image},
                       {"sample_count", c.bank.sample_count}}},
                     {"ranges", c.ranges}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  const TrainConfig d;
  c.lr0 = j.value("lr0", d.lr0);
  if (j.contains("betas")) {
    const auto betas = j.at("betas").get<std::vector<double>>();
    if (betas.size() != 2) throw ConfigError("train: betas needs two values");
    c.adamw.beta1 = betas[0];
    c.adamw.beta2 = betas[1];
  }
  c.adamw.eps = j.value("eps", d.adamw.eps);
  c.adamw.weight_decay = j.value("weight_decay", d.adamw.weight_decay);
  c.poly_power = j.value("poly_power", d.poly_power);
  c.total_steps = j.value("total_steps", d.total_steps);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.crop = j.value("crop", d.crop);
  c.scale = j.value("scale", d.scale);
  c.seed = j.value("seed", d.seed);
  c.weights = j.value("weights", d.weights);
  if (j.contains("bank")) {
    const auto& b = j.at("bank");
    c.bank.capacity = b.value("capacity", d.bank.capacity);
    c.bank.push_per_image = b.value("push_per_image", d.bank.push_per_image);
    c.bank.sample_count = b.value("sample_count", d.bank.sample_count);
  }
  c.ranges = j.value("ranges", d.ranges);
  c.validate();
}

std::mt19937_64 make_stream(std::uint64_t seed, Stream stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

void to_json(nlohmann::json& j, const StepRecord& r) {
  j = nlohmann::json{{"step", r.step}, {"lr", r.lr},   {"ce", r.ce},
                     {"sfd", r.sfd},   {"cfd", r.cfd}, {"total", r.total}};
}

namespace {

std::vector<ImagePair> draw_batch(const std::vector<ImagePair>& data, const TrainConfig& cfg, std::mt19937_64& rng) {
  auto pairs = crop_batch(data, cfg.crop, cfg.batch_size, rng);
  for (auto& p : pairs) p = augment(p, rng);
  return pairs;
}

double value_or_zero(const Tensor& t) { return t.defined() ? t.item() : 0.0; }

void check_finite(const StepRecord& r) {
  if (!std::isfinite(r.total)) {
    throw EvaluationError("training diverged at step " + std::to_string(r.step) + ": loss is not finite");
  }
}

}  // namespace

TrainResult train_teacher(const std::vector<ImagePair>& data, const ModelConfig& model_cfg, const TrainConfig& cfg,
                          const StepCallback& on_step) {
  cfg.validate();
  auto init_rng = make_stream(cfg.seed, Stream::init);
  auto augment_rng = make_stream(cfg.seed, Stream::augment);
  TrainResult result{ChangeDetector(model_cfg, init_rng), {}};
  AdamW opt(result.model.parameters(), cfg.adamw);

  for (std::size_t step = 0; step < cfg.total_steps; ++step) {
    const Batch batch = stack_batch(draw_batch(data, cfg, augment_rng));
    const ModelOutput out = result.model.forward(batch.t1, batch.t2, Mode::train);
    const Tensor ce = cross_entropy(out.change.logits, batch.labels);
    StepRecord rec;
    rec.step = step;
    rec.lr = poly_lr(step, cfg.total_steps, cfg.lr0, cfg.poly_power);
    rec.ce = rec.total = ce.item();
    check_finite(rec);
    backward(ce);
    opt.step(rec.lr);
    result.curve.push_back(rec);
    if (on_step) on_step(rec);
  }
  return result;
}

ImagePair degrade_pair(const ImagePair& hq, const DegradationSpec& spec) {
  return {hq.t1, upsample_to(degrade(hq.t2, spec), hq.t2.height, hq.t2.width), hq.label};
}

TrainResult train_student(const std::vector<ImagePair>& data, const ChangeDetector* teacher,
                          const ModelConfig& model_cfg, const TrainConfig& cfg, const StepCallback& on_step) {
  cfg.validate();
  if (teacher && !(teacher->config() == model_cfg)) {
    throw ConfigError("train_student: teacher and student model configs differ");
  }
  auto init_rng = make_stream(cfg.seed, Stream::init);
  auto augment_rng = make_stream(cfg.seed, Stream::augment);
  auto degrade_rng = make_stream(cfg.seed, Stream::degrade);
  auto bank_rng = make_stream(cfg.seed, Stream::bank);
  TrainResult result{ChangeDetector(model_cfg, init_rng), {}};
  AdamW opt(result.model.parameters(), cfg.adamw);
  std::optional<MemoryBank> bank;
  if (teacher) bank.emplace(model_cfg.feature_dim, cfg.bank);
  const LossWeights& w = cfg.weights;
  const bool want_global = w.sfd > 0.0 && w.g > 0.0;

  for (std::size_t step = 0; step < cfg.total_steps; ++step) {
    const auto hq = draw_batch(data, cfg, augment_rng);
    std::vector<DegradationSpec> specs;
    for (std::size_t n = 0; n < hq.size(); ++n) specs.push_back(sample_spec(degrade_rng, cfg.scale, cfg.ranges));
    std::vector<ImagePair> lq(hq.size());
    parallel_for(hq.size(), [&](std::size_t n) { lq[n] = degrade_pair(hq[n], specs[n]); });
    const Batch student_batch = stack_batch(lq);

    std::optional<ModelOutput> t_out;
    if (teacher) {
      NoGradGuard no_grad;
      const Batch teacher_batch = stack_batch(hq);
      t_out = teacher->forward(teacher_batch.t1, teacher_batch.t2, Mode::eval);
    }
    Tensor bank_rows;
    if (bank && want_global && !bank->empty()) bank_rows = bank->sample(bank_rng);

    const ModelOutput s_out = result.model.forward(student_batch.t1, student_batch.t2, Mode::train);
    const Tensor ce = cross_entropy(s_out.change.logits, student_batch.labels);
    DistillLosses distill;
    if (t_out) {
      distill = distillation_losses({s_out.f1, s_out.f2, s_out.fc}, {t_out->f1, t_out->f2, t_out->fc}, bank_rows, w);
    }
    const Tensor total = loss_total(ce, distill.sfd, distill.cfd, w);

    StepRecord rec;
    rec.step = step;
    rec.lr = poly_lr(step, cfg.total_steps, cfg.lr0, cfg.poly_power);
    rec.ce = ce.item();
    rec.sfd = value_or_zero(distill.sfd);
    rec.cfd = value_or_zero(distill.cfd);
    rec.total = total.item();
    check_finite(rec);
    backward(total);
    opt.step(rec.lr);

    if (bank) {
      for (std::size_t n = 0; n < hq.size(); ++n) {
        bank->push(FeatureMap(select(t_out->f1, n).detach()), FeatureMap(select(t_out->f2, n).detach()),
                   FeatureMap(select(s_out.f1, n).detach()), bank_rng);
      }
    }
    result.curve.push_back(rec);
    if (on_step) on_step(rec);
  }
  return result;
}

std::string_view to_string(EvalSetting s) {
  switch (s) {
    case EvalSetting::clean: return "clean";
    case EvalSetting::resolution: return "resolution";
    case EvalSetting::blur: return "blur";
    case EvalSetting::noise: return "noise";
    case EvalSetting::multi: return "multi";
  }
  return "clean";
}

EvalSetting eval_setting_from_string(std::string_view name) {
  for (auto s : all_eval_settings())
    if (to_string(s) == name) return s;
  throw ConfigError("unknown evaluation setting '" + std::string(name) + "'");
}

const std::vector<EvalSetting>& all_eval_settings() {
  static const std::vector<EvalSetting> all{EvalSetting::clean, EvalSetting::resolution, EvalSetting::blur,
                                            EvalSetting::noise, EvalSetting::multi};
  return all;
}

DegradationSpec eval_spec(EvalSetting setting, std::size_t scale, std::uint64_t seed, std::size_t index,
                          const DegradationRanges& ranges) {
  DegradationSpec spec = identity_spec();
  if (setting == EvalSetting::clean) return spec;
  auto rng = make_stream(seed, Stream::eval, index);
  const DegradationSpec sampled = sample_spec(rng, scale, ranges);
  switch (setting) {
    case EvalSetting::resolution:
      spec.scale = scale;
      spec.resample = Interp::bicubic;
      break;
    case EvalSetting::blur:
      spec.kernel = sampled.kernel;
      break;
    case EvalSetting::noise:
      spec.noise_sigma = sampled.noise_sigma;
      spec.rng_seed = sampled.rng_seed;
      break;
    default:
      spec = sampled;
      break;
  }
  return spec;
}

void to_json(nlohmann::json& j, const EvalReport& r) {
  j = nlohmann::json{{"setting", to_string(r.setting)}, {"confusion", r.confusion}, {"scores", r.scores}};
}

EvalReport evaluate(const std::vector<ImagePair>& data, EvalSetting setting, std::size_t scale, std::uint64_t seed,
                    const Predictor& predict, const DegradationRanges& ranges) {
  std::vector<Confusion> parts(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    const ImagePair processed = degrade_pair(data[i], eval_spec(setting, scale, seed, i, ranges));
    parts[i] = hicd::accumulate(Confusion{}, predict(processed.t1, processed.t2, i), processed.label.values);
  });
  EvalReport report;
  report.setting = setting;
  for (const auto& c : parts) report.confusion.merge(c);
  report.scores = scores(report.confusion);
  return report;
}

EvalReport evaluate(const ChangeDetector& model, const std::vector<ImagePair>& data, EvalSetting setting,
                    std::size_t scale, std::uint64_t seed, const DegradationRanges& ranges) {
  auto as_batch = [](const Image& img) {
    return Tensor({1, img.height, img.width, img.channels}, img.pixels);
  };
  return evaluate(
      data, setting, scale, seed,
      [&](const Image& t1, const Image& t2, std::size_t) {
        NoGradGuard no_grad;
        return model.forward(as_batch(t1), as_batch(t2), Mode::eval).change.prediction;
      },
      ranges);
}

void save_checkpoint(const std::filesystem::path& dir, const ChangeDetector& model, const CheckpointInfo& info) {
  save_tensor_map(dir, model.state());
  const nlohmann::json meta{{"format", 1}, {"role", info.role}, {"frozen", info.frozen}, {"model", model.config()}};
  std::ofstream out(dir / "model.json");
  if (!out) throw IoError("checkpoint: cannot write " + (dir / "model.json").string());
  out << meta.dump(2) << '\n';
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "model.json");
  if (!in) throw IoError("checkpoint: cannot open " + (dir / "model.json").string());
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint: " + (dir / "model.json").string() + ": " + e.what());
  }
  std::mt19937_64 unused(0);
  LoadedCheckpoint ckpt{ChangeDetector(meta.at("model").get<ModelConfig>(), unused),
                        {meta.value("role", std::string("student")), meta.value("frozen", false)}};
  auto state = load_tensor_map(dir);
  ckpt.model.load_state(state);
  return ckpt;
}

}  // namespace hicd
