// hicd: command-line driver for data synthesis, degradation, training,
// evaluation, gradient checks and the ablation ladder.
#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "hicd/checks.hpp"
#include "hicd/config.hpp"
#include "hicd/error.hpp"
#include "hicd/parallel.hpp"
#include "hicd/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kCheck = 3, kIo = 4 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> scale;
  std::string weights;
  std::string out = "out";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Experiment JSON");
  cmd->add_option("--seed", c.seed, "Training seed (overrides config)");
  cmd->add_option("--scale", c.scale, "Degradation scale (overrides config)")->check(CLI::IsMember({4, 8}));
  cmd->add_option("--weights", c.weights, "Loss weights s1,s2,c,g,sfd,cfd (overrides config)");
  cmd->add_option("--out", c.out, "Output directory");
}

// Flags override the config file, which overrides built-in defaults.
hicd::ExperimentConfig resolve(const Common& c) {
  hicd::ExperimentConfig cfg;
  if (!c.config.empty()) cfg = hicd::load_experiment(c.config);
  if (c.seed) cfg.train.seed = *c.seed;
  if (c.scale) cfg.train.scale = *c.scale;
  if (!c.weights.empty()) cfg.train.weights = hicd::LossWeights::parse_csv(c.weights);
  cfg.train.validate();
  return cfg;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw hicd::IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw hicd::IoError("cannot write " + path.string());
  out << text;
}

void write_run_record(const fs::path& dir, const std::string& command, const json& config, const json& seeds) {
  fs::create_directories(dir);
  write_json(dir / "run.json", {{"command", command},
                                {"version", kVersion},
                                {"config_hash", hicd::fnv1a_hex(config.dump())},
                                {"seeds", seeds},
                                {"config", config}});
}

std::string curve_csv(const std::vector<hicd::StepRecord>& curve) {
  std::string s = "step,lr,ce,sfd,cfd,total\n";
  char buf[160];
  for (const auto& r : curve) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.step, r.lr, r.ce, r.sfd, r.cfd, r.total);
    s += buf;
  }
  return s;
}

hicd::StepCallback progress(std::size_t total) {
  return [total](const hicd::StepRecord& r) {
    if (r.step % 50 == 0 || r.step + 1 == total) {
      std::fprintf(stderr, "step %zu/%zu lr %.3g ce %.4f sfd %.4f cfd %.4f total %.4f\n", r.step + 1, total, r.lr,
                   r.ce, r.sfd, r.cfd, r.total);
    }
  };
}

json config_json(const hicd::ExperimentConfig& cfg) { return cfg; }

// --- synth-data -------------------------------------------------------------

int cmd_synth(const Common& c, std::size_t count, const std::string& split) {
  const auto cfg = resolve(c);
  hicd::SyntheticSceneSpec spec = split == "train" ? cfg.data.train_scenes : cfg.data.eval_scenes;
  if (c.seed) spec.rng_seed = *c.seed;
  const auto pairs = hicd::generate_synthetic_set(spec, count);
  hicd::write_dataset(c.out, pairs, split);
  write_run_record(c.out, "synth-data", {{"scenes", spec}, {"count", count}, {"split", split}},
                   {{"rng_seed", spec.rng_seed}, {"background_seed", spec.background_seed}});
  std::printf("wrote %zu pairs to %s\n", count, c.out.c_str());
  return kOk;
}

// --- degrade ----------------------------------------------------------------

int cmd_degrade(const Common& c, const std::string& in_dir, const std::string& spec_path, bool identity,
                bool upsample) {
  const auto cfg = resolve(c);
  const std::uint64_t seed = cfg.train.seed;
  std::vector<fs::path> inputs;
  if (!fs::is_directory(in_dir)) throw hicd::IoError("degrade: not a directory: " + in_dir);
  for (const auto& e : fs::directory_iterator(in_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") inputs.push_back(e.path());
  }
  std::sort(inputs.begin(), inputs.end());
  std::optional<hicd::DegradationSpec> fixed;
  if (identity) fixed = hicd::identity_spec();
  if (!spec_path.empty()) {
    std::ifstream in(spec_path);
    if (!in) throw hicd::IoError("degrade: cannot open " + spec_path);
    fixed = json::parse(in).get<hicd::DegradationSpec>();
  }
  fs::create_directories(c.out);
  json records = json::array();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto rng = hicd::make_stream(seed, hicd::Stream::degrade, i);
    const hicd::DegradationSpec spec = fixed ? *fixed : hicd::sample_spec(rng, cfg.train.scale, cfg.train.ranges);
    const hicd::Image hq = hicd::read_png(inputs[i]);
    hicd::Image lq = hicd::degrade(hq, spec);
    if (upsample) lq = hicd::upsample_to(lq, hq.height, hq.width);
    const std::string name = inputs[i].filename().string();
    hicd::write_png(fs::path(c.out) / name, lq);
    write_json(fs::path(c.out) / (inputs[i].stem().string() + ".json"), spec);
    records.push_back({{"input", name}, {"output", name}, {"spec", spec}});
  }
  write_json(fs::path(c.out) / "degrade_manifest.json", {{"source", in_dir}, {"entries", records}});
  write_run_record(c.out, "degrade",
                   {{"scale", cfg.train.scale}, {"ranges", cfg.train.ranges}, {"identity", identity},
                    {"spec", spec_path}, {"upsample", upsample}},
                   {{"seed", seed}});
  std::printf("degraded %zu images into %s\n", inputs.size(), c.out.c_str());
  return kOk;
}

// --- training ---------------------------------------------------------------

int cmd_train_teacher(const Common& c, std::optional<std::size_t> steps) {
  auto cfg = resolve(c);
  if (steps) cfg.teacher_steps = *steps;
  hicd::TrainConfig tc = cfg.train;
  tc.total_steps = cfg.teacher_steps;
  const auto data = hicd::load_train_pairs(cfg.data);
  auto result = hicd::train_teacher(data, cfg.model, tc, progress(tc.total_steps));
  const fs::path out(c.out);
  hicd::save_checkpoint(out / "checkpoint", result.model, {"teacher", true});
  write_text(out / "curve.csv", curve_csv(result.curve));
  write_run_record(out, "train-teacher", config_json(cfg), {{"seed", tc.seed}});
  std::printf("teacher checkpoint: %s\n", (out / "checkpoint").c_str());
  return kOk;
}

int cmd_train_student(const Common& c, const std::string& teacher_dir, bool baseline) {
  const auto cfg = resolve(c);
  const auto data = hicd::load_train_pairs(cfg.data);
  std::optional<hicd::LoadedCheckpoint> teacher;
  if (!baseline) {
    if (teacher_dir.empty()) throw hicd::ConfigError("train-student: --teacher is required unless --baseline");
    teacher.emplace(hicd::load_checkpoint(teacher_dir));
    if (!teacher->info.frozen) throw hicd::ConfigError("train-student: teacher checkpoint is not frozen");
  }
  auto result = hicd::train_student(data, teacher ? &teacher->model : nullptr, cfg.model, cfg.train,
                                    progress(cfg.train.total_steps));
  const fs::path out(c.out);
  hicd::save_checkpoint(out / "checkpoint", result.model, {"student", false});
  write_text(out / "curve.csv", curve_csv(result.curve));
  write_run_record(out, "train-student", config_json(cfg),
                   {{"seed", cfg.train.seed}, {"teacher", baseline ? "" : teacher_dir}});
  std::printf("student checkpoint: %s\n", (out / "checkpoint").c_str());
  return kOk;
}

// --- eval -------------------------------------------------------------------

json eval_block(const std::vector<hicd::EvalReport>& reports, std::string& csv) {
  json settings = json::array();
  hicd::Confusion aggregate;
  csv = hicd::csv_header() + "\n";
  for (const auto& r : reports) {
    settings.push_back(r);
    aggregate.merge(r.confusion);
    csv += hicd::csv_row(std::string(hicd::to_string(r.setting)), r.scores) + "\n";
  }
  const auto agg = hicd::scores(aggregate);
  csv += hicd::csv_row("aggregate", agg) + "\n";
  return {{"settings", settings}, {"aggregate", {{"confusion", aggregate}, {"scores", agg}}}};
}

int cmd_eval(const Common& c, const std::string& ckpt, const std::string& setting, bool oracle) {
  const auto cfg = resolve(c);
  const auto data = hicd::load_eval_pairs(cfg.data);
  std::vector<hicd::EvalSetting> settings =
      setting == "all" ? hicd::all_eval_settings() : std::vector{hicd::eval_setting_from_string(setting)};
  std::vector<hicd::EvalReport> reports;
  if (oracle) {
    // Perfect predictions: echo the label of the evaluated pair.
    const hicd::Predictor perfect = [&](const hicd::Image&, const hicd::Image&, std::size_t i) {
      return data[i].label.values;
    };
    for (auto s : settings)
      reports.push_back(hicd::evaluate(data, s, cfg.train.scale, cfg.eval_seed, perfect, cfg.train.ranges));
  } else {
    if (ckpt.empty()) throw hicd::ConfigError("eval: --checkpoint is required unless --oracle");
    const auto loaded = hicd::load_checkpoint(ckpt);
    for (auto s : settings)
      reports.push_back(hicd::evaluate(loaded.model, data, s, cfg.train.scale, cfg.eval_seed, cfg.train.ranges));
  }
  std::string csv;
  const json report = eval_block(reports, csv);
  const fs::path out(c.out);
  fs::create_directories(out);
  write_json(out / "metrics.json", report);
  write_text(out / "metrics.csv", csv);
  write_run_record(out, "eval", {{"checkpoint", oracle ? "oracle" : ckpt}, {"experiment", config_json(cfg)}},
                   {{"eval_seed", cfg.eval_seed}});
  std::printf("%s", csv.c_str());
  return kOk;
}

// --- gradcheck --------------------------------------------------------------

int cmd_gradcheck(const Common& c, double tol) {
  const std::uint64_t seed = c.seed.value_or(0);
  const auto checks = hicd::loss_gradchecks(seed, tol);
  json rows = json::array();
  bool ok = true;
  for (const auto& [name, r] : checks) {
    ok = ok && r.passed;
    rows.push_back({{"name", name},
                    {"passed", r.passed},
                    {"max_rel_error", r.max_rel_error},
                    {"checked", r.checked},
                    {"excluded", r.excluded},
                    {"failed", r.failed}});
    std::printf("%-24s %s max_rel_error %.3e checked %zu excluded %zu\n", name.c_str(), r.passed ? "PASS" : "FAIL",
                r.max_rel_error, r.checked, r.excluded);
  }
  const fs::path out(c.out);
  fs::create_directories(out);
  write_json(out / "gradcheck.json", {{"tolerance", tol}, {"passed", ok}, {"checks", rows}});
  write_run_record(out, "gradcheck", {{"tolerance", tol}}, {{"seed", seed}});
  return ok ? kOk : kCheck;
}

// --- ablate -----------------------------------------------------------------

struct AblationRow {
  std::string name;
  hicd::LossWeights weights;
};

std::vector<AblationRow> ablation_ladder(const hicd::LossWeights& full) {
  hicd::LossWeights w = hicd::LossWeights::zeros();
  std::vector<AblationRow> rows{{"baseline", w}};
  w.sfd = full.sfd;
  w.s2 = full.s2;
  rows.push_back({"+L_s2", w});
  w.s1 = full.s1;
  rows.push_back({"+L_s1", w});
  w.c = full.c;
  rows.push_back({"+L_c", w});
  w.g = full.g;
  rows.push_back({"+L_g", w});
  w.cfd = full.cfd;
  rows.push_back({"+L_cfd", w});
  return rows;
}

int cmd_ablate(const Common& c, const std::string& teacher_dir, std::size_t n_seeds) {
  const auto cfg = resolve(c);
  const auto train = hicd::load_train_pairs(cfg.data);
  const auto eval = hicd::load_eval_pairs(cfg.data);
  const fs::path out(c.out);
  fs::create_directories(out);

  std::optional<hicd::ChangeDetector> owned;
  const hicd::ChangeDetector* teacher = nullptr;
  std::optional<hicd::LoadedCheckpoint> loaded;
  if (!teacher_dir.empty()) {
    loaded.emplace(hicd::load_checkpoint(teacher_dir));
    teacher = &loaded->model;
  } else {
    hicd::TrainConfig tc = cfg.train;
    tc.total_steps = cfg.teacher_steps;
    std::fprintf(stderr, "training teacher for %zu steps\n", tc.total_steps);
    owned.emplace(hicd::train_teacher(train, cfg.model, tc, progress(tc.total_steps)).model);
    hicd::save_checkpoint(out / "teacher", *owned, {"teacher", true});
    teacher = &*owned;
  }

  json rows = json::array();
  std::string csv = "row,f1,iou,f1_std,iou_std";
  for (std::size_t s = 0; s < n_seeds; ++s) csv += ",iou_seed" + std::to_string(s);
  csv += "\n";
  json seeds = json::array();
  for (std::size_t s = 0; s < n_seeds; ++s) seeds.push_back(cfg.train.seed + s);

  for (const auto& row : ablation_ladder(cfg.train.weights)) {
    std::vector<double> f1s, ious;
    for (std::size_t s = 0; s < n_seeds; ++s) {
      hicd::TrainConfig tc = cfg.train;
      tc.seed = cfg.train.seed + s;
      tc.weights = row.weights;
      std::fprintf(stderr, "row %s seed %llu\n", row.name.c_str(), static_cast<unsigned long long>(tc.seed));
      const auto result = hicd::train_student(train, row.name == "baseline" ? nullptr : teacher, cfg.model, tc);
      const auto rep = hicd::evaluate(result.model, eval, hicd::EvalSetting::multi, tc.scale, cfg.eval_seed,
                                      tc.ranges);
      f1s.push_back(rep.scores.f1);
      ious.push_back(rep.scores.iou);
    }
    auto mean = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    };
    auto stddev = [&](const std::vector<double>& v) {
      const double m = mean(v);
      double s = 0.0;
      for (double x : v) s += (x - m) * (x - m);
      return v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0;
    };
    rows.push_back({{"row", row.name},
                    {"weights", row.weights},
                    {"f1", mean(f1s)},
                    {"iou", mean(ious)},
                    {"f1_std", stddev(f1s)},
                    {"iou_std", stddev(ious)},
                    {"iou_per_seed", ious}});
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f", row.name.c_str(), mean(f1s), mean(ious), stddev(f1s),
                  stddev(ious));
    csv += buf;
    for (double v : ious) {
      std::snprintf(buf, sizeof buf, ",%.6f", v);
      csv += buf;
    }
    csv += "\n";
  }
  write_json(out / "ablation.json", {{"setting", "multi"}, {"scale", cfg.train.scale}, {"rows", rows}});
  write_text(out / "ablation.csv", csv);
  write_run_record(out, "ablate", config_json(cfg), {{"train_seeds", seeds}, {"eval_seed", cfg.eval_seed}});
  std::printf("%s", csv.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical correlation distillation for quality-varied change detection"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Common common;

  auto* synth = app.add_subcommand("synth-data", "Generate a synthetic change-detection dataset");
  add_common(synth, common);
  std::size_t count = 48;
  std::string split = "train";
  synth->add_option("--count", count, "Number of pairs")->check(CLI::PositiveNumber);
  synth->add_option("--split", split, "train | val | test")->check(CLI::IsMember({"train", "val", "test"}));

  auto* degrade = app.add_subcommand("degrade", "Degrade every PNG in a directory");
  add_common(degrade, common);
  std::string in_dir, spec_path;
  bool identity = false, upsample = false;
  degrade->add_option("--in", in_dir, "Input directory of PNG images")->required();
  degrade->add_option("--spec", spec_path, "Fixed DegradationSpec JSON instead of sampling");
  degrade->add_flag("--identity", identity, "Use the identity degradation");
  degrade->add_flag("--upsample", upsample, "Bicubic-upsample outputs back to the input size");

  auto* teach = app.add_subcommand("train-teacher", "Train the teacher on clean pairs");
  add_common(teach, common);
  std::optional<std::size_t> teacher_steps;
  teach->add_option("--steps", teacher_steps, "Teacher steps (overrides config)");

  auto* student = app.add_subcommand("train-student", "Train a student on clean/degraded pairs");
  add_common(student, common);
  std::string teacher_dir;
  bool baseline = false;
  student->add_option("--teacher", teacher_dir, "Frozen teacher checkpoint directory");
  student->add_flag("--baseline", baseline, "Cross-entropy only, no teacher");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint under a degradation setting");
  add_common(eval, common);
  std::string ckpt, setting = "all";
  bool oracle = false;
  eval->add_option("--checkpoint", ckpt, "Checkpoint directory");
  eval->add_option("--setting", setting, "clean | resolution | blur | noise | multi | all");
  eval->add_flag("--oracle", oracle, "Score perfect predictions instead of a model");

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference checks of the loss stack");
  add_common(grad, common);
  double tol = 1e-4;
  grad->add_option("--tol", tol, "Relative tolerance")->check(CLI::PositiveNumber);

  auto* ablate = app.add_subcommand("ablate", "Six-row ablation ladder over several seeds");
  add_common(ablate, common);
  std::string ablate_teacher;
  std::size_t n_seeds = 3;
  ablate->add_option("--teacher", ablate_teacher, "Teacher checkpoint (trained if omitted)");
  ablate->add_option("--seeds", n_seeds, "Seeds per row")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*synth) return cmd_synth(common, count, split);
    if (*degrade) return cmd_degrade(common, in_dir, spec_path, identity, upsample);
    if (*teach) return cmd_train_teacher(common, teacher_steps);
    if (*student) return cmd_train_student(common, teacher_dir, baseline);
    if (*eval) return cmd_eval(common, ckpt, setting, oracle);
    if (*grad) return cmd_gradcheck(common, tol);
    if (*ablate) return cmd_ablate(common, ablate_teacher, n_seeds);
  } catch (const hicd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const hicd::ParameterError& e) {
    std::cerr << "parameter error: " << e.what() << '\n';
    return kConfig;
  } catch (const hicd::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
