#include "hicd/metrics.hpp"

#include <cstdio>

#include "hicd/error.hpp"

namespace hicd {

Confusion& Confusion::merge(const Confusion& other) {
  tp += other.tp;
  fp += other.fp;
  fn += other.fn;
  tn += other.tn;
  return *this;
}

Confusion accumulate(Confusion conf, std::span<const std::uint8_t> prediction, std::span<const std::uint8_t> label) {
  if (prediction.size() != label.size()) {
    throw DimensionError("accumulate: prediction has " + std::to_string(prediction.size()) + " pixels, label has " +
                         std::to_string(label.size()));
  }
  for (std::size_t i = 0; i < label.size(); ++i) {
    const bool p = prediction[i] != 0, l = label[i] != 0;
    if (p && l) ++conf.tp;
    else if (p) ++conf.fp;
    else if (l) ++conf.fn;
    else ++conf.tn;
  }
  return conf;
}

namespace {
double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }
}  // namespace

Scores scores(const Confusion& c) {
  const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
  Scores s;
  s.precision = ratio(tp, tp + fp);
  s.recall = ratio(tp, tp + fn);
  s.f1 = ratio(2.0 * s.precision * s.recall, s.precision + s.recall);
  s.iou = ratio(tp, tp + fp + fn);
  return s;
}

void to_json(nlohmann::json& j, const Confusion& c) {
  j = nlohmann::json{{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
}

void from_json(const nlohmann::json& j, Confusion& c) {
  j.at("tp").get_to(c.tp);
  j.at("fp").get_to(c.fp);
  j.at("fn").get_to(c.fn);
  j.at("tn").get_to(c.tn);
}

void to_json(nlohmann::json& j, const Scores& s) {
  j = nlohmann::json{{"f1", s.f1}, {"iou", s.iou}, {"precision", s.precision}, {"recall", s.recall}};
}

std::string csv_header() { return "setting,f1,iou,precision,recall"; }

std::string csv_row(const std::string& setting, const Scores& s) {
  char buf[128];
  std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f,%.6f", s.f1, s.iou, s.precision, s.recall);
  return setting + buf;
}

}  // namespace hicd
