#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <span>
#include <string>

namespace hicd {

/// Pixel confusion counts with change (1) as the positive class.
struct Confusion {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  Confusion& merge(const Confusion& other);
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

Confusion accumulate(Confusion conf, std::span<const std::uint8_t> prediction, std::span<const std::uint8_t> label);

struct Scores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double iou = 0.0;
};

/// Micro-averaged scores; any 0/0 ratio is reported as 0.
Scores scores(const Confusion& conf);

void to_json(nlohmann::json& j, const Confusion& c);
void from_json(const nlohmann::json& j, Confusion& c);
void to_json(nlohmann::json& j, const Scores& s);

/// "setting,f1,iou,precision,recall"
std::string csv_header();
std::string csv_row(const std::string& setting, const Scores& s);

}  // namespace hicd
