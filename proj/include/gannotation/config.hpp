#pragma once

#include "gannotation/training.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace gannotation {

/// A configuration problem attributable to one key.
class config_error : public std::invalid_argument {
 public:
  config_error(std::string key, const std::string& message)
      : std::invalid_argument("config key '" + key + "': " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct EvalConfig {
  std::filesystem::path manifest;    // images under evaluation
  std::filesystem::path manifest_b;  // second set for the fid protocol
  std::filesystem::path sequence_dir;
  Index max_images = 0;  // 0 = all
  std::vector<double> robustness_sigmas{0.0, 1.0, 2.0, 3.0, 4.0, 5.0};
  double robustness_rotation_deg = 5.0;
  std::uint64_t seed = 0;
};

/// Everything a run reads from its config file.
struct RunConfig {
  TrainConfig train;
  ModelConfig model;
  double margin = 10.0;
  std::filesystem::path train_manifest;
  Index pairs_per_video = 100;
  AugmentationRanges augmentation;
  EvalConfig eval;
};

/// Parses flat "key = value" lines; '#' starts a comment. Unknown keys,
/// duplicates and malformed values raise config_error naming the key.
/// Absent keys keep their defaults and are reported with a notice.
/// Relative paths are resolved against `base_dir`.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir, bool announce_defaults = true);
RunConfig load_run_config(const std::filesystem::path& path, bool announce_defaults = true);

/// Keys accepted by the parser, in documentation order.
const std::vector<std::string>& run_config_keys();

/// The config as "key = value" text that parses back to the same values.
std::string format_run_config(const RunConfig& cfg);

}  // namespace gannotation
