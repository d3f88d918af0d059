#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gannotation::cli {

/// 0 success, 1 runtime failure, 2 user or configuration error.
enum ExitCode : int { kSuccess = 0, kRuntimeFailure = 1, kUsageError = 2 };

struct TrainOptions {
  std::filesystem::path config;
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume;
};

struct SynthesizeOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path image;
  std::optional<std::filesystem::path> image_pts;  // crop the source by its own landmarks
  double margin = 10.0;
  std::optional<std::filesystem::path> target_pts;
  std::optional<std::filesystem::path> shape_model;
  std::vector<double> params;
  std::optional<std::vector<double>> rigid;  // rotation (rad), scale, tx, ty about the origin
  std::filesystem::path out;
  bool overlay = false;
};

struct AnnotateOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path image;
  std::optional<std::filesystem::path> image_pts;
  double margin = 10.0;
  std::filesystem::path sequence_dir;
  std::filesystem::path out_dir;
  std::string mode = "o2m";
  bool overlay = false;
};

struct EvaluateOptions {
  std::filesystem::path checkpoint;
  std::string protocol;
  std::filesystem::path config;
  std::filesystem::path out;
  std::optional<std::filesystem::path> montage;
};

struct FitShapeModelOptions {
  std::filesystem::path manifest;
  long rank = 8;
  std::optional<long> pose_index;
  std::filesystem::path out;
};

struct ToyCorpusOptions {
  std::filesystem::path out_dir;
  long identities = 16;
  long frames = 32;
  long stills = 64;
  long size = 48;
  unsigned long long seed = 7;
};

int cmd_train(const TrainOptions& options);
int cmd_synthesize(const SynthesizeOptions& options);
int cmd_annotate(const AnnotateOptions& options);
int cmd_evaluate(const EvaluateOptions& options);
int cmd_fit_shape_model(const FitShapeModelOptions& options);
int cmd_toy_corpus(const ToyCorpusOptions& options);

}  // namespace gannotation::cli
