#pragma once

#include "gannotation/checkpoint.hpp"
#include "gannotation/data.hpp"
#include "gannotation/losses.hpp"
#include "gannotation/optimizer.hpp"

#include <filesystem>
#include <memory>
#include <optional>

namespace gannotation {

struct TrainConfig {
  LossWeights weights;
  AdamConfig adam;
  Index batch_size = 16;
  Index epochs = 30;
  Index iterations_per_epoch = 10000;
  Index d_steps = 1;  // discriminator updates per generator update
  std::uint64_t seed = 0;
  bool enable_rec = true;

  void validate() const;
};

/// Everything needed to rebuild the networks and their conditioning.
struct ModelConfig {
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  RandomConvExtractorConfig extractor;
  PerceptualConfig perceptual;
  double sigma = 2.0;
  Index image_size = 128;

  Index point_count() const { return generator.condition_channels; }
  void validate() const;
};

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const TrainConfig& cfg);

/// Networks, optimizers and the iteration counter of one run.
class TrainingState {
 public:
  TrainingState(const ModelConfig& model, const TrainConfig& train);
  TrainingState(const TrainingState&) = delete;
  TrainingState& operator=(const TrainingState&) = delete;

  const ModelConfig& model_config() const { return model_; }
  ConditionEncoder<float> encoder() const { return heatmap_encoder<float>(model_.image_size, model_.sigma); }

  Generator<float> generator;
  Discriminator<float> discriminator;
  RandomConvExtractor<float> extractor;
  Adam<float> generator_optimizer;
  Adam<float> discriminator_optimizer;
  std::int64_t iteration = 0;

 private:
  ModelConfig model_;
};

/// The generator objective of one batch, before any update.
struct GeneratorObjective {
  Var<float> total;
  LossTerms terms;
};

/// Stacked batch tensors and their heatmap conditions.
struct BatchTensors {
  Var<float> input, target;
  Var<float> input_condition, target_condition, second_condition;
};

BatchTensors batch_tensors(const Batch& batch, const ConditionEncoder<float>& encoder);

/// Builds the weighted generator loss. The fake scores are taken from the
/// current discriminator, whose gradients the caller must discard.
GeneratorObjective generator_objective(const TrainingState& state, const BatchTensors& batch, const TrainConfig& cfg);

/// cfg.d_steps discriminator updates against a fake generated without
/// gradient tracking; returns the last hinge loss.
double discriminator_phase(TrainingState& state, const BatchTensors& batch, const TrainConfig& cfg);

/// One generator update. Gradients the adversarial term leaves on the
/// discriminator are discarded.
LossReport generator_phase(TrainingState& state, const BatchTensors& batch, const TrainConfig& cfg);

/// One discriminator phase (cfg.d_steps updates on a detached fake) followed
/// by one generator update. Non-finite terms raise invalid_state_error
/// naming the iteration and the term, before any generator update.
LossReport train_step(TrainingState& state, const Batch& batch, const TrainConfig& cfg);

/// Samples and pair lists derived from a corpus for one run.
struct TrainingData {
  std::vector<PreparedSample> samples;
  std::unique_ptr<PairSampler> sampler;
};

TrainingData make_training_data(const Corpus& corpus, double margin, Index out_size, Index pairs_per_video,
                                const AugmentationRanges& ranges, std::uint64_t seed);

inline const char* const kLossLogHeader = "iteration,adv_d,adv_g,pix,cyc,rec,pp_feature,pp_style,tv,total";

Checkpoint make_checkpoint(const TrainingState& state, const TrainConfig& cfg, const PairSampler* sampler);
/// Restores parameters, optimizer moments, the iteration counter and, when
/// given, the sampler RNG state.
void restore_checkpoint(const Checkpoint& ckpt, TrainingState& state, PairSampler* sampler);

/// Generator-only load for inference; the model config is read from the manifest.
std::unique_ptr<TrainingState> load_model(const std::filesystem::path& path);

struct TrainLoopOptions {
  std::optional<std::filesystem::path> resume_from;
  bool quiet = false;
};

/// Runs cfg.epochs * cfg.iterations_per_epoch steps in total, writing
/// checkpoint_epoch_XXXX.gck after each epoch and appending to loss_log.csv.
/// Returns the path of the last checkpoint written.
std::filesystem::path train_loop(TrainingState& state, PairSampler& sampler, const TrainConfig& cfg,
                                 const std::filesystem::path& dir, const TrainLoopOptions& options = {});

std::string loss_log_row(std::int64_t iteration, const LossReport& report);

}  // namespace gannotation
