#include "gannotation/training.hpp"

#include "gannotation/error.hpp"
#include "gannotation/log.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace gannotation {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  weights.validate();
  adam.validate();
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (iterations_per_epoch < 1) throw std::invalid_argument("iterations_per_epoch must be >= 1");
  if (d_steps < 1) throw std::invalid_argument("d_steps must be >= 1");
}

void ModelConfig::validate() const {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be > 0");
  if (image_size < 4 || image_size % 4 != 0) throw std::invalid_argument("out_size must be a positive multiple of 4");
  if (discriminator.input_size != image_size) throw std::invalid_argument("discriminator input size differs from out_size");
  if (generator.condition_channels < 2) throw std::invalid_argument("n_points must be >= 2");
}

nlohmann::json model_config_to_json(const ModelConfig& c) {
  nlohmann::json j;
  j["generator"] = {{"image_channels", c.generator.image_channels},
                    {"condition_channels", c.generator.condition_channels},
                    {"base_width", c.generator.base_width},
                    {"n_residual", c.generator.n_residual},
                    {"seed", c.generator.seed}};
  j["discriminator"] = {{"image_channels", c.discriminator.image_channels},
                        {"input_size", c.discriminator.input_size},
                        {"base_width", c.discriminator.base_width},
                        {"n_down", c.discriminator.n_down},
                        {"max_channels", c.discriminator.max_channels},
                        {"leak", c.discriminator.leak},
                        {"seed", c.discriminator.seed}};
  j["extractor"] = {{"image_channels", c.extractor.image_channels},
                    {"base_width", c.extractor.base_width},
                    {"seed", c.extractor.seed}};
  j["perceptual"] = {{"feature_tags", c.perceptual.feature_tags}, {"style_tag", c.perceptual.style_tag}};
  j["sigma"] = c.sigma;
  j["image_size"] = c.image_size;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    const auto& g = j.at("generator");
    c.generator.image_channels = g.at("image_channels").get<Index>();
    c.generator.condition_channels = g.at("condition_channels").get<Index>();
    c.generator.base_width = g.at("base_width").get<Index>();
    c.generator.n_residual = g.at("n_residual").get<Index>();
    c.generator.seed = g.at("seed").get<std::uint64_t>();
    const auto& d = j.at("discriminator");
    c.discriminator.image_channels = d.at("image_channels").get<Index>();
    c.discriminator.input_size = d.at("input_size").get<Index>();
    c.discriminator.base_width = d.at("base_width").get<Index>();
    c.discriminator.n_down = d.at("n_down").get<Index>();
    c.discriminator.max_channels = d.at("max_channels").get<Index>();
    c.discriminator.leak = d.at("leak").get<double>();
    c.discriminator.seed = d.at("seed").get<std::uint64_t>();
    const auto& e = j.at("extractor");
    c.extractor.image_channels = e.at("image_channels").get<Index>();
    c.extractor.base_width = e.at("base_width").get<Index>();
    c.extractor.seed = e.at("seed").get<std::uint64_t>();
    c.perceptual.feature_tags = j.at("perceptual").at("feature_tags").get<std::vector<std::string>>();
    c.perceptual.style_tag = j.at("perceptual").at("style_tag").get<std::string>();
    c.sigma = j.at("sigma").get<double>();
    c.image_size = j.at("image_size").get<Index>();
    return c;
  } catch (const nlohmann::json::exception& ex) {
    throw checkpoint_error(std::string("checkpoint model config is incomplete: ") + ex.what());
  }
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"lambda_adv", c.weights.adv},
          {"lambda_pix", c.weights.pix},
          {"lambda_cyc", c.weights.cyc},
          {"lambda_rec", c.weights.rec},
          {"lambda_pp", c.weights.pp},
          {"lambda_tv", c.weights.tv},
          {"learning_rate", c.adam.learning_rate},
          {"adam_beta1", c.adam.beta1},
          {"adam_beta2", c.adam.beta2},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"iterations_per_epoch", c.iterations_per_epoch},
          {"d_steps", c.d_steps},
          {"seed", c.seed},
          {"enable_rec", c.enable_rec}};
}

TrainingState::TrainingState(const ModelConfig& model, const TrainConfig& train)
    : generator((model.validate(), model.generator)),
      discriminator(model.discriminator),
      extractor(model.extractor),
      generator_optimizer(generator.parameters(), train.adam),
      discriminator_optimizer(discriminator.parameters(), train.adam),
      model_(model) {}

BatchTensors batch_tensors(const Batch& batch, const ConditionEncoder<float>& encoder) {
  BatchTensors t;
  t.input = constant(stack_images<float>(batch.input));
  t.target = constant(stack_images<float>(batch.target));
  t.input_condition = constant(encoder(batch.input_shapes));
  t.target_condition = constant(encoder(batch.target_shapes));
  t.second_condition = constant(encoder(batch.second_targets));
  return t;
}

GeneratorObjective generator_objective(const TrainingState& state, const BatchTensors& b, const TrainConfig& cfg) {
  const LossWeights& w = cfg.weights;
  const Translator<float> g = state.generator.translator();
  const Var<float> fake = g(b.input, b.target_condition);

  const Var<float> adv = hinge_generator_loss(state.discriminator.discriminate(fake));
  const Var<float> pix = pixel_loss(fake, b.target);
  const Var<float> cyc = mse(g(fake, b.input_condition), b.input);
  const PerceptualTerms<float> pp = perceptual_loss<float>(state.extractor, fake, b.target, state.model_config().perceptual);
  const Var<float> tv = tv_loss(fake);

  GeneratorObjective obj;
  obj.terms.adv = adv.item();
  obj.terms.pix = pix.item();
  obj.terms.cyc = cyc.item();
  obj.terms.pp_feature = pp.feature.item();
  obj.terms.pp_style = pp.style.item();
  obj.terms.tv = tv.item();

  auto weighted = [](const Var<float>& v, double lambda) { return scale(v, static_cast<float>(lambda)); };
  Var<float> total = weighted(adv, w.adv);
  total = add(total, weighted(pix, w.pix));
  total = add(total, weighted(cyc, w.cyc));
  if (cfg.enable_rec) {
    const Var<float> rec = mse(g(fake, b.second_condition), g(b.input, b.second_condition));
    obj.terms.rec = rec.item();
    total = add(total, weighted(rec, w.rec));
  }
  total = add(total, weighted(add(pp.feature, pp.style), w.pp));
  total = add(total, weighted(tv, w.tv));
  obj.total = total;
  return obj;
}

namespace {

std::string iteration_prefix(const TrainingState& state) {
  return "iteration " + std::to_string(state.iteration + 1) + ": ";
}

}  // namespace

double discriminator_phase(TrainingState& state, const BatchTensors& b, const TrainConfig& cfg) {
  Var<float> fake;
  {
    NoGradGuard no_grad;
    fake = detach(state.generator.generate(b.input, b.target_condition).composite);
  }
  double adv_d = 0.0;
  for (Index k = 0; k < cfg.d_steps; ++k) {
    const Var<float> d_loss =
        hinge_discriminator_loss(state.discriminator.discriminate(b.target), state.discriminator.discriminate(fake));
    adv_d = d_loss.item();
    if (!std::isfinite(adv_d)) throw invalid_state_error(iteration_prefix(state) + "non-finite loss term adv_d");
    d_loss.backward();
    state.discriminator_optimizer.step();
  }
  return adv_d;
}

LossReport generator_phase(TrainingState& state, const BatchTensors& b, const TrainConfig& cfg) {
  const GeneratorObjective obj = generator_objective(state, b, cfg);
  LossReport report;
  try {
    report = total_generator_loss(obj.terms, cfg.weights);
  } catch (const invalid_state_error& e) {
    throw invalid_state_error(iteration_prefix(state) + e.what());
  }
  obj.total.backward();
  state.generator_optimizer.step();
  state.discriminator.zero_grad();
  return report;
}

LossReport train_step(TrainingState& state, const Batch& batch, const TrainConfig& cfg) {
  if (static_cast<Index>(batch.size()) != cfg.batch_size) {
    throw std::invalid_argument("batch has " + std::to_string(batch.size()) + " elements, config expects " +
                                std::to_string(cfg.batch_size));
  }
  const BatchTensors b = batch_tensors(batch, state.encoder());
  const double adv_d = discriminator_phase(state, b, cfg);
  LossReport report = generator_phase(state, b, cfg);
  report.adv_d = adv_d;
  ++state.iteration;
  return report;
}

TrainingData make_training_data(const Corpus& corpus, double margin, Index out_size, Index pairs_per_video,
                                const AugmentationRanges& ranges, std::uint64_t seed) {
  TrainingData data;
  data.samples = prepare_samples(corpus, margin, out_size);
  auto pairs = build_video_pairs(corpus, pairs_per_video, seed);
  data.sampler = std::make_unique<PairSampler>(data.samples, std::move(pairs), corpus.stills(), ranges, seed + 1);
  return data;
}

Checkpoint make_checkpoint(const TrainingState& state, const TrainConfig& cfg, const PairSampler* sampler) {
  Checkpoint ckpt;
  ckpt.manifest["model"] = model_config_to_json(state.model_config());
  ckpt.manifest["train"] = train_config_to_json(cfg);
  ckpt.manifest["iteration"] = state.iteration;
  ckpt.manifest["epoch"] = state.iteration / cfg.iterations_per_epoch;
  ckpt.manifest["seed"] = cfg.seed;
  if (sampler) ckpt.manifest["sampler_rng"] = sampler->rng_state();
  export_parameters(state.generator, "generator.", ckpt);
  export_parameters(state.discriminator, "discriminator.", ckpt);
  export_optimizer(state.generator_optimizer, "generator_adam.", ckpt);
  export_optimizer(state.discriminator_optimizer, "discriminator_adam.", ckpt);
  return ckpt;
}

void restore_checkpoint(const Checkpoint& ckpt, TrainingState& state, PairSampler* sampler) {
  import_parameters(state.generator, "generator.", ckpt);
  import_parameters(state.discriminator, "discriminator.", ckpt);
  import_optimizer(state.generator_optimizer, "generator_adam.", ckpt);
  import_optimizer(state.discriminator_optimizer, "discriminator_adam.", ckpt);
  state.iteration = ckpt.manifest.at("iteration").get<std::int64_t>();
  if (sampler) {
    if (!ckpt.manifest.contains("sampler_rng")) throw checkpoint_error("checkpoint has no sampler state to resume from");
    sampler->set_rng_state(ckpt.manifest.at("sampler_rng").get<std::string>());
  }
}

std::unique_ptr<TrainingState> load_model(const fs::path& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  if (!ckpt.manifest.contains("model")) throw checkpoint_error(path.string() + " has no model config");
  const ModelConfig model = model_config_from_json(ckpt.manifest.at("model"));
  auto state = std::make_unique<TrainingState>(model, TrainConfig{});
  import_parameters(state->generator, "generator.", ckpt);
  if (ckpt.manifest.contains("iteration")) state->iteration = ckpt.manifest.at("iteration").get<std::int64_t>();
  return state;
}

std::string loss_log_row(std::int64_t iteration, const LossReport& r) {
  const LossTerms& t = r.terms;
  std::string row = std::to_string(iteration);
  for (double v : {r.adv_d, t.adv, t.pix, t.cyc, t.rec, t.pp_feature, t.pp_style, t.tv, r.total}) {
    row += ',' + format_double(v);
  }
  return row;
}

namespace {

void require_writable(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path probe = dir / ".write_probe";
  std::ofstream out(probe);
  if (ec || !out) throw std::runtime_error("checkpoint directory " + dir.string() + " is not writable");
  out.close();
  fs::remove(probe, ec);
}

// Keeps the header and every row up to and including `iteration`.
void truncate_log(const fs::path& log, std::int64_t iteration) {
  std::vector<std::string> kept;
  std::ifstream in(log);
  std::string line;
  while (std::getline(in, line)) {
    if (kept.empty()) {
      kept.push_back(line);
      continue;
    }
    if (line.empty()) continue;
    if (std::stoll(line.substr(0, line.find(','))) <= iteration) kept.push_back(line);
  }
  in.close();
  std::ofstream out(log, std::ios::trunc);
  for (const auto& l : kept) out << l << '\n';
}

std::string epoch_name(std::int64_t epoch) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "checkpoint_epoch_%04lld.gck", static_cast<long long>(epoch));
  return buf;
}

}  // namespace

fs::path train_loop(TrainingState& state, PairSampler& sampler, const TrainConfig& cfg, const fs::path& dir,
                    const TrainLoopOptions& options) {
  cfg.validate();
  require_writable(dir);
  const fs::path log = dir / "loss_log.csv";
  if (options.resume_from) {
    restore_checkpoint(load_checkpoint(*options.resume_from), state, &sampler);
    if (fs::exists(log)) truncate_log(log, state.iteration);
    log_notice("resuming at iteration " + std::to_string(state.iteration));
  }
  if (!fs::exists(log) || fs::file_size(log) == 0) {
    std::ofstream(log, std::ios::trunc) << kLossLogHeader << '\n';
  }
  std::ofstream out(log, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + log.string());

  const std::int64_t total = cfg.epochs * cfg.iterations_per_epoch;
  fs::path last;
  while (state.iteration < total) {
    const Batch batch = sampler.next_batch(cfg.batch_size);
    LossReport report;
    try {
      report = train_step(state, batch, cfg);
    } catch (const invalid_state_error&) {
      const fs::path dump = dir / ("abort_iteration_" + std::to_string(state.iteration + 1) + ".gck");
      save_checkpoint(dump, make_checkpoint(state, cfg, &sampler));
      log_warning("state before the failing step saved to " + dump.string());
      throw;
    }
    out << loss_log_row(state.iteration, report) << '\n';
    if (state.iteration % cfg.iterations_per_epoch == 0) {
      out.flush();
      last = dir / epoch_name(state.iteration / cfg.iterations_per_epoch);
      save_checkpoint(last, make_checkpoint(state, cfg, &sampler));
      if (!options.quiet) {
        log_notice("epoch " + std::to_string(state.iteration / cfg.iterations_per_epoch) + " done, total loss " +
                   format_double(report.total));
      }
    }
  }
  if (last.empty()) {
    last = dir / epoch_name(state.iteration / cfg.iterations_per_epoch);
    save_checkpoint(last, make_checkpoint(state, cfg, &sampler));
  }
  return last;
}

}  // namespace gannotation
