#include "cli.hpp"

#include "gannotation/config.hpp"
#include "gannotation/error.hpp"
#include "gannotation/evaluation.hpp"
#include "gannotation/image_io.hpp"
#include "gannotation/log.hpp"
#include "gannotation/shape_model.hpp"
#include "gannotation/toy_corpus.hpp"
#include "gannotation/training.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>

namespace gannotation::cli {

namespace fs = std::filesystem;

namespace {

/// Thrown for problems the user must fix (exit 2).
class usage_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

int run_guarded(const char* command, const std::function<void()>& body) {
  try {
    body();
    return kSuccess;
  } catch (const config_error& e) {
    log_warning(std::string(command) + ": " + e.what());
    return kUsageError;
  } catch (const usage_error& e) {
    log_warning(std::string(command) + ": " + e.what());
    return kUsageError;
  } catch (const std::invalid_argument& e) {
    log_warning(std::string(command) + ": " + e.what());
    return kUsageError;
  } catch (const std::exception& e) {
    log_warning(std::string(command) + ": " + e.what());
    return kRuntimeFailure;
  }
}

struct SourceFrame {
  Image image;  // [-1, 1], model resolution
  std::optional<LandmarkSet> shape;
  CropMap map;  // source pixels -> model frame
};

SourceFrame load_source(const fs::path& image_path, const std::optional<fs::path>& pts, double margin, Index size) {
  const Image raw = read_image(image_path);
  SourceFrame f;
  if (pts) {
    CropResult crop = crop_by_landmarks(raw, read_pts(*pts), margin, size);
    f.image = to_signed_range(crop.image);
    f.shape = std::move(crop.shape);
    f.map = crop.map;
  } else {
    f.image = to_signed_range(resize_bilinear(raw, size, size));
    f.map.scale = Eigen::Vector2d(static_cast<double>(size) / raw.width, static_cast<double>(size) / raw.height);
    f.map.offset = 0.5 * f.map.scale - Eigen::Vector2d::Constant(0.5);
  }
  return f;
}

void require_points(const LandmarkSet& s, Index expected, const std::string& what) {
  if (s.size() != expected) {
    throw usage_error(what + " has " + std::to_string(s.size()) + " points, the checkpoint expects " +
                      std::to_string(expected));
  }
}

Image synthesize_one(const TrainingState& state, const Image& source, const LandmarkSet& target) {
  return translate_all(state.generator.translator(), state.encoder(), {source}, {target}).front();
}

void write_output(const fs::path& path, const Image& signed_image) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_image(path, to_unit_range(signed_image));
}

fs::path overlay_path(const fs::path& out) {
  fs::path p = out;
  p.replace_filename(out.stem().string() + "_overlay" + out.extension().string());
  return p;
}

std::vector<fs::path> pts_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw usage_error("sequence directory " + dir.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".pts") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw usage_error("no .pts files in " + dir.string());
  return files;
}

std::unique_ptr<TrainingState> open_model(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw usage_error("checkpoint " + path.string() + " does not exist");
  return load_model(path);
}

struct EvalSet {
  std::vector<Image> images;
  std::vector<LandmarkSet> shapes;
};

EvalSet load_eval_set(const fs::path& manifest, const RunConfig& cfg, Index size, const char* key) {
  if (manifest.empty()) throw config_error(key, "required by this protocol");
  const Corpus corpus = load_corpus(manifest);
  auto samples = prepare_samples(corpus, cfg.margin, size);
  if (cfg.eval.max_images > 0 && static_cast<Index>(samples.size()) > cfg.eval.max_images) {
    samples.resize(static_cast<std::size_t>(cfg.eval.max_images));
  }
  EvalSet set;
  for (auto& s : samples) {
    set.images.push_back(std::move(s.image));
    set.shapes.push_back(std::move(s.shape));
  }
  return set;
}

}  // namespace

int cmd_train(const TrainOptions& o) {
  return run_guarded("train", [&] {
    const RunConfig cfg = load_run_config(o.config);
    if (cfg.train_manifest.empty()) throw config_error("train_manifest", "required for training");
    // Surface an unwritable output directory before any data loading.
    {
      std::error_code ec;
      fs::create_directories(o.out_dir, ec);
      std::ofstream probe(o.out_dir / ".write_probe");
      if (ec || !probe) throw std::runtime_error("output directory " + o.out_dir.string() + " is not writable");
      probe.close();
      fs::remove(o.out_dir / ".write_probe", ec);
    }
    const Corpus corpus = load_corpus(cfg.train_manifest);
    if (corpus.point_count != cfg.model.point_count()) {
      throw config_error("n_points", "corpus landmarks have " + std::to_string(corpus.point_count) + " points");
    }
    TrainingData data = make_training_data(corpus, cfg.margin, cfg.model.image_size, cfg.pairs_per_video,
                                           cfg.augmentation, cfg.train.seed);
    TrainingState state(cfg.model, cfg.train);
    std::ofstream(o.out_dir / "config_echo.txt") << format_run_config(cfg);
    TrainLoopOptions loop;
    loop.resume_from = o.resume;
    const fs::path last = train_loop(state, *data.sampler, cfg.train, o.out_dir, loop);
    fs::copy_file(last, o.out_dir / "final.gck", fs::copy_options::overwrite_existing);
    log_notice("wrote " + (o.out_dir / "final.gck").string());
  });
}

int cmd_synthesize(const SynthesizeOptions& o) {
  return run_guarded("synthesize", [&] {
    if (o.target_pts.has_value() == o.shape_model.has_value()) {
      throw usage_error("give exactly one of --target-pts or --shape-model");
    }
    const auto state = open_model(o.checkpoint);
    const Index size = state->model_config().image_size;
    const Index n = state->model_config().point_count();
    const SourceFrame src = load_source(o.image, o.image_pts, o.margin, size);
    if (src.shape) require_points(*src.shape, n, o.image_pts->string());

    LandmarkSet target;
    if (o.target_pts) {
      const LandmarkSet raw = read_pts(*o.target_pts);
      require_points(raw, n, o.target_pts->string());
      target = src.map.forward(raw);
    } else {
      const ShapeModel model = load_shape_model(*o.shape_model);
      require_points(model.mean_shape, n, o.shape_model->string());
      if (static_cast<Index>(o.params.size()) != model.rank()) {
        throw usage_error("--params needs " + std::to_string(model.rank()) + " values");
      }
      const Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(o.params.data(), static_cast<Index>(o.params.size()));
      RigidTransform t;
      if (o.rigid) {
        if (o.rigid->size() != 4) throw usage_error("--rigid needs rotation,scale,tx,ty");
        t.rotation = (*o.rigid)[0];
        t.scale = (*o.rigid)[1];
        t.translation = Eigen::Vector2d((*o.rigid)[2], (*o.rigid)[3]);
        t.validate();
      } else if (src.shape) {
        t = align_similarity(model.mean_shape, *src.shape);
      } else {
        throw usage_error("--shape-model needs --rigid or --image-pts to place the shape");
      }
      target = synthesize_shape(model, p, t);
    }
    const Image out = synthesize_one(*state, src.image, target);
    write_output(o.out, out);
    if (o.overlay) write_image(overlay_path(o.out), overlay_landmarks(to_unit_range(out), target));
  });
}

int cmd_annotate(const AnnotateOptions& o) {
  return run_guarded("annotate", [&] {
    if (o.mode != "o2m" && o.mode != "prog") throw usage_error("--mode must be o2m or prog");
    const auto files = pts_files(o.sequence_dir);
    const auto state = open_model(o.checkpoint);
    const Index size = state->model_config().image_size;
    const Index n = state->model_config().point_count();
    const SourceFrame src = load_source(o.image, o.image_pts, o.margin, size);
    fs::create_directories(o.out_dir);
    Image prev = src.image;
    for (std::size_t k = 0; k < files.size(); ++k) {
      const LandmarkSet raw = read_pts(files[k]);
      require_points(raw, n, files[k].string());
      const LandmarkSet target = src.map.forward(raw);
      const Image frame = synthesize_one(*state, o.mode == "prog" ? prev : src.image, target);
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%04zu.png", k + 1);
      write_output(o.out_dir / name, frame);
      if (o.overlay) write_image(overlay_path(o.out_dir / name), overlay_landmarks(to_unit_range(frame), target));
      prev = frame;
    }
    log_notice("wrote " + std::to_string(files.size()) + " frames to " + o.out_dir.string());
  });
}

int cmd_evaluate(const EvaluateOptions& o) {
  return run_guarded("evaluate", [&] {
    if (o.protocol != "fid" && o.protocol != "progressive" && o.protocol != "robustness") {
      throw usage_error("unknown protocol '" + o.protocol + "' (expected fid, progressive or robustness)");
    }
    const RunConfig cfg = load_run_config(o.config, false);
    const auto state = open_model(o.checkpoint);
    const Index size = state->model_config().image_size;
    if (o.out.has_parent_path()) fs::create_directories(o.out.parent_path());
    const Translator<float> g = state->generator.translator();

    if (o.protocol == "fid") {
      const EvalSet a = load_eval_set(cfg.eval.manifest, cfg, size, "eval_manifest");
      const EvalSet b = load_eval_set(cfg.eval.manifest_b, cfg, size, "eval_manifest_b");
      const double value = fid(state->extractor, a.images, b.images);
      std::ofstream out(o.out);
      if (!out) throw std::runtime_error("cannot write " + o.out.string());
      out << "set_a,set_b,fid\n"
          << cfg.eval.manifest.filename().string() << ',' << cfg.eval.manifest_b.filename().string() << ','
          << format_csv_number(value) << '\n';
    } else if (o.protocol == "progressive") {
      const EvalSet set = load_eval_set(cfg.eval.manifest, cfg, size, "eval_manifest");
      if (cfg.eval.sequence_dir.empty()) throw config_error("eval_sequence_dir", "required by the progressive protocol");
      std::vector<std::vector<LandmarkSet>> targets;
      for (const auto& f : pts_files(cfg.eval.sequence_dir)) {
        const LandmarkSet t = read_pts(f);
        require_points(t, state->model_config().point_count(), f.string());
        targets.emplace_back(set.images.size(), t);
      }
      const ProtocolReport report = progressive_protocol(g, state->encoder(), state->extractor, set.images, targets);
      write_protocol_csv(o.out, report);
      if (o.montage) write_image(*o.montage, protocol_montage(set.images, report));
    } else {
      const EvalSet set = load_eval_set(cfg.eval.manifest, cfg, size, "eval_manifest");
      RobustnessOptions ro;
      ro.rotation_deg = cfg.eval.robustness_rotation_deg;
      ro.seed = cfg.eval.seed;
      write_robustness_csv(o.out, robustness_protocol(g, state->encoder(), state->extractor, set.images, set.shapes,
                                                      cfg.eval.robustness_sigmas, ro));
    }
    log_notice("wrote " + o.out.string());
  });
}

int cmd_fit_shape_model(const FitShapeModelOptions& o) {
  return run_guarded("fit-shape-model", [&] {
    const Corpus corpus = load_corpus(o.manifest);
    std::vector<LandmarkSet> shapes;
    for (const auto& s : corpus.samples) shapes.push_back(s.landmarks);
    std::optional<Index> pose;
    if (o.pose_index) pose = *o.pose_index;
    const ShapeModel model = fit_shape_model(shapes, o.rank, pose);
    save_shape_model(o.out, model);
    log_notice("shape model with " + std::to_string(model.rank()) + " modes, pose mode " +
               std::to_string(model.pose_index) + ", written to " + o.out.string());
  });
}

int cmd_toy_corpus(const ToyCorpusOptions& o) {
  return run_guarded("toy-corpus", [&] {
    ToyCorpusConfig cfg;
    cfg.identities = o.identities;
    cfg.frames_per_identity = o.frames;
    cfg.stills = o.stills;
    cfg.image_size = o.size;
    cfg.seed = o.seed;
    if (cfg.identities < 0 || cfg.frames_per_identity < 0 || cfg.stills < 0 || cfg.image_size < 8) {
      throw usage_error("toy corpus counts must be non-negative and size >= 8");
    }
    const fs::path manifest = write_toy_corpus(o.out_dir, cfg);
    log_notice("wrote " + manifest.string());
  });
}

}  // namespace gannotation::cli
