#include "support.hpp"

#include "cli.hpp"
#include "gannotation/image_io.hpp"
#include "gannotation/shape_model.hpp"
#include "gannotation/toy_corpus.hpp"

#include <doctest.h>

using namespace gannotation;
using namespace gannotation::testing;
using namespace gannotation::cli;
namespace fs = std::filesystem;

namespace {

std::string toy_config(const fs::path& manifest) {
  return "train_manifest = " + manifest.string() +
         "\n"
         "n_points = 8\n"
         "out_size = 32\n"
         "sigma = 1.5\n"
         "margin = 4\n"
         "pairs_per_video = 10\n"
         "gen_base_width = 4\n"
         "gen_n_residual = 1\n"
         "disc_base_width = 4\n"
         "disc_n_down = 3\n"
         "batch_size = 2\n"
         "epochs = 1\n"
         "iterations_per_epoch = 2\n"
         "seed = 5\n";
}

/// A toy corpus and a two-iteration model trained through cmd_train.
struct Workspace {
  fs::path dir, manifest, config, checkpoint;
  std::vector<fs::path> images, pts;
};

const Workspace& workspace() {
  static const Workspace ws = [] {
    Workspace w;
    w.dir = fresh_dir("cli");
    ToyCorpusConfig toy;
    toy.identities = 2;
    toy.frames_per_identity = 4;
    toy.stills = 4;
    CaptureStderr quiet;
    w.manifest = write_toy_corpus(w.dir / "corpus", toy);
    for (const auto& s : load_corpus(w.manifest).samples) {
      w.images.push_back(s.image_path);
      w.pts.push_back(s.pts_path);
    }
    w.config = w.dir / "run.cfg";
    write_file(w.config, toy_config(w.manifest));
    w.checkpoint = w.dir / "run" / "final.gck";
    REQUIRE(cmd_train({w.config, w.dir / "run", std::nullopt}) == kSuccess);
    return w;
  }();
  return ws;
}

fs::path sequence_dir(const std::string& name, std::size_t count) {
  const auto& ws = workspace();
  const fs::path dir = ws.dir / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  for (std::size_t k = 0; k < count; ++k) {
    char file[32];
    std::snprintf(file, sizeof(file), "t%02zu.pts", k);
    fs::copy_file(ws.pts[k + 1], dir / file);
  }
  return dir;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

fs::path eval_config(const std::string& name, const std::string& extra) {
  const auto& ws = workspace();
  const fs::path p = ws.dir / (name + ".cfg");
  write_file(p, "margin = 4\neval_manifest = " + ws.manifest.string() + "\neval_max_images = 4\n" + extra);
  return p;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("train writes checkpoints, the loss log and the config echo") {
  const auto& ws = workspace();
  CHECK(fs::is_regular_file(ws.checkpoint));
  CHECK(fs::is_regular_file(ws.dir / "run" / "checkpoint_epoch_0001.gck"));
  CHECK(fs::is_regular_file(ws.dir / "run" / "config_echo.txt"));
  CHECK(lines(read_file(ws.dir / "run" / "loss_log.csv")).size() == 3);
  CHECK(load_model(ws.checkpoint)->model_config().image_size == 32);
}

TEST_CASE("train reports a misspelled key with exit 2") {
  const auto& ws = workspace();
  const fs::path cfg = ws.dir / "typo.cfg";
  write_file(cfg, toy_config(ws.manifest) + "lamda_pix = 3\n");
  CaptureStderr err;
  CHECK(cmd_train({cfg, ws.dir / "typo_run", std::nullopt}) == kUsageError);
  CHECK(err.text().find("lamda_pix") != std::string::npos);
  CHECK_FALSE(fs::exists(ws.dir / "typo_run" / "loss_log.csv"));
}

TEST_CASE("train with an unwritable output directory exits 1 before training") {
  const auto& ws = workspace();
  write_file(ws.dir / "blocker", "x");
  CaptureStderr err;
  CHECK(cmd_train({ws.config, ws.dir / "blocker" / "run", std::nullopt}) == kRuntimeFailure);
  CHECK(err.text().find("not writable") != std::string::npos);
  CHECK(err.text().find("loaded") == std::string::npos);
}

TEST_CASE("train with a missing manifest is a runtime failure") {
  const auto& ws = workspace();
  const fs::path cfg = ws.dir / "nomanifest.cfg";
  write_file(cfg, "train_manifest = missing.tsv\nn_points = 8\n");
  CaptureStderr err;
  CHECK(cmd_train({cfg, ws.dir / "nomanifest_run", std::nullopt}) != kSuccess);
}

TEST_CASE("synthesize at 128 pixels with an overlay") {
  const auto& ws = workspace();
  ModelConfig m;
  m.generator.condition_channels = kToyPointCount;
  m.generator.base_width = 4;
  m.generator.n_residual = 1;
  m.discriminator.base_width = 4;
  m.extractor.base_width = 4;
  TrainingState state(m, TrainConfig{});
  const fs::path ckpt = ws.dir / "untrained128.gck";
  save_checkpoint(ckpt, make_checkpoint(state, TrainConfig{}, nullptr));

  SynthesizeOptions o;
  o.checkpoint = ckpt;
  o.image = ws.images[0];
  o.image_pts = ws.pts[0];
  o.margin = 4;
  o.target_pts = ws.pts[1];
  o.out = ws.dir / "syn" / "out.png";
  o.overlay = true;
  CaptureStderr quiet;
  REQUIRE(cmd_synthesize(o) == kSuccess);
  const Image out = read_image(o.out);
  CHECK(out.width == 128);
  CHECK(out.height == 128);
  CHECK(out.channels == 3);
  const Image overlay = read_image(ws.dir / "syn" / "out_overlay.png");
  CHECK(overlay.width == 128);
  CHECK((overlay.data != out.data).any());
}

TEST_CASE("synthesize rejects a wrong point count and ambiguous targets") {
  const auto& ws = workspace();
  const fs::path bad = ws.dir / "five.pts";
  write_pts(bad, LandmarkSet(Points2d::Constant(5, 2, 10.0)));
  SynthesizeOptions o;
  o.checkpoint = ws.checkpoint;
  o.image = ws.images[0];
  o.out = ws.dir / "syn_bad.png";
  CaptureStderr err;
  o.target_pts = bad;
  CHECK(cmd_synthesize(o) == kUsageError);
  CHECK(err.text().find("5 points") != std::string::npos);
  o.target_pts.reset();
  CHECK(cmd_synthesize(o) == kUsageError);
  o.target_pts = ws.pts[1];
  o.shape_model = ws.dir / "any.json";
  CHECK(cmd_synthesize(o) == kUsageError);
  o.shape_model.reset();
  o.checkpoint = ws.dir / "missing.gck";
  CHECK(cmd_synthesize(o) == kUsageError);
  CHECK_FALSE(fs::exists(o.out));
}

TEST_CASE("synthesize from a fitted shape model") {
  const auto& ws = workspace();
  const fs::path model = ws.dir / "shape.json";
  CaptureStderr quiet;
  REQUIRE(cmd_fit_shape_model({ws.manifest, 3, std::nullopt, model}) == kSuccess);
  SynthesizeOptions o;
  o.checkpoint = ws.checkpoint;
  o.image = ws.images[0];
  o.image_pts = ws.pts[0];
  o.margin = 4;
  o.shape_model = model;
  o.params = {0.5, 0.0, 0.0};
  o.out = ws.dir / "syn_model.png";
  CHECK(cmd_synthesize(o) == kSuccess);
  CHECK(read_image(o.out).width == 32);
  o.params = {0.5};
  CHECK(cmd_synthesize(o) == kUsageError);
}

TEST_CASE("annotate writes one frame per target in both modes") {
  const auto& ws = workspace();
  const fs::path seq = sequence_dir("seq5", 5);
  AnnotateOptions o;
  o.checkpoint = ws.checkpoint;
  o.image = ws.images[0];
  o.image_pts = ws.pts[0];
  o.margin = 4;
  o.sequence_dir = seq;
  CaptureStderr quiet;
  o.mode = "o2m";
  o.out_dir = ws.dir / "ann_o2m";
  REQUIRE(cmd_annotate(o) == kSuccess);
  o.mode = "prog";
  o.out_dir = ws.dir / "ann_prog";
  REQUIRE(cmd_annotate(o) == kSuccess);
  for (int k = 1; k <= 5; ++k) {
    const std::string name = "frame_000" + std::to_string(k) + ".png";
    CHECK(fs::is_regular_file(ws.dir / "ann_o2m" / name));
    CHECK(fs::is_regular_file(ws.dir / "ann_prog" / name));
  }
  CHECK_FALSE(fs::exists(ws.dir / "ann_o2m" / "frame_0006.png"));
  CHECK(read_file(ws.dir / "ann_o2m" / "frame_0001.png") == read_file(ws.dir / "ann_prog" / "frame_0001.png"));
  CHECK(read_file(ws.dir / "ann_o2m" / "frame_0002.png") != read_file(ws.dir / "ann_prog" / "frame_0002.png"));
}

TEST_CASE("annotate rejects an empty sequence and unknown modes") {
  const auto& ws = workspace();
  AnnotateOptions o;
  o.checkpoint = ws.checkpoint;
  o.image = ws.images[0];
  o.sequence_dir = sequence_dir("seq0", 0);
  o.out_dir = ws.dir / "ann_empty";
  CaptureStderr err;
  CHECK(cmd_annotate(o) == kUsageError);
  CHECK(err.text().find("no .pts files") != std::string::npos);
  o.sequence_dir = sequence_dir("seq1", 1);
  o.mode = "sideways";
  CHECK(cmd_annotate(o) == kUsageError);
}

TEST_CASE("evaluate fid of a set against itself is zero") {
  const auto& ws = workspace();
  const fs::path cfg = eval_config("fid", "eval_manifest_b = " + ws.manifest.string() + "\n");
  CaptureStderr quiet;
  REQUIRE(cmd_evaluate({ws.checkpoint, "fid", cfg, ws.dir / "fid.csv", std::nullopt}) == kSuccess);
  const auto rows = lines(read_file(ws.dir / "fid.csv"));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == "set_a,set_b,fid");
  CHECK(rows[1] == "manifest.tsv,manifest.tsv,0.0");
}

TEST_CASE("evaluate robustness has one row per sigma") {
  const auto& ws = workspace();
  const fs::path cfg = eval_config("rob", "robustness_sigmas = 0,1,2,3\n");
  CaptureStderr quiet;
  REQUIRE(cmd_evaluate({ws.checkpoint, "robustness", cfg, ws.dir / "rob.csv", std::nullopt}) == kSuccess);
  const auto rows = lines(read_file(ws.dir / "rob.csv"));
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == "sigma,fid");
  CHECK(rows[1].rfind("0.0,", 0) == 0);
  CHECK(rows[4].rfind("3.0,", 0) == 0);
}

TEST_CASE("evaluate progressive reports both protocols per step") {
  const auto& ws = workspace();
  const fs::path cfg = eval_config("prog", "eval_sequence_dir = " + sequence_dir("seq2", 2).string() + "\n");
  CaptureStderr quiet;
  const fs::path montage = ws.dir / "prog_montage.png";
  REQUIRE(cmd_evaluate({ws.checkpoint, "progressive", cfg, ws.dir / "prog.csv", montage}) == kSuccess);
  const auto rows = lines(read_file(ws.dir / "prog.csv"));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "step,fid_o2m,fid_progressive,reversion,prog_vs_o2m_mse");
  CHECK(rows[1].rfind("1,", 0) == 0);
  CHECK(rows[2].rfind("2,", 0) == 0);
  const Image m = read_image(montage);
  CHECK(m.width == 4 * 32 + 3);
  CHECK(m.height == 5 * 32 + 4);
}

TEST_CASE("evaluate rejects unknown protocols and missing inputs") {
  const auto& ws = workspace();
  const fs::path cfg = eval_config("reject", "");
  CaptureStderr err;
  CHECK(cmd_evaluate({ws.checkpoint, "bleu", cfg, ws.dir / "bleu.csv", std::nullopt}) == kUsageError);
  CHECK(err.text().find("bleu") != std::string::npos);
  CHECK(cmd_evaluate({ws.checkpoint, "fid", cfg, ws.dir / "nob.csv", std::nullopt}) == kUsageError);
  CHECK(err.text().find("eval_manifest_b") != std::string::npos);
  CHECK(cmd_evaluate({ws.checkpoint, "progressive", cfg, ws.dir / "noseq.csv", std::nullopt}) == kUsageError);
  CHECK_FALSE(fs::exists(ws.dir / "bleu.csv"));
}

TEST_CASE("evaluate reruns are byte-identical") {
  const auto& ws = workspace();
  const fs::path cfg = eval_config("rerun", "robustness_sigmas = 0,2\neval_sequence_dir = " +
                                                sequence_dir("seq_rerun", 2).string() + "\n");
  CaptureStderr quiet;
  for (const std::string protocol : {"robustness", "progressive"}) {
    REQUIRE(cmd_evaluate({ws.checkpoint, protocol, cfg, ws.dir / "a.csv", std::nullopt}) == kSuccess);
    REQUIRE(cmd_evaluate({ws.checkpoint, protocol, cfg, ws.dir / "b.csv", std::nullopt}) == kSuccess);
    CHECK(read_file(ws.dir / "a.csv") == read_file(ws.dir / "b.csv"));
  }
}

TEST_CASE("fit-shape-model writes a loadable model") {
  const auto& ws = workspace();
  const fs::path out = ws.dir / "fit" / "model.json";
  fs::create_directories(out.parent_path());
  CaptureStderr quiet;
  REQUIRE(cmd_fit_shape_model({ws.manifest, 4, 2, out}) == kSuccess);
  const ShapeModel m = load_shape_model(out);
  CHECK(m.rank() == 4);
  CHECK(m.pose_index == 2);
  CHECK(m.mean_shape.size() == kToyPointCount);
  CHECK(cmd_fit_shape_model({ws.manifest, 4, 9, out}) == kUsageError);
  CHECK(cmd_fit_shape_model({ws.dir / "none.tsv", 4, std::nullopt, out}) != kSuccess);
}

TEST_CASE("toy-corpus writes the requested counts") {
  const auto& ws = workspace();
  const fs::path dir = ws.dir / "toy";
  CaptureStderr quiet;
  REQUIRE(cmd_toy_corpus({dir, 2, 3, 1, 24, 1}) == kSuccess);
  const Corpus c = load_corpus(dir / "manifest.tsv");
  CHECK(c.samples.size() == 7);
  CHECK(read_image(c.samples.front().image_path).width == 24);
  CHECK(cmd_toy_corpus({dir, -1, 3, 1, 24, 1}) == kUsageError);
  CHECK(cmd_toy_corpus({dir, 2, 3, 1, 4, 1}) == kUsageError);
}

}  // TEST_SUITE
