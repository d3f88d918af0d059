#include "cli.hpp"

#include <CLI11.hpp>

using namespace gannotation::cli;

int main(int argc, char** argv) {
  CLI::App app{"Landmark-guided face synthesis: training, synthesis and evaluation"};
  app.require_subcommand(1);

  TrainOptions train;
  auto* t = app.add_subcommand("train", "Train a generator/discriminator pair from a config file");
  t->add_option("--config", train.config, "Run config (key = value lines)")->required();
  t->add_option("--out", train.out_dir, "Output directory for checkpoints and the loss log")->required();
  t->add_option("--resume", train.resume, "Checkpoint to resume from");

  SynthesizeOptions syn;
  auto* s = app.add_subcommand("synthesize", "Render one image at target landmarks");
  s->add_option("--checkpoint", syn.checkpoint, "Trained checkpoint")->required();
  s->add_option("--image", syn.image, "Source image (PNG)")->required();
  s->add_option("--image-pts", syn.image_pts, "Landmarks of the source image; the source is cropped around them");
  s->add_option("--margin", syn.margin, "Crop margin in pixels when --image-pts is given")->capture_default_str();
  auto* target = s->add_option("--target-pts", syn.target_pts, "Target landmarks in source image coordinates");
  auto* model = s->add_option("--shape-model", syn.shape_model, "Shape model JSON to synthesize the target from");
  s->add_option("--params", syn.params, "Non-rigid shape parameters (one per mode)")->delimiter(',')->needs(model);
  s->add_option("--rigid", syn.rigid, "rotation,scale,tx,ty placing the model shape in the output frame")
      ->delimiter(',')
      ->needs(model);
  target->excludes(model);
  s->add_option("--out", syn.out, "Output PNG")->required();
  s->add_flag("--overlay", syn.overlay, "Also write <out>_overlay.png with the target points drawn");

  AnnotateOptions ann;
  auto* a = app.add_subcommand("annotate", "Render one frame per .pts file of a sequence");
  a->add_option("--checkpoint", ann.checkpoint, "Trained checkpoint")->required();
  a->add_option("--image", ann.image, "Source image (PNG)")->required();
  a->add_option("--image-pts", ann.image_pts, "Landmarks of the source image; the source is cropped around them");
  a->add_option("--margin", ann.margin, "Crop margin in pixels when --image-pts is given")->capture_default_str();
  a->add_option("--sequence", ann.sequence_dir, "Directory of target .pts files, used in name order")->required();
  a->add_option("--out", ann.out_dir, "Output directory")->required();
  a->add_option("--mode", ann.mode, "o2m: every frame from the source; prog: frame k from frame k-1")
      ->check(CLI::IsMember({"o2m", "prog"}))
      ->capture_default_str();
  a->add_flag("--overlay", ann.overlay, "Also write overlay frames");

  EvaluateOptions ev;
  auto* e = app.add_subcommand("evaluate", "Run an evaluation protocol and write a CSV report");
  e->add_option("--checkpoint", ev.checkpoint, "Trained checkpoint")->required();
  e->add_option("--protocol", ev.protocol, "fid | progressive | robustness")->required();
  e->add_option("--config", ev.config, "Run config with the eval_* keys")->required();
  e->add_option("--out", ev.out, "Output CSV")->required();
  e->add_option("--montage", ev.montage, "Progressive protocol: also write a step x sample PNG grid");

  FitShapeModelOptions fit;
  auto* f = app.add_subcommand("fit-shape-model", "Fit a point-distribution model to the landmarks of a manifest");
  f->add_option("--manifest", fit.manifest, "Corpus manifest")->required();
  f->add_option("--rank", fit.rank, "Number of deformation modes")->capture_default_str();
  f->add_option("--pose-index", fit.pose_index, "Mode to treat as the pose parameter");
  f->add_option("--out", fit.out, "Output JSON")->required();

  ToyCorpusOptions toy;
  auto* c = app.add_subcommand("toy-corpus", "Write the procedural cartoon-face corpus");
  c->add_option("--out", toy.out_dir, "Output directory")->required();
  c->add_option("--identities", toy.identities, "Video identities")->capture_default_str();
  c->add_option("--frames", toy.frames, "Frames per identity")->capture_default_str();
  c->add_option("--stills", toy.stills, "Still images")->capture_default_str();
  c->add_option("--size", toy.size, "Image size in pixels")->capture_default_str();
  c->add_option("--seed", toy.seed, "Random seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kSuccess : kUsageError;
  }

  if (*t) return cmd_train(train);
  if (*s) return cmd_synthesize(syn);
  if (*a) return cmd_annotate(ann);
  if (*e) return cmd_evaluate(ev);
  if (*f) return cmd_fit_shape_model(fit);
  return cmd_toy_corpus(toy);
}
