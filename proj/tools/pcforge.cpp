// pcforge: dataset generation, pose fitting, diffusion training/sampling,
// evaluation and rendering from the command line.

#include <iostream>

#include "CLI11.hpp"
#include "pcforge/app.hpp"

using namespace pcforge::app;

int main(int argc, char** argv) {
  CLI::App cli{"Projection-conditioned point cloud diffusion toolkit"};
  cli.require_subcommand(1);

  GenDatasetArgs gen;
  auto* g = cli.add_subcommand("gen-dataset", "Build a dataset directory from building geometry");
  auto* geom_opt = g->add_option("--geometry", gen.geometry, "Directory of <id>.obj/.vertices.txt/.faces.txt");
  auto* syn_opt = g->add_option("--synthetic", gen.synthetic, "Generate N synthetic buildings instead");
  geom_opt->excludes(syn_opt);
  g->add_option("--out", gen.out, "Dataset root")->required();
  g->add_option("--seed", gen.seed, "Seed")->capture_default_str();
  g->add_option("--points", gen.points, "Ground-truth points per cloud")->capture_default_str();
  g->add_option("--split", gen.split, "Split fractions, e.g. 0.8,0.1,0.1")->delimiter(',')->capture_default_str();

  PoseFitArgs pf;
  auto* p = cli.add_subcommand("pose-fit", "Fit camera translation of a cloud to a mask");
  p->add_option("--cloud", pf.cloud, "Point cloud (PLY)")->required();
  p->add_option("--mask", pf.mask, "Ground-truth mask (PGM)")->required();
  p->add_option("--t0", pf.t0, "Initial translation x,y,z")->delimiter(',')->capture_default_str();
  p->add_option("--out", pf.out, "Also write the report to this file");

  TrainArgs tr;
  auto* t = cli.add_subcommand("train", "Train the toy denoiser on a dataset");
  t->add_option("--dataset", tr.dataset, "Dataset root")->required();
  t->add_option("--mode", tr.mode, "ddpm or cdpm")->check(CLI::IsMember({"ddpm", "cdpm"}))->capture_default_str();
  t->add_option("--steps", tr.steps, "Optimizer steps")->capture_default_str();
  t->add_option("--T", tr.T, "Diffusion steps")->capture_default_str();
  t->add_option("--out", tr.out, "Checkpoint path")->required();
  t->add_option("--seed", tr.seed, "Seed")->capture_default_str();
  t->add_option("--batch", tr.batch, "Batch size")->capture_default_str();
  t->add_option("--lr", tr.lr, "Peak learning rate")->capture_default_str();
  t->add_option("--warmup", tr.warmup, "Linear warmup steps")->capture_default_str();
  t->add_option("--weight-decay", tr.weight_decay, "Decoupled weight decay")->capture_default_str();
  t->add_option("--hidden", tr.hidden, "Hidden layer widths, e.g. 64,64")->delimiter(',')->capture_default_str();
  t->add_option("--time-dim", tr.time_dim, "Time embedding width")->capture_default_str();
  t->add_option("--points", tr.points, "Points drawn per cloud per step (0 = all)")->capture_default_str();
  t->add_option("--split", tr.split, "Split tag to train on, or 'all'")->capture_default_str();
  t->add_flag("--fixed-draw", tr.fixed_draw, "Reuse one (t, noise) draw per batch slot");
  t->add_option("--fixed-t", tr.fixed_t, "Use this diffusion step for every draw (0 = random)")->capture_default_str();

  SampleArgs sa;
  auto* s = cli.add_subcommand("sample", "Reconstruct a cloud from a condition image");
  s->add_option("--ckpt", sa.ckpt, "Checkpoint")->required();
  s->add_option("--image", sa.image, "Grayscale image (PGM/PPM)")->required();
  s->add_option("--mask", sa.mask, "Mask (PGM)")->required();
  s->add_option("--sobel", sa.sobel, "Sobel map (float raw with JSON sidecar)")->required();
  s->add_option("--pose", sa.pose, "Camera translation x,y,z")->delimiter(',')->capture_default_str();
  s->add_option("--n", sa.n, "Number of points")->capture_default_str();
  s->add_option("--seed", sa.seed, "Seed")->capture_default_str();
  s->add_option("--out", sa.out, "Output PLY")->required();

  EvalArgs ev;
  auto* e = cli.add_subcommand("eval", "Chamfer distance and F-score");
  e->add_option("--pred", ev.pred, "Prediction PLY or directory")->required();
  e->add_option("--gt", ev.gt, "Ground-truth PLY or directory")->required();
  e->add_option("--tau", ev.tau, "F-score threshold")->capture_default_str();
  e->add_option("--out", ev.out, "Also write the JSON lines to this file");

  RenderArgs re;
  auto* r = cli.add_subcommand("render", "Z-buffered height render of a cloud");
  r->add_option("--cloud", re.cloud, "Point cloud (PLY)")->required();
  r->add_option("--pose", re.pose, "Camera translation x,y,z")->delimiter(',')->capture_default_str();
  r->add_option("--out", re.out, "Output PGM")->required();
  r->add_option("--splat", re.splat, "Splat radius in pixels")->capture_default_str();

  std::string replay_config, replay_out;
  auto* rp = cli.add_subcommand("replay", "Re-run a stored RunConfig");
  rp->add_option("config", replay_config, "RunConfig JSON")->required();
  rp->add_option("--out", replay_out, "Redirect the output path");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = cli.exit(err);
    return code == 0 ? kSuccess : kInputError;
  }

  apply_thread_limit(std::cerr);

  RunConfig rc;
  if (g->parsed()) rc = make_run_config(gen);
  else if (p->parsed()) rc = make_run_config(pf);
  else if (t->parsed()) rc = make_run_config(tr);
  else if (s->parsed()) rc = make_run_config(sa);
  else if (e->parsed()) rc = make_run_config(ev);
  else if (r->parsed()) rc = make_run_config(re);
  else {
    try {
      rc = RunConfig::read(replay_config);
    } catch (const std::exception& ex) {
      std::cerr << "error: " << ex.what() << "\n";
      return kInputError;
    }
  }
  return run(rc, std::cout, std::cerr, replay_out);
}
