#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "radarloc/data.hpp"
#include "radarloc/npy.hpp"
#include "radarloc/train_eval.hpp"

namespace fs = std::filesystem;
using namespace radarloc;

namespace {

// Relative output paths land under $RADARLOC_OUT_ROOT when it is set.
std::string resolve_out(const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  const char* root = std::getenv("RADARLOC_OUT_ROOT");
  if (!root || !*root) return path;
  return (fs::path(root) / path).string();
}

int run_convert(const std::string& manifest_path, const std::string& out_dir,
                int size, double alpha, const std::string& interp,
                const std::string& exec) {
  const data::DatasetManifest manifest = data::load_manifest(manifest_path);
  const auto seqs = data::load_dataset(manifest);
  const auto interp_mode = interp == "nearest" ? radar::Interp::nearest
                                               : radar::Interp::bilinear;
  const auto exec_mode = train::exec_from_string(exec);
  int total = 0;
  for (const data::LoadedSequence& seq : seqs) {
    const auto frames = data::convert_sequence(seq, size, size, alpha,
                                               interp_mode, exec_mode);
    const fs::path dir = fs::path(out_dir) / seq.entry.name;
    fs::create_directories(dir);
    for (const data::Frame& f : frames) {
      const fs::path file =
          dir / (std::to_string(f.image.timestamp) + ".npy");
      npy::write_npy(file.string(), f.image.pixels, npy::Dtype::f32);
      ++total;
    }
    std::printf("converted %s: %zu frames -> %s\n", seq.entry.name.c_str(),
                frames.size(), dir.string().c_str());
  }
  std::printf("wrote %d Cartesian images under %s\n", total, out_dir.c_str());
  return 0;
}

struct SimulateArgs {
  std::string out_dir = "dataset";
  std::string name = "synthetic";
  int landmarks = 30;
  double extent = 30.0;
  int frames = 64;
  double loop_radius = 18.0;
  double yaw_amplitude = 0.3;
  int traversals = 1;
  double noise = 0.0;
  int dynamic = 0;
  int m = 64, b = 64;
  double resolution = 1.0;
  std::uint64_t seed = 1;
};

int run_simulate(const SimulateArgs& a) {
  const data::SimWorld world =
      data::random_world(a.landmarks, a.extent, a.seed, a.dynamic, a.noise);
  const std::vector<pose::Pose> base =
      data::loop_trajectory(a.frames, a.loop_radius, a.yaw_amplitude);

  data::DatasetManifest manifest;
  manifest.root = a.out_dir;
  for (int k = 0; k < a.traversals; ++k) {
    data::SimParams params;
    params.M = a.m;
    params.B = a.b;
    params.resolution = a.resolution;
    params.seed = splitmix64(a.seed + 0x9000 + k);
    params.tag = a.noise > 0.0 ? "noisy" : "clear";
    params.split = (a.traversals > 1 && k == a.traversals - 1) ? "test"
                                                               : "train";
    const std::vector<pose::Pose> traj =
        k == 0 ? base
               : data::perturb_trajectory(base, 0.4, 0.05,
                                          splitmix64(a.seed + 0xa000 + k));
    const std::string seq_name =
        a.traversals > 1 ? a.name + "_t" + std::to_string(k) : a.name;
    manifest.sequences.push_back(data::generate_synthetic_sequence(
        world, traj, params, seq_name, a.out_dir));
    std::printf("sequence %s: %d frames, split %s\n", seq_name.c_str(),
                a.frames, params.split.c_str());
  }
  const std::string manifest_path =
      (fs::path(a.out_dir) / "manifest.json").string();
  data::save_manifest(manifest_path, manifest);
  std::printf("manifest: %s\n", manifest_path.c_str());
  return 0;
}

void save_effective_config(const train::TrainConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  std::ofstream out(fs::path(cfg.out_dir) / "config.json");
  out << train::train_config_to_json(cfg).dump(2) << "\n";
}

int run_eval(const std::string& ckpt_path, const std::string& manifest_path,
             const std::string& split, const std::string& out_dir,
             const std::string& exec) {
  const train::LoadedCheckpoint ckpt = train::load_checkpoint(ckpt_path);
  train::TrainConfig cfg = ckpt.config;
  if (!manifest_path.empty()) cfg.manifest = manifest_path;

  net::Model model(cfg.model, cfg.seed);
  train::apply_checkpoint(ckpt, model);
  const train::EvalReport rep =
      train::evaluate(model, cfg, split, train::exec_from_string(exec));

  fs::create_directories(out_dir);
  const std::string report_path =
      (fs::path(out_dir) / "eval_report.json").string();
  train::save_eval_report(report_path, rep);
  std::printf("split %s: %d frames, mean translation %.4f m, mean rotation "
              "%.4f deg\n",
              split.c_str(), rep.frame_count, rep.mean_trans, rep.mean_rot);
  for (const train::SequenceEval& se : rep.sequences)
    std::printf("  %s [%s]: %.4f m, %.4f deg\n", se.name.c_str(),
                se.tag.c_str(), se.mean_trans, se.mean_rot);
  std::printf("report: %s\n", report_path.c_str());
  return 0;
}

int run_plot(const std::string& report_path, const std::string& out_dir) {
  const train::EvalReport rep = train::load_eval_report(report_path);
  train::emit_plots(rep, out_dir);
  std::printf("plots written under %s\n", out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"radarloc: radar relocalization pipeline"};
  app.require_subcommand(1);

  // convert
  auto* convert = app.add_subcommand(
      "convert", "resample polar scans into Cartesian images");
  std::string cv_manifest, cv_out = "converted";
  int cv_size = 64;
  double cv_alpha = 1.0;
  std::string cv_interp = "bilinear", cv_exec = "parallel";
  convert->add_option("--manifest", cv_manifest, "dataset manifest")
      ->required();
  convert->add_option("--out", cv_out, "output directory");
  convert->add_option("--size", cv_size, "output image side in pixels");
  convert->add_option("--alpha", cv_alpha, "pixels per meter");
  convert->add_option("--interp", cv_interp, "nearest | bilinear");
  convert->add_option("--exec", cv_exec, "serial | parallel");

  // simulate
  auto* simulate =
      app.add_subcommand("simulate", "generate a synthetic radar dataset");
  SimulateArgs sim;
  simulate->add_option("--out", sim.out_dir, "dataset root directory");
  simulate->add_option("--name", sim.name, "sequence name prefix");
  simulate->add_option("--landmarks", sim.landmarks, "static landmark count");
  simulate->add_option("--extent", sim.extent, "world half-extent in meters");
  simulate->add_option("--frames", sim.frames, "frames per traversal");
  simulate->add_option("--loop-radius", sim.loop_radius,
                       "trajectory loop radius in meters");
  simulate->add_option("--yaw-amplitude", sim.yaw_amplitude,
                       "yaw oscillation amplitude in radians");
  simulate->add_option("--traversals", sim.traversals,
                       "traversal count (last one becomes the test split)");
  simulate->add_option("--noise", sim.noise, "noise level in [0,1]");
  simulate->add_option("--dynamic", sim.dynamic, "dynamic object count");
  simulate->add_option("--azimuths", sim.m, "polar azimuth bins");
  simulate->add_option("--range-bins", sim.b, "polar range bins");
  simulate->add_option("--resolution", sim.resolution, "meters per range bin");
  simulate->add_option("--seed", sim.seed, "world + noise seed");

  // train
  auto* tr = app.add_subcommand("train", "optimize the pose network");
  std::string tr_config;
  train::TrainConfig tc = train::desk_train_config();
  std::string tr_attention, tr_encoder, tr_preset;
  bool tr_no_gc = false, tr_separate_balance = false, tr_quiet = false;
  tr->add_option("--config", tr_config, "json config file (cli overrides it)");
  tr->add_option("--manifest", tc.manifest, "dataset manifest");
  tr->add_option("--out", tc.out_dir, "output directory");
  tr->add_option("--image-size", tc.image_size, "Cartesian image side");
  tr->add_option("--alpha", tc.alpha, "pixels per meter");
  tr->add_option("--interp", tc.interp, "nearest | bilinear");
  tr->add_option("--epochs", tc.epochs, "training epochs");
  tr->add_option("--lr", tc.lr, "learning rate");
  tr->add_option("--batch", tc.batch_size, "windows per optimizer step");
  tr->add_option("--window", tc.window, "frames per window (N)");
  tr->add_option("--stride", tc.window_stride, "window stride");
  tr->add_option("--beta0", tc.beta0, "initial translation balance");
  tr->add_option("--gamma0", tc.gamma0, "initial rotation balance");
  tr->add_option("--seed", tc.seed, "training seed");
  tr->add_option("--attention", tr_attention, "full | plain | off");
  tr->add_option("--encoder", tr_encoder, "dense | residual");
  tr->add_option("--feature-dim", tc.model.encoder.feature_dim,
                 "encoder output dimension");
  tr->add_option("--pool-grid", tc.model.encoder.pool_grid,
                 "pooled grid side before the encoder fc (1 = global)");
  tr->add_option("--preset", tr_preset, "desk | paper");
  tr->add_flag("--no-gc", tr_no_gc, "drop the relative-pose loss terms");
  tr->add_flag("--separate-balance", tr_separate_balance,
               "independent (beta, gamma) for the relative terms");
  tr->add_option("--checkpoint-every", tc.checkpoint_every,
                 "epochs between checkpoints");
  tr->add_option("--eval-every", tc.eval_every,
                 "epochs between test evals (0 disables best tracking)");
  tr->add_option("--early-stop-trans", tc.early_stop_trans_m,
                 "stop when split translation error falls below (m)");
  tr->add_option("--early-stop-rot", tc.early_stop_rot_deg,
                 "also require rotation error below (deg)");
  tr->add_option("--early-stop-every", tc.early_stop_check_every,
                 "epochs between early-stop checks");
  tr->add_option("--early-stop-split", tc.early_stop_split,
                 "split driving early stopping");
  tr->add_option("--exec", tc.exec, "serial | parallel");
  tr->add_flag("--quiet", tr_quiet, "suppress per-epoch output");

  // eval
  auto* ev = app.add_subcommand("eval", "single-frame evaluation of a split");
  std::string ev_ckpt, ev_manifest, ev_split = "test", ev_out = "eval";
  std::string ev_exec = "parallel";
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
  ev->add_option("--manifest", ev_manifest,
                 "dataset manifest (default: the checkpoint's)");
  ev->add_option("--split", ev_split, "train | test");
  ev->add_option("--out", ev_out, "output directory");
  ev->add_option("--exec", ev_exec, "serial | parallel");

  // plot
  auto* pl = app.add_subcommand("plot", "render trajectory and CDF plots");
  std::string pl_report, pl_out = "plots";
  pl->add_option("--report", pl_report, "eval_report.json path")->required();
  pl->add_option("--out", pl_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (convert->parsed())
      return run_convert(cv_manifest, resolve_out(cv_out), cv_size, cv_alpha,
                         cv_interp, cv_exec);
    if (simulate->parsed()) {
      sim.out_dir = resolve_out(sim.out_dir);
      return run_simulate(sim);
    }
    if (tr->parsed()) {
      train::TrainConfig cfg =
          tr_config.empty() ? train::desk_train_config()
                            : train::load_train_config(tr_config);
      if (!tr_preset.empty()) {
        if (tr_preset == "paper")
          cfg = train::paper_train_config();
        else if (tr_preset != "desk")
          throw CLI::ValidationError("--preset", "must be desk or paper");
      }
      // only options the user actually passed override the file
      auto passed = [&](const std::string& name) {
        return tr->count(name) > 0;
      };
      if (passed("--manifest")) cfg.manifest = tc.manifest;
      if (passed("--out")) cfg.out_dir = tc.out_dir;
      if (passed("--image-size")) cfg.image_size = tc.image_size;
      if (passed("--alpha")) cfg.alpha = tc.alpha;
      if (passed("--interp")) cfg.interp = tc.interp;
      if (passed("--epochs")) cfg.epochs = tc.epochs;
      if (passed("--lr")) cfg.lr = tc.lr;
      if (passed("--batch")) cfg.batch_size = tc.batch_size;
      if (passed("--window")) cfg.window = tc.window;
      if (passed("--stride")) cfg.window_stride = tc.window_stride;
      if (passed("--beta0")) cfg.beta0 = tc.beta0;
      if (passed("--gamma0")) cfg.gamma0 = tc.gamma0;
      if (passed("--seed")) cfg.seed = tc.seed;
      if (passed("--feature-dim"))
        cfg.model.encoder.feature_dim = tc.model.encoder.feature_dim;
      if (passed("--pool-grid"))
        cfg.model.encoder.pool_grid = tc.model.encoder.pool_grid;
      if (passed("--checkpoint-every"))
        cfg.checkpoint_every = tc.checkpoint_every;
      if (passed("--eval-every")) cfg.eval_every = tc.eval_every;
      if (passed("--early-stop-trans"))
        cfg.early_stop_trans_m = tc.early_stop_trans_m;
      if (passed("--early-stop-rot"))
        cfg.early_stop_rot_deg = tc.early_stop_rot_deg;
      if (passed("--early-stop-every"))
        cfg.early_stop_check_every = tc.early_stop_check_every;
      if (passed("--early-stop-split"))
        cfg.early_stop_split = tc.early_stop_split;
      if (passed("--exec")) cfg.exec = tc.exec;
      if (!tr_attention.empty()) {
        if (tr_attention == "plain") tr_attention = "plain_encoder_decoder";
        cfg.model.attention_mode =
            attn::attention_mode_from_string(tr_attention);
      }
      if (!tr_encoder.empty()) cfg.model.encoder.variant = tr_encoder;
      if (tr_no_gc) cfg.geometric_constraints = false;
      if (tr_separate_balance) cfg.share_balance = false;
      cfg.out_dir = resolve_out(cfg.out_dir);

      if (cfg.manifest.empty())
        throw CLI::ValidationError("--manifest", "a dataset manifest is "
                                                 "required");
      save_effective_config(cfg);
      train::Trainer trainer(cfg);
      trainer.set_verbose(!tr_quiet);
      std::printf("training on %d windows, %d epochs\n",
                  trainer.window_count(), cfg.epochs);
      const train::TrainResult res = trainer.run();
      std::ofstream curve(fs::path(cfg.out_dir) / "loss_curve.csv");
      curve << "epoch,loss\n";
      for (std::size_t i = 0; i < res.loss_curve.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", res.loss_curve[i]);
        curve << (i + 1) << "," << buf << "\n";
      }
      std::printf("ran %d epochs; beta %.4f, gamma %.4f\n", res.epochs_run,
                  res.final_beta, res.final_gamma);
      std::printf("last checkpoint: %s\n", res.last_checkpoint.c_str());
      if (!res.best_checkpoint.empty())
        std::printf("best checkpoint: %s\n", res.best_checkpoint.c_str());
      return 0;
    }
    if (ev->parsed())
      return run_eval(ev_ckpt, ev_manifest, ev_split, resolve_out(ev_out),
                      ev_exec);
    if (pl->parsed()) return run_plot(pl_report, resolve_out(pl_out));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
