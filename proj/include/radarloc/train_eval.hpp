#pragma once

#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "radarloc/data.hpp"
#include "radarloc/losses.hpp"
#include "radarloc/network.hpp"

namespace radarloc::train {

struct TrainConfig {
  // data geometry
  std::string manifest;
  std::string out_dir = "out";
  int image_size = 64;
  double alpha = 1.0;  // pixels per meter
  std::string interp = "bilinear";
  std::int64_t pose_tolerance_ns = 1000000;

  net::ModelConfig model;

  // optimization
  int epochs = 100;
  double lr = 1e-4;
  int batch_size = 8;
  int window = 4;  // N images per training sample
  int window_stride = 1;
  double beta0 = 0.0;
  double gamma0 = -3.0;
  bool share_balance = true;  // one (beta, gamma) pair for all terms
  bool geometric_constraints = true;
  std::uint64_t seed = 1;

  // bookkeeping
  int checkpoint_every = 1;
  int eval_every = 0;  // test-split eval cadence; 0 disables best tracking
  double early_stop_trans_m = 0.0;  // 0 disables early stopping
  double early_stop_rot_deg = 0.0;
  int early_stop_check_every = 10;
  std::string early_stop_split = "train";
  std::string exec = "parallel";  // serial | parallel
};

TrainConfig desk_train_config();
TrainConfig paper_train_config();

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);
TrainConfig load_train_config(const std::string& path);

ad::Exec exec_from_string(const std::string& s);

// --- optimizer ---------------------------------------------------------

// Adaptive moment estimation with the standard defaults.
class Adam {
 public:
  explicit Adam(const ad::ParamStore& store, double lr, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);
  void step(ad::ParamStore& store, const std::vector<Tensor>& grads);
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Tensor> m_, v_;
};

// --- checkpoints ----------------------------------------------------------

struct LoadedCheckpoint {
  TrainConfig config;
  int epoch = 0;
  std::string data_hash;
  std::vector<std::pair<std::string, Tensor>> params;
};

void save_checkpoint(const std::string& path, const ad::ParamStore& store,
                     const TrainConfig& cfg, int epoch,
                     const std::string& data_hash);
LoadedCheckpoint load_checkpoint(const std::string& path);

struct BalancePids {
  int beta = -1, gamma = -1;
  int beta_rp = -1, gamma_rp = -1;  // -1 when the pair is shared
};

// Registers (beta, gamma) [and the relative pair when not shared] in the
// store if absent; returns their pids.
BalancePids ensure_balance_params(ad::ParamStore& store,
                                  const TrainConfig& cfg);

// Copies checkpoint arrays into the model store (names and shapes must
// match exactly).
void apply_checkpoint(const LoadedCheckpoint& ckpt, net::Model& model);

// Loads arbitrary "encoder.*" arrays from a checkpoint file into the
// store: the external-backbone-weights hook.
int load_encoder_weights(const std::string& path, ad::ParamStore& store);

std::string fnv1a_file(const std::string& path);

// --- evaluation ----------------------------------------------------------

struct SequenceEval {
  std::string name, tag;
  std::vector<double> trans_errors, rot_errors;  // per frame
  std::vector<pose::Pose> gt, pred;
  double mean_trans = 0.0, mean_rot = 0.0;
};

struct EvalReport {
  std::vector<SequenceEval> sequences;
  double mean_trans = 0.0, mean_rot = 0.0;  // over all frames
  int frame_count = 0;
};

using Predictor = std::function<pose::Pose(const radar::CartesianImage&)>;

struct EvalSequenceInput {
  std::string name, tag, split;
  std::vector<data::Frame> frames;
};

// Core metric aggregation; the predictor sees one frame at a time.
EvalReport evaluate_frames(const Predictor& predict,
                           const std::vector<EvalSequenceInput>& sequences);

EvalReport evaluate(const net::Model& model, const TrainConfig& cfg,
                    const std::string& split,
                    ad::Exec exec = ad::Exec::parallel);

nlohmann::json eval_report_to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);
void save_eval_report(const std::string& path, const EvalReport& report);
EvalReport load_eval_report(const std::string& path);

// Writes trajectory and CDF csv files plus SVG plots rendered from the
// csv files (so plots regenerate bit-identically from the numbers).
void emit_plots(const EvalReport& report, const std::string& out_dir);

void trajectory_svg_from_csv(const std::string& csv_path,
                             const std::string& svg_path);
void cdf_svg_from_csv(const std::string& csv_path,
                      const std::string& svg_path);

// --- training --------------------------------------------------------------

struct TrainResult {
  std::vector<double> loss_curve;  // per-epoch mean optimized window loss
  std::string last_checkpoint;
  std::string best_checkpoint;  // empty when eval_every = 0
  int epochs_run = 0;
  double final_beta = 0.0, final_gamma = 0.0;
};

class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg);

  TrainResult run();
  net::Model& model() { return *model_; }
  const TrainConfig& config() const { return cfg_; }
  int window_count() const { return static_cast<int>(windows_.size()); }
  void set_verbose(bool v) { verbose_ = v; }

 private:
  EvalReport eval_split(const std::string& split);

  TrainConfig cfg_;
  ad::Exec exec_;
  std::unique_ptr<net::Model> model_;
  BalancePids bal_;
  std::vector<loss::SequenceWindow> windows_;
  std::vector<EvalSequenceInput> eval_inputs_;  // all splits, converted
  std::string data_hash_;
  bool verbose_ = true;
};

TrainResult train(const TrainConfig& cfg);

}  // namespace radarloc::train
