#include "radarloc/train_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace radarloc::train {

namespace fs = std::filesystem;
using nlohmann::json;

// --- configuration -----------------------------------------------------

TrainConfig desk_train_config() { return TrainConfig{}; }

TrainConfig paper_train_config() {
  TrainConfig cfg;
  cfg.model = net::paper_model_config();
  cfg.image_size = 224;
  return cfg;
}

ad::Exec exec_from_string(const std::string& s) {
  if (s == "serial") return ad::Exec::serial;
  if (s == "parallel") return ad::Exec::parallel;
  throw std::invalid_argument("exec must be serial or parallel, got " + s);
}

json train_config_to_json(const TrainConfig& cfg) {
  json j;
  j["manifest"] = cfg.manifest;
  j["out_dir"] = cfg.out_dir;
  j["image_size"] = cfg.image_size;
  j["alpha"] = cfg.alpha;
  j["interp"] = cfg.interp;
  j["pose_tolerance_ns"] = cfg.pose_tolerance_ns;
  j["model"] = {
      {"attention",
       {{"levels", cfg.model.attention.levels},
        {"channel_widths", cfg.model.attention.channel_widths},
        {"activation", cfg.model.attention.activation}}},
      {"attention_mode", attn::to_string(cfg.model.attention_mode)},
      {"encoder",
       {{"variant", cfg.model.encoder.variant},
        {"feature_dim", cfg.model.encoder.feature_dim},
        {"preset", cfg.model.encoder.preset},
        {"pool_grid", cfg.model.encoder.pool_grid}}},
      {"regressor",
       {{"hidden_sizes", cfg.model.regressor.hidden_sizes},
        {"activation", cfg.model.regressor.activation}}}};
  j["epochs"] = cfg.epochs;
  j["lr"] = cfg.lr;
  j["batch_size"] = cfg.batch_size;
  j["window"] = cfg.window;
  j["window_stride"] = cfg.window_stride;
  j["beta0"] = cfg.beta0;
  j["gamma0"] = cfg.gamma0;
  j["share_balance"] = cfg.share_balance;
  j["geometric_constraints"] = cfg.geometric_constraints;
  j["seed"] = cfg.seed;
  j["checkpoint_every"] = cfg.checkpoint_every;
  j["eval_every"] = cfg.eval_every;
  j["early_stop_trans_m"] = cfg.early_stop_trans_m;
  j["early_stop_rot_deg"] = cfg.early_stop_rot_deg;
  j["early_stop_check_every"] = cfg.early_stop_check_every;
  j["early_stop_split"] = cfg.early_stop_split;
  j["exec"] = cfg.exec;
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  cfg.manifest = j.value("manifest", cfg.manifest);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.image_size = j.value("image_size", cfg.image_size);
  cfg.alpha = j.value("alpha", cfg.alpha);
  cfg.interp = j.value("interp", cfg.interp);
  cfg.pose_tolerance_ns = j.value("pose_tolerance_ns", cfg.pose_tolerance_ns);
  if (j.contains("model")) {
    const json& m = j.at("model");
    if (m.contains("attention")) {
      const json& a = m.at("attention");
      cfg.model.attention.levels =
          a.value("levels", cfg.model.attention.levels);
      if (a.contains("channel_widths"))
        cfg.model.attention.channel_widths =
            a.at("channel_widths").get<std::vector<int>>();
      cfg.model.attention.activation =
          a.value("activation", cfg.model.attention.activation);
    }
    if (m.contains("attention_mode"))
      cfg.model.attention_mode =
          attn::attention_mode_from_string(m.at("attention_mode"));
    if (m.contains("encoder")) {
      const json& e = m.at("encoder");
      cfg.model.encoder.variant = e.value("variant", cfg.model.encoder.variant);
      cfg.model.encoder.feature_dim =
          e.value("feature_dim", cfg.model.encoder.feature_dim);
      cfg.model.encoder.preset = e.value("preset", cfg.model.encoder.preset);
      cfg.model.encoder.pool_grid =
          e.value("pool_grid", cfg.model.encoder.pool_grid);
    }
    if (m.contains("regressor")) {
      const json& r = m.at("regressor");
      if (r.contains("hidden_sizes"))
        cfg.model.regressor.hidden_sizes =
            r.at("hidden_sizes").get<std::vector<int>>();
      cfg.model.regressor.activation =
          r.value("activation", cfg.model.regressor.activation);
    }
  }
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.lr = j.value("lr", cfg.lr);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.window = j.value("window", cfg.window);
  cfg.window_stride = j.value("window_stride", cfg.window_stride);
  cfg.beta0 = j.value("beta0", cfg.beta0);
  cfg.gamma0 = j.value("gamma0", cfg.gamma0);
  cfg.share_balance = j.value("share_balance", cfg.share_balance);
  cfg.geometric_constraints =
      j.value("geometric_constraints", cfg.geometric_constraints);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
  cfg.eval_every = j.value("eval_every", cfg.eval_every);
  cfg.early_stop_trans_m = j.value("early_stop_trans_m", cfg.early_stop_trans_m);
  cfg.early_stop_rot_deg = j.value("early_stop_rot_deg", cfg.early_stop_rot_deg);
  cfg.early_stop_check_every =
      j.value("early_stop_check_every", cfg.early_stop_check_every);
  cfg.early_stop_split = j.value("early_stop_split", cfg.early_stop_split);
  cfg.exec = j.value("exec", cfg.exec);
  return cfg;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("config: parse error in " + path + ": " +
                             e.what());
  }
  return train_config_from_json(j);
}

namespace {

void check_geometry(const TrainConfig& cfg) {
  if (cfg.image_size < 1)
    throw std::invalid_argument("config: image_size must be positive");
  if (cfg.model.attention_mode != attn::AttentionMode::off) {
    const int div = 1 << (cfg.model.attention.levels - 1);
    if (cfg.image_size % div != 0)
      throw std::invalid_argument(
          "config: image_size must be divisible by 2^(attention levels - 1)");
  }
}

radar::Interp interp_from_string(const std::string& s) {
  if (s == "nearest") return radar::Interp::nearest;
  if (s == "bilinear") return radar::Interp::bilinear;
  throw std::invalid_argument("interp must be nearest or bilinear, got " + s);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
}

}  // namespace

// --- optimizer --------------------------------------------------------------

Adam::Adam(const ad::ParamStore& store, double lr, double beta1, double beta2,
           double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_ = store.make_grad_buffers();
  v_ = store.make_grad_buffers();
}

void Adam::step(ad::ParamStore& store, const std::vector<Tensor>& grads) {
  if (static_cast<int>(grads.size()) != store.count())
    throw std::invalid_argument("Adam: gradient buffer count mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (int pid = 0; pid < store.count(); ++pid) {
    Tensor& value = store.value(pid);
    Tensor& m = m_[pid];
    Tensor& v = v_[pid];
    const Tensor& g = grads[pid];
    for (std::size_t i = 0; i < value.numel(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

// --- checkpoints ----------------------------------------------------------

namespace {

constexpr char kCkptMagic[8] = {'R', 'L', 'C', 'K', '0', '0', '0', '1'};

std::uint64_t fnv1a_bytes(const char* p, std::size_t n,
                          std::uint64_t h = 14695981039346656037ULL) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(p[i]);
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_u64_le(std::ofstream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint64_t read_u64_le(std::ifstream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

std::string fnv1a_file(const std::string& path) {
  const std::string bytes = read_file_bytes(path);
  return hex64(fnv1a_bytes(bytes.data(), bytes.size()));
}

void save_checkpoint(const std::string& path, const ad::ParamStore& store,
                     const TrainConfig& cfg, int epoch,
                     const std::string& data_hash) {
  json meta;
  meta["format"] = 1;
  meta["epoch"] = epoch;
  meta["data_hash"] = data_hash;
  meta["config"] = train_config_to_json(cfg);
  meta["params"] = json::array();
  for (int pid = 0; pid < store.count(); ++pid)
    meta["params"].push_back(
        {{"name", store.name(pid)}, {"shape", store.value(pid).shape()}});
  const std::string mjs = meta.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out.write(kCkptMagic, 8);
  write_u64_le(out, mjs.size());
  out.write(mjs.data(), static_cast<std::streamsize>(mjs.size()));
  for (int pid = 0; pid < store.count(); ++pid) {
    const Tensor& t = store.value(pid);
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.numel() * 8));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCkptMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const std::uint64_t mlen = read_u64_le(in);
  std::string mjs(mlen, '\0');
  in.read(mjs.data(), static_cast<std::streamsize>(mlen));
  if (!in) throw std::runtime_error("checkpoint: truncated manifest " + path);
  json meta;
  try {
    meta = json::parse(mjs);
  } catch (const json::exception& e) {
    throw std::runtime_error("checkpoint: manifest parse error in " + path +
                             ": " + e.what());
  }

  LoadedCheckpoint ckpt;
  ckpt.config = train_config_from_json(meta.at("config"));
  ckpt.epoch = meta.at("epoch").get<int>();
  ckpt.data_hash = meta.value("data_hash", "");
  for (const json& p : meta.at("params")) {
    const std::string name = p.at("name").get<std::string>();
    const std::vector<int> shape = p.at("shape").get<std::vector<int>>();
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * 8));
    if (!in)
      throw std::runtime_error("checkpoint: truncated data for " + name +
                               " in " + path);
    ckpt.params.emplace_back(name, std::move(t));
  }
  return ckpt;
}

BalancePids ensure_balance_params(ad::ParamStore& store,
                                  const TrainConfig& cfg) {
  BalancePids out;
  auto ensure = [&](const std::string& name, double init) {
    const int pid = store.find(name);
    return pid >= 0 ? pid : store.add(name, Tensor::scalar(init));
  };
  out.beta = ensure("loss.beta", cfg.beta0);
  out.gamma = ensure("loss.gamma", cfg.gamma0);
  if (!cfg.share_balance) {
    out.beta_rp = ensure("loss.beta_rp", cfg.beta0);
    out.gamma_rp = ensure("loss.gamma_rp", cfg.gamma0);
  }
  return out;
}

void apply_checkpoint(const LoadedCheckpoint& ckpt, net::Model& model) {
  ad::ParamStore& store = model.params();
  ensure_balance_params(store, ckpt.config);
  if (static_cast<int>(ckpt.params.size()) != store.count())
    throw std::runtime_error(
        "checkpoint: parameter count mismatch (checkpoint " +
        std::to_string(ckpt.params.size()) + ", model " +
        std::to_string(store.count()) + ")");
  for (const auto& [name, tensor] : ckpt.params) {
    const int pid = store.find(name);
    if (pid < 0)
      throw std::runtime_error("checkpoint: unknown parameter " + name);
    Tensor& dst = store.value(pid);
    if (!dst.same_shape(tensor))
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    dst = tensor;
  }
}

int load_encoder_weights(const std::string& path, ad::ParamStore& store) {
  const LoadedCheckpoint ckpt = load_checkpoint(path);
  int loaded = 0;
  for (const auto& [name, tensor] : ckpt.params) {
    if (name.rfind("encoder.", 0) != 0) continue;
    const int pid = store.find(name);
    if (pid < 0) continue;
    Tensor& dst = store.value(pid);
    if (!dst.same_shape(tensor))
      throw std::runtime_error("load_encoder_weights: shape mismatch for " +
                               name);
    dst = tensor;
    ++loaded;
  }
  return loaded;
}

// --- evaluation ------------------------------------------------------------

EvalReport evaluate_frames(const Predictor& predict,
                           const std::vector<EvalSequenceInput>& sequences) {
  EvalReport rep;
  double sum_t = 0.0, sum_r = 0.0;
  for (const EvalSequenceInput& seq : sequences) {
    SequenceEval se;
    se.name = seq.name;
    se.tag = seq.tag;
    for (const data::Frame& f : seq.frames) {
      const pose::Pose pred = predict(f.image);
      const auto [te, re] = pose::pose_error(pred, f.pose);
      se.trans_errors.push_back(te);
      se.rot_errors.push_back(re);
      se.gt.push_back(f.pose);
      se.pred.push_back(pred);
      sum_t += te;
      sum_r += re;
      ++rep.frame_count;
    }
    se.mean_trans = mean_of(se.trans_errors);
    se.mean_rot = mean_of(se.rot_errors);
    rep.sequences.push_back(std::move(se));
  }
  if (rep.frame_count > 0) {
    rep.mean_trans = sum_t / rep.frame_count;
    rep.mean_rot = sum_r / rep.frame_count;
  }
  return rep;
}

namespace {

std::vector<EvalSequenceInput> load_eval_inputs(const TrainConfig& cfg,
                                                ad::Exec exec) {
  check_geometry(cfg);
  const data::DatasetManifest manifest = data::load_manifest(cfg.manifest);
  const std::vector<data::LoadedSequence> seqs =
      data::load_dataset(manifest, cfg.pose_tolerance_ns);
  std::vector<EvalSequenceInput> out;
  for (const data::LoadedSequence& seq : seqs) {
    EvalSequenceInput in;
    in.name = seq.entry.name;
    in.tag = seq.entry.tag;
    in.split = seq.entry.split;
    in.frames =
        data::convert_sequence(seq, cfg.image_size, cfg.image_size, cfg.alpha,
                               interp_from_string(cfg.interp), exec);
    out.push_back(std::move(in));
  }
  return out;
}

Predictor model_predictor(const net::Model& model, ad::Exec exec) {
  return [&model, exec](const radar::CartesianImage& img) {
    const pose::LogPose lp = model.predict(img, exec);
    return pose::from_log_pose(lp, img.timestamp);
  };
}

}  // namespace

EvalReport evaluate(const net::Model& model, const TrainConfig& cfg,
                    const std::string& split, ad::Exec exec) {
  std::vector<EvalSequenceInput> inputs = load_eval_inputs(cfg, exec);
  std::vector<EvalSequenceInput> subset;
  for (EvalSequenceInput& in : inputs)
    if (in.split == split) subset.push_back(std::move(in));
  return evaluate_frames(model_predictor(model, exec), subset);
}

namespace {

json pose_row(const pose::Pose& p) {
  return json::array({p.timestamp, p.p[0], p.p[1], p.p[2], p.q.u, p.q.v[0],
                      p.q.v[1], p.q.v[2]});
}

}  // namespace

json eval_report_to_json(const EvalReport& report) {
  json j;
  j["mean_translation_error_m"] = report.mean_trans;
  j["mean_rotation_error_deg"] = report.mean_rot;
  j["frame_count"] = report.frame_count;
  j["sequences"] = json::array();
  for (const SequenceEval& se : report.sequences) {
    json s;
    s["name"] = se.name;
    s["tag"] = se.tag;
    s["mean_translation_error_m"] = se.mean_trans;
    s["mean_rotation_error_deg"] = se.mean_rot;
    s["translation_errors"] = se.trans_errors;
    s["rotation_errors"] = se.rot_errors;
    s["gt_poses"] = json::array();
    s["pred_poses"] = json::array();
    for (const pose::Pose& p : se.gt) s["gt_poses"].push_back(pose_row(p));
    for (const pose::Pose& p : se.pred) s["pred_poses"].push_back(pose_row(p));
    j["sequences"].push_back(std::move(s));
  }
  return j;
}

EvalReport eval_report_from_json(const json& j) {
  EvalReport rep;
  rep.mean_trans = j.at("mean_translation_error_m").get<double>();
  rep.mean_rot = j.at("mean_rotation_error_deg").get<double>();
  rep.frame_count = j.at("frame_count").get<int>();
  for (const json& s : j.at("sequences")) {
    SequenceEval se;
    se.name = s.at("name").get<std::string>();
    se.tag = s.at("tag").get<std::string>();
    se.mean_trans = s.at("mean_translation_error_m").get<double>();
    se.mean_rot = s.at("mean_rotation_error_deg").get<double>();
    se.trans_errors = s.at("translation_errors").get<std::vector<double>>();
    se.rot_errors = s.at("rotation_errors").get<std::vector<double>>();
    auto parse_poses = [](const json& rows) {
      std::vector<pose::Pose> out;
      for (const json& r : rows) {
        pose::Pose p;
        p.timestamp = r.at(0).get<std::int64_t>();
        p.p = {r.at(1).get<double>(), r.at(2).get<double>(),
               r.at(3).get<double>()};
        p.q.u = r.at(4).get<double>();
        p.q.v = {r.at(5).get<double>(), r.at(6).get<double>(),
                 r.at(7).get<double>()};
        out.push_back(p);
      }
      return out;
    };
    se.gt = parse_poses(s.at("gt_poses"));
    se.pred = parse_poses(s.at("pred_poses"));
    rep.sequences.push_back(std::move(se));
  }
  return rep;
}

void save_eval_report(const std::string& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("eval report: cannot write " + path);
  out << eval_report_to_json(report).dump(2) << "\n";
}

EvalReport load_eval_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("eval report: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("eval report: parse error in " + path + ": " +
                             e.what());
  }
  return eval_report_from_json(j);
}

// --- plots -------------------------------------------------------------

namespace {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw std::runtime_error("csv: missing column " + name);
  }
};

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open " + path);
  CsvTable table;
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("csv: empty file " + path);
  std::istringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) table.header.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream rs(line);
    std::vector<double> row;
    while (std::getline(rs, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != table.header.size())
      throw std::runtime_error("csv: ragged row in " + path);
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

struct Series {
  std::vector<double> x, y;
  std::string stroke;
  std::string dash;  // empty for solid
  std::string label;
};

// Fixed 640x480 layout; purely a function of the series values, so
// identical inputs produce identical bytes.
void write_svg(const std::string& path, const std::vector<Series>& series,
               const std::string& title, const std::string& xlabel,
               const std::string& ylabel) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const Series& s : series) {
    for (double v : s.x) {
      xmin = std::min(xmin, v);
      xmax = std::max(xmax, v);
    }
    for (double v : s.y) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  }
  if (!std::isfinite(xmin)) {
    xmin = 0.0;
    xmax = 1.0;
    ymin = 0.0;
    ymax = 1.0;
  }
  auto pad = [](double& lo, double& hi) {
    const double span = hi - lo;
    if (span <= 0.0) {
      lo -= 1.0;
      hi += 1.0;
    } else {
      lo -= 0.05 * span;
      hi += 0.05 * span;
    }
  };
  pad(xmin, xmax);
  pad(ymin, ymax);

  const double x0 = 70, x1 = 610, y0 = 430, y1 = 30;  // y axis points up
  auto sx = [&](double v) { return x0 + (v - xmin) / (xmax - xmin) * (x1 - x0); };
  auto sy = [&](double v) { return y0 + (v - ymin) / (ymax - ymin) * (y1 - y0); };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("svg: cannot write " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" "
         "height=\"480\" viewBox=\"0 0 640 480\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"640\" height=\"480\" fill=\"#fff\"/>\n";
  out << "<rect x=\"" << x0 << "\" y=\"" << y1 << "\" width=\"" << (x1 - x0)
      << "\" height=\"" << (y0 - y1)
      << "\" fill=\"none\" stroke=\"#000\" stroke-width=\"1\"/>\n";
  out << "<text x=\"320\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"14\">" << title << "</text>\n";
  out << "<text x=\"340\" y=\"465\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\">" << xlabel << "</text>\n";
  out << "<text x=\"16\" y=\"230\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\" transform=\"rotate(-90 16 230)\">" << ylabel
      << "</text>\n";
  out << "<text x=\"" << x0 << "\" y=\"448\" font-family=\"sans-serif\" "
         "font-size=\"11\">" << fmt("%.4g", xmin) << "</text>\n";
  out << "<text x=\"" << x1 << "\" y=\"448\" text-anchor=\"end\" "
         "font-family=\"sans-serif\" font-size=\"11\">" << fmt("%.4g", xmax)
      << "</text>\n";
  out << "<text x=\"" << (x0 - 6) << "\" y=\"" << (y0 + 4)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << fmt("%.4g", ymin) << "</text>\n";
  out << "<text x=\"" << (x0 - 6) << "\" y=\"" << (y1 + 4)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << fmt("%.4g", ymax) << "</text>\n";

  double legend_y = y1 + 16;
  for (const Series& s : series) {
    out << "<polyline fill=\"none\" stroke=\"" << s.stroke
        << "\" stroke-width=\"1.5\"";
    if (!s.dash.empty()) out << " stroke-dasharray=\"" << s.dash << "\"";
    out << " points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i) out << " ";
      out << fmt("%.2f", sx(s.x[i])) << "," << fmt("%.2f", sy(s.y[i]));
    }
    out << "\"/>\n";
    if (!s.label.empty()) {
      out << "<line x1=\"" << (x1 - 120) << "\" y1=\"" << legend_y
          << "\" x2=\"" << (x1 - 96) << "\" y2=\"" << legend_y << "\" stroke=\""
          << s.stroke << "\" stroke-width=\"1.5\"";
      if (!s.dash.empty()) out << " stroke-dasharray=\"" << s.dash << "\"";
      out << "/>\n<text x=\"" << (x1 - 90) << "\" y=\"" << (legend_y + 4)
          << "\" font-family=\"sans-serif\" font-size=\"11\">" << s.label
          << "</text>\n";
      legend_y += 16;
    }
  }
  out << "</svg>\n";
  if (!out) throw std::runtime_error("svg: write failed " + path);
}

void write_csv(const std::string& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("csv: cannot write " + path);
  for (std::size_t i = 0; i < header.size(); ++i)
    out << (i ? "," : "") << header[i];
  out << "\n";
  char buf[64];
  for (const std::vector<double>& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", row[i]);
      out << (i ? "," : "") << buf;
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("csv: write failed " + path);
}

}  // namespace

void trajectory_svg_from_csv(const std::string& csv_path,
                             const std::string& svg_path) {
  const CsvTable t = read_csv(csv_path);
  const int gx = t.column("gt_x"), gy = t.column("gt_y");
  const int px = t.column("pred_x"), py = t.column("pred_y");
  Series gt, pred;
  gt.stroke = "#000";
  gt.label = "ground truth";
  pred.stroke = "#c00";
  pred.dash = "5,3";
  pred.label = "predicted";
  for (const std::vector<double>& row : t.rows) {
    gt.x.push_back(row[gx]);
    gt.y.push_back(row[gy]);
    pred.x.push_back(row[px]);
    pred.y.push_back(row[py]);
  }
  write_svg(svg_path, {gt, pred}, "trajectory (top-down)", "x [m]", "y [m]");
}

void cdf_svg_from_csv(const std::string& csv_path,
                      const std::string& svg_path) {
  const CsvTable t = read_csv(csv_path);
  const int ec = t.column("error"), fc = t.column("fraction");
  Series s;
  s.stroke = "#06c";
  for (const std::vector<double>& row : t.rows) {
    s.x.push_back(row[ec]);
    s.y.push_back(row[fc]);
  }
  write_svg(svg_path, {s}, "error CDF", "error", "fraction of frames");
}

void emit_plots(const EvalReport& report, const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec)
    throw std::runtime_error("emit_plots: cannot create " + out_dir + ": " +
                             ec.message());

  for (const SequenceEval& se : report.sequences) {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < se.gt.size(); ++i) {
      rows.push_back({static_cast<double>(i), se.gt[i].p[0], se.gt[i].p[1],
                      pose::pose_yaw(se.gt[i].q), se.pred[i].p[0],
                      se.pred[i].p[1], pose::pose_yaw(se.pred[i].q)});
    }
    const std::string csv =
        (fs::path(out_dir) / (se.name + "_trajectory.csv")).string();
    write_csv(csv,
              {"frame", "gt_x", "gt_y", "gt_yaw", "pred_x", "pred_y",
               "pred_yaw"},
              rows);
    trajectory_svg_from_csv(
        csv, (fs::path(out_dir) / (se.name + "_trajectory.svg")).string());
  }

  auto emit_cdf = [&](const std::string& stem, bool rotation) {
    std::vector<double> errors;
    for (const SequenceEval& se : report.sequences) {
      const std::vector<double>& src =
          rotation ? se.rot_errors : se.trans_errors;
      errors.insert(errors.end(), src.begin(), src.end());
    }
    std::sort(errors.begin(), errors.end());
    std::vector<std::vector<double>> rows;
    const double n = static_cast<double>(errors.size());
    for (std::size_t i = 0; i < errors.size(); ++i)
      rows.push_back({errors[i], (i + 1) / n});
    const std::string csv = (fs::path(out_dir) / (stem + ".csv")).string();
    write_csv(csv, {"error", "fraction"}, rows);
    cdf_svg_from_csv(csv, (fs::path(out_dir) / (stem + ".svg")).string());
  };
  emit_cdf("cdf_translation", false);
  emit_cdf("cdf_rotation", true);

  save_eval_report((fs::path(out_dir) / "eval_report.json").string(), report);
}

// --- training -------------------------------------------------------------

Trainer::Trainer(const TrainConfig& cfg)
    : cfg_(cfg), exec_(exec_from_string(cfg.exec)) {
  if (cfg_.epochs < 0) throw std::invalid_argument("train: negative epochs");
  if (!(cfg_.lr >= 0.0)) throw std::invalid_argument("train: bad lr");
  if (cfg_.batch_size < 1) throw std::invalid_argument("train: bad batch size");
  if (cfg_.window < 1) throw std::invalid_argument("train: window must be >= 1");
  if (cfg_.window_stride < 1)
    throw std::invalid_argument("train: window stride must be >= 1");
  check_geometry(cfg_);

  model_ = std::make_unique<net::Model>(cfg_.model, cfg_.seed);
  bal_ = ensure_balance_params(model_->params(), cfg_);
  {
    // probe forward so shape conflicts (pooling grid, attention halving)
    // surface here instead of mid-epoch
    ad::Tape probe(ad::Exec::serial);
    model_->forward(probe, Tensor({cfg_.image_size, cfg_.image_size}));
  }

  const data::DatasetManifest manifest = data::load_manifest(cfg_.manifest);
  const std::vector<data::LoadedSequence> seqs =
      data::load_dataset(manifest, cfg_.pose_tolerance_ns);

  std::uint64_t h = 14695981039346656037ULL;
  {
    const std::string mb = read_file_bytes(cfg_.manifest);
    h = fnv1a_bytes(mb.data(), mb.size(), h);
    for (const data::LoadedSequence& seq : seqs) {
      const std::string pb = read_file_bytes(
          (fs::path(manifest.root) / seq.entry.pose_file).string());
      h = fnv1a_bytes(pb.data(), pb.size(), h);
    }
  }
  data_hash_ = hex64(h);

  for (const data::LoadedSequence& seq : seqs) {
    EvalSequenceInput in;
    in.name = seq.entry.name;
    in.tag = seq.entry.tag;
    in.split = seq.entry.split;
    in.frames =
        data::convert_sequence(seq, cfg_.image_size, cfg_.image_size,
                               cfg_.alpha, interp_from_string(cfg_.interp),
                               exec_);
    if (seq.entry.split == "train") {
      std::vector<loss::SequenceWindow> w =
          data::make_windows(in.frames, cfg_.window, cfg_.window_stride);
      windows_.insert(windows_.end(), std::make_move_iterator(w.begin()),
                      std::make_move_iterator(w.end()));
    }
    eval_inputs_.push_back(std::move(in));
  }
  if (windows_.empty())
    throw std::runtime_error("train: no training windows (check splits and N)");
}

EvalReport Trainer::eval_split(const std::string& split) {
  std::vector<EvalSequenceInput> subset;
  for (const EvalSequenceInput& in : eval_inputs_)
    if (in.split == split) subset.push_back(in);
  return evaluate_frames(model_predictor(*model_, exec_), subset);
}

TrainResult Trainer::run() {
  TrainResult res;
  ad::ParamStore& store = model_->params();
  Adam opt(store, cfg_.lr);
  std::vector<Tensor> grads = store.make_grad_buffers();
  Rng shuffle_rng = Rng(cfg_.seed).fork(0x5e0ffULL);

  std::error_code ec;
  fs::create_directories(cfg_.out_dir, ec);
  if (ec)
    throw std::runtime_error("train: cannot create out dir " + cfg_.out_dir +
                             ": " + ec.message());
  const std::string last_path =
      (fs::path(cfg_.out_dir) / "last.ckpt").string();
  const std::string best_path =
      (fs::path(cfg_.out_dir) / "best.ckpt").string();

  std::vector<int> order(windows_.size());
  std::iota(order.begin(), order.end(), 0);
  const int nw = static_cast<int>(windows_.size());
  double best_trans = std::numeric_limits<double>::infinity();

  int epoch = 0;
  for (epoch = 1; epoch <= cfg_.epochs; ++epoch) {
    for (int i = nw - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.uniform_int(0, i)]);

    double epoch_loss = 0.0;
    for (int start = 0; start < nw; start += cfg_.batch_size) {
      const int bs = std::min(cfg_.batch_size, nw - start);
      for (Tensor& g : grads) g.fill(0.0);
      for (int k = start; k < start + bs; ++k) {
        const loss::SequenceWindow& window = windows_[order[k]];
        ad::Tape tape(exec_);
        ad::Var beta = tape.param(store, bal_.beta);
        ad::Var gamma = tape.param(store, bal_.gamma);
        ad::Var beta_rp =
            bal_.beta_rp >= 0 ? tape.param(store, bal_.beta_rp) : ad::Var{};
        ad::Var gamma_rp =
            bal_.gamma_rp >= 0 ? tape.param(store, bal_.gamma_rp) : ad::Var{};
        std::vector<loss::PredVars> preds;
        for (const radar::CartesianImage& img : window.images) {
          net::Model::Forward f = model_->forward(tape, img.pixels);
          preds.push_back({f.p, f.w});
        }
        const loss::SequenceLossVars sl = loss::sequence_loss(
            tape, preds, window, beta, gamma, beta_rp, gamma_rp);
        const ad::Var opt_loss =
            cfg_.geometric_constraints ? sl.total : sl.gp;
        const double lval = tape.value(opt_loss)[0];
        if (!std::isfinite(lval))
          throw std::runtime_error(
              "train: loss diverged at epoch " + std::to_string(epoch) +
              ", window " + std::to_string(order[k]));
        epoch_loss += lval;
        tape.backward(opt_loss);
        tape.add_param_grads(grads);
      }
      const double inv = 1.0 / static_cast<double>(bs);
      for (Tensor& g : grads)
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] *= inv;
      opt.step(store, grads);
    }
    res.loss_curve.push_back(epoch_loss / nw);
    if (verbose_)
      std::printf("epoch %4d  loss %.6f  beta %.4f  gamma %.4f\n", epoch,
                  res.loss_curve.back(), store.value(bal_.beta)[0],
                  store.value(bal_.gamma)[0]);

    if (cfg_.checkpoint_every > 0 && epoch % cfg_.checkpoint_every == 0) {
      save_checkpoint(last_path, store, cfg_, epoch, data_hash_);
      res.last_checkpoint = last_path;
    }
    if (cfg_.eval_every > 0 && epoch % cfg_.eval_every == 0) {
      const EvalReport rep = eval_split("test");
      if (rep.frame_count > 0 && rep.mean_trans < best_trans) {
        best_trans = rep.mean_trans;
        save_checkpoint(best_path, store, cfg_, epoch, data_hash_);
        res.best_checkpoint = best_path;
      }
    }
    if (cfg_.early_stop_trans_m > 0.0 &&
        epoch % cfg_.early_stop_check_every == 0) {
      const EvalReport rep = eval_split(cfg_.early_stop_split);
      if (verbose_)
        std::printf("epoch %4d  %s error: %.3f m, %.3f deg\n", epoch,
                    cfg_.early_stop_split.c_str(), rep.mean_trans,
                    rep.mean_rot);
      if (rep.frame_count > 0 && rep.mean_trans < cfg_.early_stop_trans_m &&
          (cfg_.early_stop_rot_deg <= 0.0 ||
           rep.mean_rot < cfg_.early_stop_rot_deg))
        break;
    }
  }
  res.epochs_run = std::min(epoch, cfg_.epochs);

  save_checkpoint(last_path, store, cfg_, res.epochs_run, data_hash_);
  res.last_checkpoint = last_path;
  res.final_beta = store.value(bal_.beta)[0];
  res.final_gamma = store.value(bal_.gamma)[0];
  return res;
}

TrainResult train(const TrainConfig& cfg) {
  Trainer trainer(cfg);
  return trainer.run();
}

}  // namespace radarloc::train
