#include "radarloc/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>

#include "radarloc/npy.hpp"

namespace radarloc::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

std::uint64_t frame_seed(std::uint64_t base, std::uint64_t index) {
  return splitmix64(base ^ splitmix64(index + 0x51ed270b0a1ULL));
}
}  // namespace

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("manifest: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("manifest: parse error in " + path + ": " +
                             e.what());
  }
  DatasetManifest m;
  m.root = fs::path(path).parent_path().string();
  if (m.root.empty()) m.root = ".";
  for (const json& s : j.at("sequences")) {
    SequenceEntry e;
    e.name = s.at("name").get<std::string>();
    e.scan_dir = s.at("scan_dir").get<std::string>();
    e.pose_file = s.at("pose_file").get<std::string>();
    e.tag = s.value("tag", "");
    e.split = s.at("split").get<std::string>();
    if (e.split != "train" && e.split != "test")
      throw std::runtime_error("manifest: bad split '" + e.split + "' in " +
                               path);
    m.sequences.push_back(std::move(e));
  }
  return m;
}

void save_manifest(const std::string& path, const DatasetManifest& manifest) {
  json j;
  j["sequences"] = json::array();
  for (const SequenceEntry& e : manifest.sequences) {
    j["sequences"].push_back({{"name", e.name},
                              {"scan_dir", e.scan_dir},
                              {"pose_file", e.pose_file},
                              {"tag", e.tag},
                              {"split", e.split}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("manifest: cannot write " + path);
  out << j.dump(2) << "\n";
}

namespace {

struct MetaFile {
  int m = 0, b = 0;
  double range_resolution = 0.0;
  std::int64_t timestamp = 0;
};

MetaFile read_meta(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("meta: cannot open " + path);
  MetaFile meta;
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t colon = line.find(':');
    if (colon == std::string::npos) continue;
    const std::string key = line.substr(0, colon);
    const std::string val = line.substr(colon + 1);
    try {
      if (key == "M")
        meta.m = std::stoi(val);
      else if (key == "B")
        meta.b = std::stoi(val);
      else if (key == "range_resolution")
        meta.range_resolution = std::stod(val);
      else if (key == "timestamp_ns")
        meta.timestamp = std::stoll(val);
    } catch (const std::exception&) {
      throw std::runtime_error("meta: malformed value for " + key + " in " +
                               path);
    }
  }
  if (meta.m <= 0 || meta.b <= 0 || meta.range_resolution <= 0.0)
    throw std::runtime_error("meta: missing or invalid fields in " + path);
  return meta;
}

void write_meta(const std::string& path, int m, int b, double resolution,
                std::int64_t timestamp) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("meta: cannot write " + path);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", resolution);
  out << "M: " << m << "\nB: " << b << "\nrange_resolution: " << buf
      << "\ntimestamp_ns: " << timestamp << "\n";
}

}  // namespace

std::vector<LoadedSequence> load_dataset(const DatasetManifest& manifest,
                                         std::int64_t tolerance_ns) {
  std::vector<LoadedSequence> out;
  for (const SequenceEntry& entry : manifest.sequences) {
    const fs::path scan_dir = fs::path(manifest.root) / entry.scan_dir;
    const fs::path pose_path = fs::path(manifest.root) / entry.pose_file;
    if (!fs::is_directory(scan_dir))
      throw std::runtime_error("load_dataset: missing scan dir " +
                               scan_dir.string());

    std::vector<pose::Pose> poses = pose::read_pose_csv(pose_path.string());
    std::sort(poses.begin(), poses.end(),
              [](const pose::Pose& a, const pose::Pose& b) {
                return a.timestamp < b.timestamp;
              });
    if (poses.empty())
      throw std::runtime_error("load_dataset: empty pose file " +
                               pose_path.string());

    std::vector<std::string> scan_files;
    for (const fs::directory_entry& de : fs::directory_iterator(scan_dir))
      if (de.path().extension() == ".npy")
        scan_files.push_back(de.path().string());
    if (scan_files.empty())
      throw std::runtime_error("load_dataset: no scans in " +
                               scan_dir.string());
    std::sort(scan_files.begin(), scan_files.end());

    LoadedSequence seq;
    seq.entry = entry;
    for (const std::string& file : scan_files) {
      npy::LoadedArray arr = npy::read_npy(file);
      fs::path meta_path = fs::path(file);
      meta_path.replace_extension(".meta");
      const MetaFile meta = read_meta(meta_path.string());
      if (arr.array.dim(0) != meta.m || arr.array.dim(1) != meta.b)
        throw std::runtime_error("load_dataset: meta/array shape mismatch " +
                                 file);

      ScanRecord rec;
      rec.scan.intensities = std::move(arr.array);
      rec.scan.range_resolution = meta.range_resolution;
      rec.scan.timestamp = meta.timestamp;
      radar::validate_scan(rec.scan);

      auto it = std::lower_bound(
          poses.begin(), poses.end(), meta.timestamp,
          [](const pose::Pose& p, std::int64_t t) { return p.timestamp < t; });
      const pose::Pose* best = nullptr;
      if (it != poses.end()) best = &*it;
      if (it != poses.begin()) {
        const pose::Pose* prev = &*(it - 1);
        if (!best || std::llabs(prev->timestamp - meta.timestamp) <=
                         std::llabs(best->timestamp - meta.timestamp))
          best = prev;
      }
      if (!best ||
          std::llabs(best->timestamp - meta.timestamp) > tolerance_ns)
        throw std::runtime_error(
            "load_dataset: no pose within tolerance for scan timestamp " +
            std::to_string(meta.timestamp) + " in " + entry.name);
      rec.pose = *best;
      seq.records.push_back(std::move(rec));
    }
    std::sort(seq.records.begin(), seq.records.end(),
              [](const ScanRecord& a, const ScanRecord& b) {
                return a.scan.timestamp < b.scan.timestamp;
              });
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<Frame> convert_sequence(const LoadedSequence& seq, int out_h,
                                    int out_w, double alpha,
                                    radar::Interp interp, radar::Exec exec) {
  std::vector<Frame> frames;
  frames.reserve(seq.records.size());
  for (const ScanRecord& rec : seq.records) {
    Frame f;
    f.image =
        radar::polar_to_cartesian_image(rec.scan, out_h, out_w, alpha, interp,
                                        exec);
    f.pose = rec.pose;
    frames.push_back(std::move(f));
  }
  return frames;
}

std::vector<loss::SequenceWindow> make_windows(const std::vector<Frame>& frames,
                                               int n, int stride) {
  if (n < 1) throw std::invalid_argument("make_windows: N must be >= 1");
  if (stride < 1) throw std::invalid_argument("make_windows: stride must be >= 1");
  std::vector<loss::SequenceWindow> windows;
  const int len = static_cast<int>(frames.size());
  for (int start = 0; start + n <= len; start += stride) {
    loss::SequenceWindow w;
    for (int k = 0; k < n; ++k) {
      w.images.push_back(frames[start + k].image);
      w.gt_poses.push_back(frames[start + k].pose);
      w.indices.push_back(start + k);
    }
    windows.push_back(std::move(w));
  }
  return windows;
}

void validate_world(const SimWorld& world) {
  if (!(world.max_range > 0.0))
    throw std::invalid_argument("SimWorld: max_range must be positive");
  for (const Landmark& lm : world.landmarks)
    if (!(lm.reflectivity > 0.0) || lm.reflectivity > 1.0 || lm.radius < 0.0)
      throw std::invalid_argument("SimWorld: bad landmark");
  for (const DynamicObject& obj : world.dynamic_objects) {
    if (obj.waypoints.empty())
      throw std::invalid_argument("SimWorld: dynamic object needs waypoints");
    if (!(obj.reflectivity > 0.0) || obj.reflectivity > 1.0 || obj.speed < 0.0)
      throw std::invalid_argument("SimWorld: bad dynamic object");
  }
  const NoiseModel& nm = world.noise;
  if (nm.range_sigma < 0.0 || nm.azimuth_sigma < 0.0 ||
      nm.false_positive_rate < 0.0 || nm.false_negative_prob < 0.0 ||
      nm.false_negative_prob > 1.0)
    throw std::invalid_argument("SimWorld: bad noise model");
}

Eigen::Vector2d dynamic_object_position(const DynamicObject& obj,
                                        double time_s) {
  if (obj.waypoints.size() == 1 || obj.speed == 0.0) return obj.waypoints[0];
  std::vector<double> seg_len;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < obj.waypoints.size(); ++i) {
    const double l = (obj.waypoints[i + 1] - obj.waypoints[i]).norm();
    seg_len.push_back(l);
    total += l;
  }
  // close the loop
  const double closing = (obj.waypoints.front() - obj.waypoints.back()).norm();
  seg_len.push_back(closing);
  total += closing;
  if (total <= 0.0) return obj.waypoints[0];
  double s = std::fmod(obj.speed * time_s, total);
  if (s < 0.0) s += total;
  for (std::size_t i = 0; i < seg_len.size(); ++i) {
    if (s <= seg_len[i] || i + 1 == seg_len.size()) {
      const Eigen::Vector2d& a = obj.waypoints[i];
      const Eigen::Vector2d& b =
          obj.waypoints[(i + 1) % obj.waypoints.size()];
      const double f = seg_len[i] > 0.0 ? s / seg_len[i] : 0.0;
      return a + f * (b - a);
    }
    s -= seg_len[i];
  }
  return obj.waypoints[0];
}

namespace {

void paint_blob(Tensor& scan, int M, int B, double af, double bf,
                double amplitude, double sig_a, double sig_b) {
  const int wa = static_cast<int>(std::ceil(4.0 * sig_a));
  const int wb = static_cast<int>(std::ceil(4.0 * sig_b));
  const int a_center = static_cast<int>(std::lround(af));
  const int b_center = static_cast<int>(std::lround(bf));
  for (int da = -wa; da <= wa; ++da) {
    int a = (a_center + da) % M;
    if (a < 0) a += M;
    double dda = static_cast<double>(a) - af;
    dda -= M * std::round(dda / M);  // wrapped azimuth distance
    for (int db = -wb; db <= wb; ++db) {
      const int b = b_center + db;
      if (b < 0 || b >= B) continue;
      const double ddb = static_cast<double>(b) - bf;
      const double e = dda * dda / (2.0 * sig_a * sig_a) +
                       ddb * ddb / (2.0 * sig_b * sig_b);
      scan.at2(a, b) += amplitude * std::exp(-e);
    }
  }
}

}  // namespace

radar::PolarScan simulate_scan(const SimWorld& world, const pose::Pose& pose,
                               int M, int B, double resolution,
                               std::uint64_t rng_seed) {
  validate_world(world);
  if (M < 1 || B < 1 || !(resolution > 0.0))
    throw std::invalid_argument("simulate_scan: bad scan geometry");

  radar::PolarScan scan;
  scan.intensities = Tensor({M, B});
  scan.range_resolution = resolution;
  scan.timestamp = pose.timestamp;

  Rng rng(rng_seed);
  const NoiseModel& nm = world.noise;
  const double time_s = static_cast<double>(pose.timestamp) * 1e-9;
  const double visible_range = std::min(world.max_range, B * resolution);
  const Eigen::Matrix3d rot_t = pose::quat_to_matrix(pose.q).transpose();

  auto add_reflector = [&](const Eigen::Vector2d& world_pos, double refl,
                           double radius) {
    if (nm.false_negative_prob > 0.0 &&
        rng.uniform() < nm.false_negative_prob)
      return;
    const Eigen::Vector3d d =
        rot_t * (Eigen::Vector3d(world_pos[0], world_pos[1], 0.0) - pose.p);
    double range = d.norm();
    double azimuth = std::atan2(d[1], d[0]);
    if (nm.range_sigma > 0.0) range += rng.normal(0.0, nm.range_sigma);
    if (nm.azimuth_sigma > 0.0) azimuth += rng.normal(0.0, nm.azimuth_sigma);
    if (range < 0.0) range = 0.0;
    if (range > visible_range) return;
    if (azimuth < 0.0) azimuth += kTwoPi;
    const double af = azimuth * M / kTwoPi;
    const double bf = range / resolution;
    const double sig_b = 1.5 + radius / resolution;
    const double sig_a =
        1.0 + radius / std::max(range, resolution) * M / kTwoPi;
    paint_blob(scan.intensities, M, B, af, bf, refl, sig_a, sig_b);
  };

  for (const Landmark& lm : world.landmarks)
    add_reflector(lm.pos, lm.reflectivity, lm.radius);
  for (const DynamicObject& obj : world.dynamic_objects)
    add_reflector(dynamic_object_position(obj, time_s), obj.reflectivity,
                  obj.radius);
  if (nm.false_positive_rate > 0.0) {
    const int k = rng.poisson(nm.false_positive_rate);
    for (int i = 0; i < k; ++i) {
      const double af = rng.uniform(0.0, static_cast<double>(M));
      const double bf =
          rng.uniform(0.0, visible_range / resolution);
      const double refl = rng.uniform(0.2, 1.0);
      paint_blob(scan.intensities, M, B, af, bf, refl, 1.0, 1.5);
    }
  }

  for (std::size_t i = 0; i < scan.intensities.numel(); ++i) {
    double& v = scan.intensities[i];
    v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  }
  return scan;
}

SequenceEntry generate_synthetic_sequence(const SimWorld& world,
                                          const std::vector<pose::Pose>& traj,
                                          const SimParams& params,
                                          const std::string& name,
                                          const std::string& out_root) {
  if (traj.empty())
    throw std::invalid_argument("generate_synthetic_sequence: empty trajectory");
  const fs::path seq_dir = fs::path(out_root) / name;
  const fs::path scan_dir = seq_dir / "scans";
  std::error_code ec;
  fs::create_directories(scan_dir, ec);
  if (ec)
    throw std::runtime_error("generate_synthetic_sequence: cannot create " +
                             scan_dir.string() + ": " + ec.message());

  for (std::size_t i = 0; i < traj.size(); ++i) {
    const radar::PolarScan scan =
        simulate_scan(world, traj[i], params.M, params.B, params.resolution,
                      frame_seed(params.seed, i));
    const std::string stem = std::to_string(traj[i].timestamp);
    npy::write_npy((scan_dir / (stem + ".npy")).string(), scan.intensities,
                   npy::Dtype::f32);
    write_meta((scan_dir / (stem + ".meta")).string(), params.M, params.B,
               params.resolution, traj[i].timestamp);
  }
  pose::write_pose_csv((seq_dir / "poses.csv").string(), traj);

  SequenceEntry entry;
  entry.name = name;
  entry.scan_dir = name + "/scans";
  entry.pose_file = name + "/poses.csv";
  entry.tag = params.tag;
  entry.split = params.split;
  return entry;
}

DatasetManifest generate_synthetic_dataset(const SimWorld& world,
                                           const std::vector<pose::Pose>& traj,
                                           const SimParams& params,
                                           const std::string& name,
                                           const std::string& out_root) {
  DatasetManifest manifest;
  manifest.root = out_root;
  manifest.sequences.push_back(
      generate_synthetic_sequence(world, traj, params, name, out_root));
  save_manifest((fs::path(out_root) / "manifest.json").string(), manifest);
  return manifest;
}

std::vector<pose::Pose> loop_trajectory(int n_frames, double radius,
                                        double yaw_amplitude,
                                        std::int64_t t0_ns,
                                        std::int64_t dt_ns) {
  if (n_frames < 1)
    throw std::invalid_argument("loop_trajectory: need at least one frame");
  std::vector<pose::Pose> traj;
  traj.reserve(n_frames);
  for (int i = 0; i < n_frames; ++i) {
    const double phi = kTwoPi * i / n_frames;
    pose::Pose ps;
    ps.p = {radius * std::cos(phi), radius * std::sin(phi), 0.0};
    const double yaw = yaw_amplitude * std::sin(2.0 * phi);
    ps.q = {std::cos(yaw / 2.0), {0.0, 0.0, std::sin(yaw / 2.0)}};
    ps.q = pose::quat_canonicalize(ps.q);
    ps.timestamp = t0_ns + static_cast<std::int64_t>(i) * dt_ns;
    traj.push_back(ps);
  }
  return traj;
}

SimWorld random_world(int n_landmarks, double extent, std::uint64_t seed,
                      int n_dynamic, double noise_level) {
  SimWorld world;
  world.max_range = extent * 2.5;
  Rng rng(seed);
  for (int i = 0; i < n_landmarks; ++i) {
    Landmark lm;
    lm.pos = {rng.uniform(-extent, extent), rng.uniform(-extent, extent)};
    lm.reflectivity = rng.uniform(0.4, 1.0);
    lm.radius = rng.uniform(0.0, 0.5);
    world.landmarks.push_back(lm);
  }
  for (int i = 0; i < n_dynamic; ++i) {
    DynamicObject obj;
    const int n_wp = rng.uniform_int(2, 3);
    for (int k = 0; k < n_wp; ++k)
      obj.waypoints.push_back(
          {rng.uniform(-extent, extent), rng.uniform(-extent, extent)});
    obj.speed = rng.uniform(0.5, 2.0);
    obj.reflectivity = rng.uniform(0.5, 1.0);
    obj.radius = rng.uniform(0.1, 0.4);
    world.dynamic_objects.push_back(obj);
  }
  world.noise.range_sigma = 0.15 * noise_level;
  world.noise.azimuth_sigma = 0.01 * noise_level;
  world.noise.false_positive_rate = 3.0 * noise_level;
  world.noise.false_negative_prob = std::min(0.3, 0.05 * noise_level);
  return world;
}

std::vector<pose::Pose> perturb_trajectory(const std::vector<pose::Pose>& traj,
                                           double pos_sigma, double yaw_sigma,
                                           std::uint64_t seed) {
  Rng rng(seed);
  std::vector<pose::Pose> out;
  out.reserve(traj.size());
  for (const pose::Pose& ps : traj) {
    pose::Pose p = ps;
    p.p[0] += rng.normal(0.0, pos_sigma);
    p.p[1] += rng.normal(0.0, pos_sigma);
    const double dyaw = rng.normal(0.0, yaw_sigma);
    const pose::Quaternion qy{std::cos(dyaw / 2.0),
                              {0.0, 0.0, std::sin(dyaw / 2.0)}};
    p.q = pose::quat_canonicalize(pose::quat_multiply(qy, p.q));
    out.push_back(p);
  }
  return out;
}

}  // namespace radarloc::data
