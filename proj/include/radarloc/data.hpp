#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "radarloc/losses.hpp"
#include "radarloc/pose_algebra.hpp"
#include "radarloc/radar_geometry.hpp"
#include "radarloc/rng.hpp"

namespace radarloc::data {

struct SequenceEntry {
  std::string name;
  std::string scan_dir;   // relative to manifest root
  std::string pose_file;  // relative to manifest root
  std::string tag;        // weather label
  std::string split;      // train | test
};

struct DatasetManifest {
  std::string root;  // directory containing the manifest file
  std::vector<SequenceEntry> sequences;
};

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const DatasetManifest& manifest);

struct ScanRecord {
  radar::PolarScan scan;
  pose::Pose pose;
};

struct LoadedSequence {
  SequenceEntry entry;
  std::vector<ScanRecord> records;  // sorted by timestamp
};

// Loads every sequence, pairing each scan with the nearest pose row.
// A scan whose nearest pose is further than tolerance_ns away is a hard
// error, as are empty scan directories and malformed files.
std::vector<LoadedSequence> load_dataset(const DatasetManifest& manifest,
                                         std::int64_t tolerance_ns = 1000000);

struct Frame {
  radar::CartesianImage image;
  pose::Pose pose;
};

std::vector<Frame> convert_sequence(const LoadedSequence& seq, int out_h,
                                    int out_w, double alpha,
                                    radar::Interp interp,
                                    radar::Exec exec = radar::Exec::parallel);

// Windows of N consecutive frames; count = floor((len-N)/stride) + 1.
std::vector<loss::SequenceWindow> make_windows(const std::vector<Frame>& frames,
                                               int n, int stride);

// --- synthetic radar world ------------------------------------------------

struct Landmark {
  Eigen::Vector2d pos = {0.0, 0.0};  // meters, world frame
  double reflectivity = 1.0;         // in (0, 1]
  double radius = 0.0;               // meters; widens the return blob
};

struct DynamicObject {
  std::vector<Eigen::Vector2d> waypoints;  // looped polyline, meters
  double speed = 1.0;                      // meters per second
  double reflectivity = 1.0;
  double radius = 0.0;
};

struct NoiseModel {
  double range_sigma = 0.0;          // meters
  double azimuth_sigma = 0.0;        // radians
  double false_positive_rate = 0.0;  // expected blobs per scan
  double false_negative_prob = 0.0;
};

struct SimWorld {
  std::vector<Landmark> landmarks;
  std::vector<DynamicObject> dynamic_objects;
  NoiseModel noise;
  double max_range = 64.0;  // meters
};

void validate_world(const SimWorld& world);

Eigen::Vector2d dynamic_object_position(const DynamicObject& obj,
                                        double time_s);

// Gaussian blob per visible reflector at its (azimuth, range) in the
// sensor frame; blob widths 1.5 range bins and 1.0 azimuth bins, plus
// the reflector radius. Deterministic per seed.
radar::PolarScan simulate_scan(const SimWorld& world, const pose::Pose& pose,
                               int M, int B, double resolution,
                               std::uint64_t rng_seed);

struct SimParams {
  int M = 64;
  int B = 64;
  double resolution = 1.0;  // meters per range bin
  std::uint64_t seed = 1;
  std::string tag = "clear";
  std::string split = "train";
};

// Writes scans (npy + meta sidecar) and poses.csv for one sequence under
// out_root/<name>/ and returns the manifest entry.
SequenceEntry generate_synthetic_sequence(const SimWorld& world,
                                          const std::vector<pose::Pose>& traj,
                                          const SimParams& params,
                                          const std::string& name,
                                          const std::string& out_root);

// Convenience wrapper writing a one-sequence manifest as well.
DatasetManifest generate_synthetic_dataset(const SimWorld& world,
                                           const std::vector<pose::Pose>& traj,
                                           const SimParams& params,
                                           const std::string& name,
                                           const std::string& out_root);

// --- fixture helpers --------------------------------------------------------

// Circular loop in the xy plane with oscillating yaw, timestamps spaced
// dt_ns apart starting at t0_ns.
std::vector<pose::Pose> loop_trajectory(int n_frames, double radius,
                                        double yaw_amplitude,
                                        std::int64_t t0_ns = 1000000000,
                                        std::int64_t dt_ns = 250000000);

SimWorld random_world(int n_landmarks, double extent, std::uint64_t seed,
                      int n_dynamic = 0, double noise_level = 0.0);

// Jittered copy of a trajectory (position + yaw noise), mirroring repeat
// traversals of one route.
std::vector<pose::Pose> perturb_trajectory(const std::vector<pose::Pose>& traj,
                                           double pos_sigma, double yaw_sigma,
                                           std::uint64_t seed);

}  // namespace radarloc::data
