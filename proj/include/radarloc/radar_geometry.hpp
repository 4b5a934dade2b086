#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "radarloc/kernels.hpp"
#include "radarloc/tensor.hpp"

namespace radarloc::radar {

using kernels::Exec;

// Raw FMCW returns: intensities[a, b] for azimuth bin a, range bin b.
struct PolarScan {
  Tensor intensities;  // [M, B], values in [0, 1]
  double range_resolution = 1.0;  // meters per range bin
  std::int64_t timestamp = 0;

  int azimuths() const { return intensities.dim(0); }
  int range_bins() const { return intensities.dim(1); }
  double max_range() const { return range_bins() * range_resolution; }
};

// Bird's-eye intensity grid; the sensor sits at the image center.
struct CartesianImage {
  Tensor pixels;  // [H, W], values in [0, 1]
  double alpha = 1.0;  // pixels per meter
  std::int64_t timestamp = 0;

  int height() const { return pixels.dim(0); }
  int width() const { return pixels.dim(1); }
};

enum class Interp { nearest, bilinear };

void validate_scan(const PolarScan& scan);

// theta = 2*pi*a / M
double azimuth_to_angle(int a, int M);

// Z = (alpha*cos(theta)*b, alpha*sin(theta)*b), pixels relative to the
// image center; x is the column direction, y the row direction.
Eigen::Vector2d polar_point_to_cartesian(int a, double b_meters, int M,
                                         double alpha);

// Inverse of the point map: pixel offset -> (theta in [0, 2pi), range m).
std::pair<double, double> cartesian_to_polar_point(const Eigen::Vector2d& z,
                                                   double alpha);

// Output-pixel-driven resampling of the polar grid. Pixels beyond the
// scan's maximum range are exactly 0; interpolation never leaves the
// convex hull of the input intensities.
CartesianImage polar_to_cartesian_image(const PolarScan& scan, int out_h,
                                        int out_w, double alpha,
                                        Interp interp = Interp::bilinear,
                                        Exec exec = Exec::parallel);

}  // namespace radarloc::radar
