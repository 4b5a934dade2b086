#include "radarloc/radar_geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace radarloc::radar {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

void validate_scan(const PolarScan& scan) {
  if (scan.intensities.ndim() != 2)
    throw std::domain_error("PolarScan: intensities must be 2-D");
  if (scan.azimuths() < 1 || scan.range_bins() < 1)
    throw std::domain_error("PolarScan: M >= 1 and B >= 1 required");
  if (!(scan.range_resolution > 0.0))
    throw std::domain_error("PolarScan: range_resolution must be positive");
  for (std::size_t i = 0; i < scan.intensities.numel(); ++i) {
    const double v = scan.intensities[i];
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      throw std::domain_error("PolarScan: intensities must lie in [0, 1]");
  }
}

double azimuth_to_angle(int a, int M) {
  if (M <= 0) throw std::domain_error("azimuth_to_angle: M must be positive");
  if (a < 0 || a >= M)
    throw std::domain_error("azimuth_to_angle: azimuth bin out of range");
  return kTwoPi * static_cast<double>(a) / static_cast<double>(M);
}

Eigen::Vector2d polar_point_to_cartesian(int a, double b_meters, int M,
                                         double alpha) {
  if (b_meters < 0.0)
    throw std::domain_error("polar_point_to_cartesian: negative range");
  if (!(alpha > 0.0))
    throw std::domain_error("polar_point_to_cartesian: alpha must be positive");
  const double theta = azimuth_to_angle(a, M);
  return {alpha * std::cos(theta) * b_meters,
          alpha * std::sin(theta) * b_meters};
}

std::pair<double, double> cartesian_to_polar_point(const Eigen::Vector2d& z,
                                                   double alpha) {
  if (!(alpha > 0.0))
    throw std::domain_error("cartesian_to_polar_point: alpha must be positive");
  const double range = z.norm() / alpha;
  double theta = std::atan2(z[1], z[0]);
  if (theta < 0.0) theta += kTwoPi;
  if (theta >= kTwoPi) theta = 0.0;
  return {theta, range};
}

CartesianImage polar_to_cartesian_image(const PolarScan& scan, int out_h,
                                        int out_w, double alpha, Interp interp,
                                        Exec exec) {
  validate_scan(scan);
  if (out_h < 1 || out_w < 1)
    throw std::domain_error("polar_to_cartesian_image: out_size must be >= 1");
  if (!(alpha > 0.0))
    throw std::domain_error("polar_to_cartesian_image: alpha must be positive");

  const int M = scan.azimuths();
  const int B = scan.range_bins();
  const double res = scan.range_resolution;
  const double max_range = scan.max_range();
  const double cy = (out_h - 1) / 2.0;
  const double cx = (out_w - 1) / 2.0;
  const Tensor& in = scan.intensities;

  CartesianImage img;
  img.pixels = Tensor({out_h, out_w});
  img.alpha = alpha;
  img.timestamp = scan.timestamp;
  Tensor& px = img.pixels;

  const bool par = exec == Exec::parallel;
#pragma omp parallel for schedule(static) if (par)
  for (int r = 0; r < out_h; ++r) {
    for (int c = 0; c < out_w; ++c) {
      const double dx = c - cx;
      const double dy = r - cy;
      const double range = std::sqrt(dx * dx + dy * dy) / alpha;
      if (range > max_range) continue;  // zero-filled beyond the last return
      double theta = std::atan2(dy, dx);
      if (theta < 0.0) theta += kTwoPi;
      const double af = theta * M / kTwoPi;  // fractional azimuth bin
      const double bf = range / res;         // fractional range bin
      double v;
      if (interp == Interp::nearest) {
        int an = static_cast<int>(std::lround(af)) % M;
        int bn = static_cast<int>(std::lround(bf));
        if (bn > B - 1) bn = B - 1;
        v = in.at2(an, bn);
      } else {
        const int a0 = static_cast<int>(std::floor(af));
        const double fa = af - a0;
        const int al = a0 % M;
        const int ah = (a0 + 1) % M;
        int b0 = static_cast<int>(std::floor(bf));
        double fb = bf - b0;
        if (b0 >= B - 1) {  // clamp at the outermost measured bin
          b0 = B - 1;
          fb = 0.0;
        }
        const int b1 = b0 + 1 <= B - 1 ? b0 + 1 : B - 1;
        v = (1.0 - fa) * ((1.0 - fb) * in.at2(al, b0) + fb * in.at2(al, b1)) +
            fa * ((1.0 - fb) * in.at2(ah, b0) + fb * in.at2(ah, b1));
      }
      px.at2(r, c) = v;
    }
  }
  return img;
}

}  // namespace radarloc::radar
