#include <doctest.h>

#include <cmath>
#include <cstring>

#include "oracles.hpp"
#include "radarloc/radar_geometry.hpp"

using namespace radarloc;
using radar::CartesianImage;
using radar::Exec;
using radar::Interp;
using radar::PolarScan;

namespace {

PolarScan make_scan(int m, int b, double res, double fill = 0.0) {
  PolarScan scan;
  scan.intensities = Tensor({m, b}, fill);
  scan.range_resolution = res;
  scan.timestamp = 42;
  return scan;
}

}  // namespace

TEST_CASE("azimuth_to_angle frozen values") {
  // 2*pi*25/400 = pi/8, computed independently
  CHECK(radar::azimuth_to_angle(25, 400) ==
        doctest::Approx(0.39269908169872414).epsilon(1e-15));
  CHECK(radar::azimuth_to_angle(0, 7) == 0.0);
  CHECK(radar::azimuth_to_angle(200, 400) == doctest::Approx(M_PI));
  CHECK_THROWS(radar::azimuth_to_angle(400, 400));
  CHECK_THROWS(radar::azimuth_to_angle(-1, 400));
}

TEST_CASE("polar point map frozen oracle") {
  // a=37, b=12.5 m, M=400, alpha=0.25; theta and Z precomputed at high
  // precision outside this codebase
  const double theta = radar::azimuth_to_angle(37, 400);
  CHECK(theta == doctest::Approx(0.5811946409141118).epsilon(1e-15));
  const Eigen::Vector2d z = radar::polar_point_to_cartesian(37, 12.5, 400, 0.25);
  CHECK(z[0] == doctest::Approx(2.6118980042758446).epsilon(1e-14));
  CHECK(z[1] == doctest::Approx(1.715696306244162).epsilon(1e-14));
}

TEST_CASE("polar point map over random inputs against direct trigonometry") {
  Rng rng(51);
  for (int i = 0; i < 300; ++i) {
    const int M = 2 + rng.uniform_int(0, 500);
    const int a = rng.uniform_int(0, M - 1);
    const double b = rng.uniform(0.0, 100.0);
    const double alpha = rng.uniform(0.05, 4.0);
    const Eigen::Vector2d z = radar::polar_point_to_cartesian(a, b, M, alpha);
    const double theta = 2.0 * M_PI * a / M;
    CHECK(std::abs(z[0] - alpha * std::cos(theta) * b) < 1e-9);
    CHECK(std::abs(z[1] - alpha * std::sin(theta) * b) < 1e-9);
  }
}

TEST_CASE("point round trip below 1e-9") {
  Rng rng(52);
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const int M = 2 + rng.uniform_int(0, 500);
    const int a = rng.uniform_int(0, M - 1);
    const double b = rng.uniform(0.01, 100.0);
    const double alpha = rng.uniform(0.05, 4.0);
    const Eigen::Vector2d z = radar::polar_point_to_cartesian(a, b, M, alpha);
    const auto [theta, range] = radar::cartesian_to_polar_point(z, alpha);
    worst = std::max(worst, std::abs(range - b));
    double dt = std::abs(theta - radar::azimuth_to_angle(a, M));
    dt = std::min(dt, 2.0 * M_PI - dt);
    worst = std::max(worst, dt);
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("image support is the max-range disk") {
  PolarScan scan = make_scan(16, 10, 2.0, 1.0);  // max range 20 m
  const CartesianImage img =
      radar::polar_to_cartesian_image(scan, 61, 61, 1.0, Interp::nearest,
                                      Exec::serial);
  const double cy = 30.0, cx = 30.0;
  for (int r = 0; r < 61; ++r)
    for (int c = 0; c < 61; ++c) {
      const double d = std::hypot(r - cy, c - cx);
      if (d <= 20.0) {
        CHECK(img.pixels.at2(r, c) == 1.0);
      } else {
        CHECK(img.pixels.at2(r, c) == 0.0);
      }
    }
}

TEST_CASE("single bright cell lands at the predicted pixel") {
  PolarScan scan = make_scan(8, 10, 2.0);
  scan.intensities.at2(0, 5) = 1.0;  // azimuth 0, range 10 m

  for (Interp interp : {Interp::nearest, Interp::bilinear}) {
    const CartesianImage img =
        radar::polar_to_cartesian_image(scan, 41, 41, 1.0, interp,
                                        Exec::serial);
    // center (20, 20); +x is the column direction, so 10 px to the right
    CHECK(img.pixels.at2(20, 30) == 1.0);
    CHECK(img.pixels.at2(20, 10) == 0.0);
    CHECK(img.pixels.at2(10, 20) == 0.0);
  }
}

TEST_CASE("bilinear output stays inside the input convex hull") {
  Rng rng(53);
  PolarScan scan = make_scan(12, 9, 1.5);
  for (std::size_t i = 0; i < scan.intensities.numel(); ++i)
    scan.intensities[i] = rng.uniform();
  const CartesianImage img = radar::polar_to_cartesian_image(
      scan, 33, 33, 1.2, Interp::bilinear, Exec::serial);
  const double lo = scan.intensities.min(), hi = scan.intensities.max();
  for (std::size_t i = 0; i < img.pixels.numel(); ++i) {
    CHECK(img.pixels[i] >= 0.0);
    CHECK(img.pixels[i] <= hi + 1e-12);
    if (img.pixels[i] > 0.0) CHECK(img.pixels[i] >= lo - 1e-12);
  }
}

TEST_CASE("azimuth interpolation wraps around 2 pi") {
  PolarScan scan = make_scan(8, 10, 2.0);
  for (int b = 0; b < 10; ++b) {
    scan.intensities.at2(0, b) = 1.0;
    scan.intensities.at2(7, b) = 1.0;
  }
  const CartesianImage img = radar::polar_to_cartesian_image(
      scan, 41, 41, 1.0, Interp::bilinear, Exec::serial);
  // a pixel just below the +x axis has theta slightly under 2*pi and
  // must blend bins 7 and 0, both bright here
  CHECK(img.pixels.at2(19, 30) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("alpha controls metric scale monotonically") {
  PolarScan scan = make_scan(16, 8, 1.0, 1.0);  // max range 8 m
  const CartesianImage small = radar::polar_to_cartesian_image(
      scan, 41, 41, 1.0, Interp::nearest, Exec::serial);
  const CartesianImage large = radar::polar_to_cartesian_image(
      scan, 41, 41, 2.5, Interp::nearest, Exec::serial);
  int n_small = 0, n_large = 0;
  for (std::size_t i = 0; i < small.pixels.numel(); ++i) {
    if (small.pixels[i] != 0.0) {
      ++n_small;
      // a pixel inside the small-alpha disk is inside the larger one too
      CHECK(large.pixels[i] != 0.0);
    }
    if (large.pixels[i] != 0.0) ++n_large;
  }
  CHECK(n_small < n_large);
}

TEST_CASE("image carries scan metadata") {
  PolarScan scan = make_scan(8, 8, 1.0);
  const CartesianImage img = radar::polar_to_cartesian_image(
      scan, 16, 16, 2.0, Interp::nearest, Exec::serial);
  CHECK(img.timestamp == 42);
  CHECK(img.alpha == 2.0);
  CHECK(img.height() == 16);
  CHECK(img.width() == 16);
}

TEST_CASE("serial and parallel resampling are bitwise identical") {
  Rng rng(54);
  PolarScan scan = make_scan(32, 24, 0.8);
  for (std::size_t i = 0; i < scan.intensities.numel(); ++i)
    scan.intensities[i] = rng.uniform();
  for (Interp interp : {Interp::nearest, Interp::bilinear}) {
    const CartesianImage a =
        radar::polar_to_cartesian_image(scan, 50, 50, 1.7, interp,
                                        Exec::serial);
    const CartesianImage b =
        radar::polar_to_cartesian_image(scan, 50, 50, 1.7, interp,
                                        Exec::parallel);
    CHECK(std::memcmp(a.pixels.data(), b.pixels.data(),
                      a.pixels.numel() * sizeof(double)) == 0);
  }
}

TEST_CASE("scan validation rejects malformed input") {
  PolarScan scan = make_scan(4, 4, 1.0);
  scan.intensities.at2(0, 0) = -0.1;
  CHECK_THROWS(radar::validate_scan(scan));
  scan.intensities.at2(0, 0) = 1.5;
  CHECK_THROWS(radar::validate_scan(scan));
  scan.intensities.at2(0, 0) = 0.5;
  CHECK_NOTHROW(radar::validate_scan(scan));
  scan.range_resolution = 0.0;
  CHECK_THROWS(radar::validate_scan(scan));
}
