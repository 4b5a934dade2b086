#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "radarloc/npy.hpp"

using namespace radarloc;
using oracles::random_tensor;

namespace {

std::string tmp_file(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("f64 round trip is exact") {
  Rng rng(91);
  const Tensor a = random_tensor({7, 5}, rng);
  const std::string path = tmp_file("radarloc_npy_f64.npy");
  npy::write_npy(path, a, npy::Dtype::f64);
  const npy::LoadedArray back = npy::read_npy(path);
  CHECK(back.dtype == npy::Dtype::f64);
  REQUIRE(back.array.same_shape(a));
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(back.array[i] == a[i]);
  std::filesystem::remove(path);
}

TEST_CASE("f32 round trip loses only float precision") {
  Rng rng(92);
  const Tensor a = random_tensor({4, 9}, rng);
  const std::string path = tmp_file("radarloc_npy_f32.npy");
  npy::write_npy(path, a, npy::Dtype::f32);
  const npy::LoadedArray back = npy::read_npy(path);
  CHECK(back.dtype == npy::Dtype::f32);
  REQUIRE(back.array.same_shape(a));
  for (std::size_t i = 0; i < a.numel(); ++i) {
    CHECK(back.array[i] == static_cast<double>(static_cast<float>(a[i])));
  }
  std::filesystem::remove(path);
}

TEST_CASE("u8 round trip quantizes to 1/255 steps") {
  Tensor a({2, 3});
  const double vals[6] = {0.0, 1.0, 0.5, 0.25, 0.8, 1.0 / 255.0};
  for (int i = 0; i < 6; ++i) a[i] = vals[i];
  const std::string path = tmp_file("radarloc_npy_u8.npy");
  npy::write_npy(path, a, npy::Dtype::u8);
  const npy::LoadedArray back = npy::read_npy(path);
  CHECK(back.dtype == npy::Dtype::u8);
  for (std::size_t i = 0; i < a.numel(); ++i) {
    CHECK(back.array[i] >= 0.0);
    CHECK(back.array[i] <= 1.0);
    CHECK(std::abs(back.array[i] - a[i]) <= 0.5 / 255.0 + 1e-12);
  }
  // exact endpoints survive
  CHECK(back.array[0] == 0.0);
  CHECK(back.array[1] == 1.0);
  std::filesystem::remove(path);
}

TEST_CASE("the header is the numpy v1 format") {
  Tensor a({3, 2});
  const std::string path = tmp_file("radarloc_npy_hdr.npy");
  npy::write_npy(path, a, npy::Dtype::f64);

  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  REQUIRE(bytes.size() > 10);
  CHECK(bytes.compare(0, 6, "\x93NUMPY") == 0);
  CHECK(bytes[6] == 1);  // major version
  CHECK(bytes[7] == 0);
  const std::size_t hlen = static_cast<unsigned char>(bytes[8]) |
                           (static_cast<unsigned char>(bytes[9]) << 8);
  CHECK((10 + hlen) % 64 == 0);
  const std::string header = bytes.substr(10, hlen);
  CHECK(header.find("'descr': '<f8'") != std::string::npos);
  CHECK(header.find("'fortran_order': False") != std::string::npos);
  CHECK(header.find("(3, 2)") != std::string::npos);
  CHECK(header.back() == '\n');
  // payload: 6 doubles follow the header
  CHECK(bytes.size() == 10 + hlen + 6 * 8);
  std::filesystem::remove(path);
}

TEST_CASE("same array writes identical bytes") {
  Rng rng(93);
  const Tensor a = random_tensor({6, 6}, rng);
  const std::string p1 = tmp_file("radarloc_npy_d1.npy");
  const std::string p2 = tmp_file("radarloc_npy_d2.npy");
  npy::write_npy(p1, a, npy::Dtype::f32);
  npy::write_npy(p2, a, npy::Dtype::f32);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)),
                       std::istreambuf_iterator<char>());
  const std::string b2((std::istreambuf_iterator<char>(f2)),
                       std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST_CASE("malformed files are rejected with the path in the message") {
  const std::string path = tmp_file("radarloc_npy_bad.npy");
  {
    std::ofstream out(path, std::ios::binary);
    out << "not an npy file at all";
  }
  try {
    npy::read_npy(path);
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find(path) != std::string::npos);
  }
  std::filesystem::remove(path);
  CHECK_THROWS(npy::read_npy(tmp_file("radarloc_npy_missing.npy")));
}

TEST_CASE("non-2d arrays are rejected on write") {
  CHECK_THROWS(npy::write_npy(tmp_file("radarloc_npy_1d.npy"), Tensor({4}),
                              npy::Dtype::f64));
}
