#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "radarloc/kernels.hpp"
#include "radarloc/rng.hpp"
#include "radarloc/tensor.hpp"

using namespace radarloc;
using kernels::Exec;

namespace {

Tensor random_tensor(const std::vector<int>& shape, Rng& rng) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.normal();
  return t;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.same_shape(b) &&
         std::memcmp(a.data(), b.data(), a.numel() * sizeof(double)) == 0;
}

struct Case {
  std::string name;
  std::function<Tensor(Exec)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs parallel kernel comparison"};
  int size = 96, channels = 16, reps = 5;
  std::uint64_t seed = 7;
  app.add_option("--size", size, "feature map side");
  app.add_option("--channels", channels, "channel count");
  app.add_option("--reps", reps, "timed repetitions");
  app.add_option("--seed", seed, "input seed");
  CLI11_PARSE(app, argc, argv);

  Rng rng(seed);
  const Tensor x = random_tensor({channels, size, size}, rng);
  const Tensor w = random_tensor({channels, channels, 3, 3}, rng);
  const Tensor b = random_tensor({channels}, rng);
  const Tensor gy = random_tensor({channels, size, size}, rng);

  std::vector<Case> cases;
  cases.push_back({"conv2d_forward", [&](Exec e) {
                     Tensor y;
                     kernels::conv2d_forward(x, w, b, 1, 1, y, e);
                     return y;
                   }});
  cases.push_back({"conv2d_backward_input", [&](Exec e) {
                     Tensor gx(x.shape());
                     kernels::conv2d_backward_input(gy, w, 1, 1, gx, e);
                     return gx;
                   }});
  cases.push_back({"conv2d_backward_weight", [&](Exec e) {
                     Tensor gw(w.shape()), gb(b.shape());
                     kernels::conv2d_backward_weight(gy, x, 1, 1, gw, gb, e);
                     return gw;
                   }});
  cases.push_back({"relu_forward", [&](Exec e) {
                     Tensor y;
                     kernels::relu_forward(x, y, e);
                     return y;
                   }});
  cases.push_back({"sigmoid_forward", [&](Exec e) {
                     Tensor y;
                     kernels::sigmoid_forward(x, y, e);
                     return y;
                   }});
  cases.push_back({"avgpool2_forward", [&](Exec e) {
                     Tensor y;
                     kernels::avgpool2_forward(x, y, e);
                     return y;
                   }});
  cases.push_back({"upsample2_forward", [&](Exec e) {
                     Tensor y;
                     kernels::upsample2_forward(x, y, e);
                     return y;
                   }});

  std::printf("%-24s %12s %12s %9s %8s\n", "kernel", "serial ms", "parallel ms",
              "speedup", "bitwise");
  bool all_equal = true;
  for (const Case& c : cases) {
    auto time_one = [&](Exec e) {
      Tensor out = c.run(e);  // warm up and keep the result
      const auto t0 = std::chrono::steady_clock::now();
      for (int r = 0; r < reps; ++r) out = c.run(e);
      const auto t1 = std::chrono::steady_clock::now();
      const double ms =
          std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
      return std::pair<double, Tensor>(ms, std::move(out));
    };
    const auto [serial_ms, serial_out] = time_one(Exec::serial);
    const auto [parallel_ms, parallel_out] = time_one(Exec::parallel);
    const bool equal = bitwise_equal(serial_out, parallel_out);
    all_equal = all_equal && equal;
    std::printf("%-24s %12.3f %12.3f %8.2fx %8s\n", c.name.c_str(), serial_ms,
                parallel_ms, serial_ms / parallel_ms,
                equal ? "equal" : "DIFFERS");
  }
  if (!all_equal) {
    std::fprintf(stderr, "error: serial and parallel outputs differ\n");
    return 1;
  }
  return 0;
}
