#pragma once

#include <string>

#include "radarloc/tensor.hpp"

namespace radarloc::npy {

enum class Dtype { u8, f32, f64 };

// Minimal NPY v1.0 support for 2-D C-order arrays, which is all the
// scan/image files need. u8 data is mapped to [0,1] by dividing by 255.
void write_npy(const std::string& path, const Tensor& array2d, Dtype dtype);

struct LoadedArray {
  Tensor array;  // always doubles; u8 sources scaled by 1/255
  Dtype dtype = Dtype::f64;
};

LoadedArray read_npy(const std::string& path);

}  // namespace radarloc::npy
