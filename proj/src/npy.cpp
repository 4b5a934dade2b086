#include "radarloc/npy.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace radarloc::npy {

namespace {

const char kMagic[6] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};

const char* descr_of(Dtype d) {
  switch (d) {
    case Dtype::u8: return "|u1";
    case Dtype::f32: return "<f4";
    case Dtype::f64: return "<f8";
  }
  throw std::logic_error("npy: bad dtype");
}

[[noreturn]] void fail(const std::string& path, const std::string& why) {
  throw std::runtime_error("npy: " + why + " (" + path + ")");
}

// extracts the value of 'key': ... from the python-dict header text
std::string dict_value(const std::string& header, const std::string& key,
                       const std::string& path) {
  const std::string quoted = "'" + key + "'";
  std::size_t pos = header.find(quoted);
  if (pos == std::string::npos) fail(path, "header missing key " + key);
  pos = header.find(':', pos);
  if (pos == std::string::npos) fail(path, "malformed header");
  ++pos;
  while (pos < header.size() && header[pos] == ' ') ++pos;
  std::size_t end = pos;
  int depth = 0;
  while (end < header.size()) {
    const char c = header[end];
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) break;
    if (c == '}') break;
    ++end;
  }
  return header.substr(pos, end - pos);
}

}  // namespace

void write_npy(const std::string& path, const Tensor& array2d, Dtype dtype) {
  if (array2d.ndim() != 2) fail(path, "only 2-D arrays supported");
  std::string header = "{'descr': '";
  header += descr_of(dtype);
  header += "', 'fortran_order': False, 'shape': (";
  header += std::to_string(array2d.dim(0)) + ", " +
            std::to_string(array2d.dim(1)) + "), }";
  // pad so that magic(6) + version(2) + len(2) + header is 64-aligned
  std::size_t total = 10 + header.size() + 1;
  header.append((64 - total % 64) % 64, ' ');
  header += '\n';

  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");
  out.write(kMagic, 6);
  const char version[2] = {1, 0};
  out.write(version, 2);
  const std::uint16_t hlen = static_cast<std::uint16_t>(header.size());
  const char lenb[2] = {static_cast<char>(hlen & 0xff),
                        static_cast<char>(hlen >> 8)};
  out.write(lenb, 2);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));

  const std::size_t n = array2d.numel();
  if (dtype == Dtype::u8) {
    std::vector<unsigned char> buf(n);
    for (std::size_t i = 0; i < n; ++i) {
      double v = array2d[i];
      v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
      buf[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(n));
  } else if (dtype == Dtype::f32) {
    std::vector<float> buf(n);
    for (std::size_t i = 0; i < n; ++i) buf[i] = static_cast<float>(array2d[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(n * 4));
  } else {
    out.write(reinterpret_cast<const char*>(array2d.data()),
              static_cast<std::streamsize>(n * 8));
  }
  if (!out) fail(path, "write failed");
}

LoadedArray read_npy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  char magic[6];
  in.read(magic, 6);
  if (!in || std::memcmp(magic, kMagic, 6) != 0) fail(path, "bad magic");
  char version[2];
  in.read(version, 2);
  if (!in || version[0] != 1) fail(path, "unsupported npy version");
  unsigned char lenb[2];
  in.read(reinterpret_cast<char*>(lenb), 2);
  if (!in) fail(path, "truncated header");
  const std::size_t hlen = lenb[0] | (lenb[1] << 8);
  std::string header(hlen, '\0');
  in.read(header.data(), static_cast<std::streamsize>(hlen));
  if (!in) fail(path, "truncated header");

  const std::string descr = dict_value(header, "descr", path);
  const std::string order = dict_value(header, "fortran_order", path);
  if (order.find("False") == std::string::npos)
    fail(path, "fortran order not supported");
  std::string shape = dict_value(header, "shape", path);

  std::vector<int> dims;
  std::size_t pos = 0;
  while (pos < shape.size()) {
    while (pos < shape.size() && !std::isdigit(shape[pos])) ++pos;
    if (pos >= shape.size()) break;
    std::size_t end = pos;
    while (end < shape.size() && std::isdigit(shape[end])) ++end;
    dims.push_back(std::stoi(shape.substr(pos, end - pos)));
    pos = end;
  }
  if (dims.size() != 2) fail(path, "only 2-D arrays supported");

  Dtype dtype;
  if (descr.find("u1") != std::string::npos)
    dtype = Dtype::u8;
  else if (descr.find("f4") != std::string::npos)
    dtype = Dtype::f32;
  else if (descr.find("f8") != std::string::npos)
    dtype = Dtype::f64;
  else
    fail(path, "unsupported dtype " + descr);
  if (descr.find(">") != std::string::npos)
    fail(path, "big-endian data not supported");

  LoadedArray out;
  out.dtype = dtype;
  out.array = Tensor(dims);
  const std::size_t n = out.array.numel();
  if (dtype == Dtype::u8) {
    std::vector<unsigned char> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(n));
    if (!in) fail(path, "truncated data");
    for (std::size_t i = 0; i < n; ++i) out.array[i] = buf[i] / 255.0;
  } else if (dtype == Dtype::f32) {
    std::vector<float> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(n * 4));
    if (!in) fail(path, "truncated data");
    for (std::size_t i = 0; i < n; ++i) out.array[i] = buf[i];
  } else {
    in.read(reinterpret_cast<char*>(out.array.data()),
            static_cast<std::streamsize>(n * 8));
    if (!in) fail(path, "truncated data");
  }
  return out;
}

}  // namespace radarloc::npy
