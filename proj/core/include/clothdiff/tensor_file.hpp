#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clothdiff/vec3.hpp"

namespace clothdiff {

// Binary tensor container:
//   magic "CDTENSOR" | version u32 | dtype u32 | ndim u32 | shape u64*ndim |
//   payload (little-endian, row-major)
enum class Dtype : uint32_t { F64 = 0, F32 = 1, U8 = 2 };

struct TensorFile {
  Dtype dtype{Dtype::F64};
  std::vector<uint64_t> shape;
  std::vector<uint8_t> payload;  // raw little-endian bytes

  uint64_t numel() const {
    uint64_t n = 1;
    for (uint64_t d : shape) n *= d;
    return n;
  }
  std::vector<double> as_f64() const;
};

void save_tensor_f64(const std::string& path, const std::vector<uint64_t>& shape,
                     const std::vector<double>& data);
void save_tensor_f32(const std::string& path, const std::vector<uint64_t>& shape,
                     const std::vector<float>& data);
void save_tensor_u8(const std::string& path, const std::vector<uint64_t>& shape,
                    const std::vector<uint8_t>& data);
TensorFile load_tensor_file(const std::string& path);

// [N,3] float64 convenience wrappers for point lists.
void save_points(const std::string& path, const std::vector<Vec3>& points);
std::vector<Vec3> load_points(const std::string& path);

// [F,N,3] stacked frames.
void save_frames(const std::string& path, const std::vector<std::vector<Vec3>>& frames);
std::vector<std::vector<Vec3>> load_frames(const std::string& path);

}  // namespace clothdiff
