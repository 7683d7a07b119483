#include "clothdiff/tensor_file.hpp"

#include <cstring>
#include <fstream>

#include "clothdiff/error.hpp"

namespace clothdiff {

namespace {

constexpr char kMagic[8] = {'C', 'D', 'T', 'E', 'N', 'S', 'O', 'R'};
constexpr uint32_t kVersion = 1;

// x86-64 target; serialize via memcpy of native little-endian scalars.
static_assert(sizeof(double) == 8 && sizeof(float) == 4);

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ConfigError("tensor file truncated: " + path);
  return v;
}

std::size_t dtype_size(Dtype d) {
  switch (d) {
    case Dtype::F64: return 8;
    case Dtype::F32: return 4;
    case Dtype::U8: return 1;
  }
  throw ConfigError("tensor file: unknown dtype");
}

void save_raw(const std::string& path, Dtype dtype, const std::vector<uint64_t>& shape, const void* data,
              std::size_t bytes) {
  uint64_t n = 1;
  for (uint64_t d : shape) n *= d;
  if (n * dtype_size(dtype) != bytes) throw DomainError("tensor file: payload size mismatch for " + path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write tensor file: " + path);
  out.write(kMagic, 8);
  put<uint32_t>(out, kVersion);
  put<uint32_t>(out, static_cast<uint32_t>(dtype));
  put<uint32_t>(out, static_cast<uint32_t>(shape.size()));
  for (uint64_t d : shape) put<uint64_t>(out, d);
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!out) throw ConfigError("write failed: " + path);
}

}  // namespace

std::vector<double> TensorFile::as_f64() const {
  const uint64_t n = numel();
  std::vector<double> out(n);
  switch (dtype) {
    case Dtype::F64:
      std::memcpy(out.data(), payload.data(), n * 8);
      break;
    case Dtype::F32: {
      const float* f = reinterpret_cast<const float*>(payload.data());
      for (uint64_t i = 0; i < n; ++i) out[i] = f[i];
      break;
    }
    case Dtype::U8:
      for (uint64_t i = 0; i < n; ++i) out[i] = payload[i];
      break;
  }
  return out;
}

void save_tensor_f64(const std::string& path, const std::vector<uint64_t>& shape,
                     const std::vector<double>& data) {
  save_raw(path, Dtype::F64, shape, data.data(), data.size() * 8);
}

void save_tensor_f32(const std::string& path, const std::vector<uint64_t>& shape,
                     const std::vector<float>& data) {
  save_raw(path, Dtype::F32, shape, data.data(), data.size() * 4);
}

void save_tensor_u8(const std::string& path, const std::vector<uint64_t>& shape,
                    const std::vector<uint8_t>& data) {
  save_raw(path, Dtype::U8, shape, data.data(), data.size());
}

TensorFile load_tensor_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open tensor file: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw ConfigError("bad magic in tensor file: " + path);
  const uint32_t version = get<uint32_t>(in, path);
  if (version != kVersion) throw ConfigError("unsupported tensor file version in " + path);
  const uint32_t dtype_raw = get<uint32_t>(in, path);
  if (dtype_raw > 2) throw ConfigError("unknown dtype in tensor file: " + path);
  TensorFile tf;
  tf.dtype = static_cast<Dtype>(dtype_raw);
  const uint32_t ndim = get<uint32_t>(in, path);
  if (ndim > 16) throw ConfigError("implausible rank in tensor file: " + path);
  tf.shape.resize(ndim);
  for (uint32_t i = 0; i < ndim; ++i) tf.shape[i] = get<uint64_t>(in, path);
  const uint64_t bytes = tf.numel() * dtype_size(tf.dtype);
  tf.payload.resize(bytes);
  in.read(reinterpret_cast<char*>(tf.payload.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw ConfigError("tensor file truncated: " + path);
  return tf;
}

void save_points(const std::string& path, const std::vector<Vec3>& points) {
  std::vector<double> flat;
  flat.reserve(points.size() * 3);
  for (const Vec3& p : points) {
    flat.push_back(p.x);
    flat.push_back(p.y);
    flat.push_back(p.z);
  }
  save_tensor_f64(path, {points.size(), 3}, flat);
}

std::vector<Vec3> load_points(const std::string& path) {
  const TensorFile tf = load_tensor_file(path);
  if (tf.shape.size() != 2 || tf.shape[1] != 3)
    throw ConfigError("expected [N,3] tensor in " + path);
  const std::vector<double> flat = tf.as_f64();
  std::vector<Vec3> out(tf.shape[0]);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = {flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]};
  return out;
}

void save_frames(const std::string& path, const std::vector<std::vector<Vec3>>& frames) {
  if (frames.empty()) throw DomainError("save_frames: no frames");
  std::vector<double> flat;
  flat.reserve(frames.size() * frames[0].size() * 3);
  for (const auto& frame : frames) {
    if (frame.size() != frames[0].size()) throw DomainError("save_frames: ragged frames");
    for (const Vec3& p : frame) {
      flat.push_back(p.x);
      flat.push_back(p.y);
      flat.push_back(p.z);
    }
  }
  save_tensor_f64(path, {frames.size(), frames[0].size(), 3}, flat);
}

std::vector<std::vector<Vec3>> load_frames(const std::string& path) {
  const TensorFile tf = load_tensor_file(path);
  if (tf.shape.size() != 3 || tf.shape[2] != 3)
    throw ConfigError("expected [F,N,3] tensor in " + path);
  const std::vector<double> flat = tf.as_f64();
  std::vector<std::vector<Vec3>> out(tf.shape[0], std::vector<Vec3>(tf.shape[1]));
  std::size_t idx = 0;
  for (auto& frame : out)
    for (Vec3& p : frame) {
      p = {flat[idx], flat[idx + 1], flat[idx + 2]};
      idx += 3;
    }
  return out;
}

}  // namespace clothdiff
