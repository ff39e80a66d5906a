// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#include "steerkit/tensor_file.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>

#include "steerkit/error.hpp"

namespace steerkit {
namespace {

constexpr std::uint8_t kMagic[4] = {'F', '3', '2', 'T'};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>((v >> s) & 0xFF));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(in[at + static_cast<std::size_t>(b)]) << (8 * b);
  return v;
}

std::uint16_t get_u16(const std::vector<std::uint8_t>& in, std::size_t at) {
  return static_cast<std::uint16_t>(in[at] | (in[at + 1] << 8));
}

void need(const std::vector<std::uint8_t>& in, std::size_t at, std::size_t len, const char* what) {
  if (in.size() < at + len) {
    fail(ErrorCode::format, std::string("truncated ") + what + " at byte offset " + std::to_string(at) + ": expected " +
                                std::to_string(at + len) + " bytes, got " + std::to_string(in.size()));
  }
}

void expect_shape(const Tensor& t, std::size_t ndim, const char* what) {
  require(t.dims.size() == ndim, ErrorCode::format,
          std::string(what) + " tensor needs " + std::to_string(ndim) + " dims, got " + std::to_string(t.dims.size()));
}

}  // namespace

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (std::uint32_t d : dims) n *= d;
  return n;
}

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor) {
  require(tensor.dims.size() <= std::numeric_limits<std::uint16_t>::max(), ErrorCode::invalid_argument, "too many dims");
  require(tensor.data.size() == tensor.element_count(), ErrorCode::invalid_argument,
          "payload has " + std::to_string(tensor.data.size()) + " values for " + std::to_string(tensor.element_count()) +
              " elements");
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.reserve(8 + 4 * tensor.dims.size() + 4 * tensor.data.size());
  put_u16(out, kTensorFileVersion);
  put_u16(out, static_cast<std::uint16_t>(tensor.dims.size()));
  for (std::uint32_t d : tensor.dims) put_u32(out, d);
  for (float f : tensor.data) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

Tensor decode_tensor(const std::vector<std::uint8_t>& in) {
  need(in, 0, 8, "header");
  for (std::size_t i = 0; i < 4; ++i) {
    if (in[i] != kMagic[i]) fail(ErrorCode::format, "bad magic at byte offset " + std::to_string(i));
  }
  const std::uint16_t version = get_u16(in, 4);
  if (version != kTensorFileVersion) {
    fail(ErrorCode::format, "unsupported version " + std::to_string(version) + " at byte offset 4");
  }
  const std::size_t ndim = get_u16(in, 6);
  need(in, 8, 4 * ndim, "dims");
  Tensor t;
  for (std::size_t i = 0; i < ndim; ++i) t.dims.push_back(get_u32(in, 8 + 4 * i));
  const std::size_t payload_at = 8 + 4 * ndim;
  const std::size_t n = t.element_count();
  const std::size_t expected = payload_at + 4 * n;
  if (in.size() != expected) {
    fail(ErrorCode::format, "payload at byte offset " + std::to_string(payload_at) + ": expected total length " +
                                std::to_string(expected) + " bytes, got " + std::to_string(in.size()));
  }
  t.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) t.data[i] = std::bit_cast<float>(get_u32(in, payload_at + 4 * i));
  return t;
}

void write_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  const std::vector<std::uint8_t> bytes = encode_tensor(tensor);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::format, "cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) fail(ErrorCode::format, "write failed for " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::format, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return decode_tensor(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

Tensor to_tensor(const FeatureMap& map) {
  Tensor t{{static_cast<std::uint32_t>(map.height()), static_cast<std::uint32_t>(map.width()),
            static_cast<std::uint32_t>(map.channels())},
           {}};
  t.data.assign(map.data().begin(), map.data().end());
  return t;
}

FeatureMap feature_map_from_tensor(const Tensor& t) {
  expect_shape(t, 3, "feature map");
  FeatureMap m(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]), static_cast<int>(t.dims[2]));
  std::copy(t.data.begin(), t.data.end(), m.data().begin());
  return m;
}

Tensor to_tensor(const CameraPose& pose) { return {{3, 4}, pose_to_floats(pose)}; }

CameraPose pose_from_tensor(const Tensor& t) {
  expect_shape(t, 2, "pose");
  require(t.dims[0] == 3 && t.dims[1] == 4, ErrorCode::format, "pose tensor must be 3 x 4");
  return pose_from_floats(t.data.data());
}

Tensor to_tensor(const GaussianSet& set) {
  const std::size_t C = static_cast<std::size_t>(set.channels);
  const std::size_t row = 13 + C;
  Tensor t{{static_cast<std::uint32_t>(set.size()), static_cast<std::uint32_t>(row)}, {}};
  t.data.reserve(set.size() * row);
  for (std::size_t i = 0; i < set.size(); ++i) {
    for (int d = 0; d < 3; ++d) t.data.push_back(static_cast<float>(set.means[i][d]));
    t.data.push_back(static_cast<float>(set.opacities[i]));
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) t.data.push_back(static_cast<float>(set.covariances[i](r, c)));
    }
    for (std::size_t c = 0; c < C; ++c) t.data.push_back(static_cast<float>(set.colors[i * C + c]));
  }
  return t;
}

GaussianSet gaussians_from_tensor(const Tensor& t) {
  expect_shape(t, 2, "gaussian set");
  require(t.dims[1] >= 14, ErrorCode::format, "gaussian rows need 13 + C >= 14 values");
  GaussianSet g;
  g.channels = static_cast<int>(t.dims[1] - 13);
  const std::size_t row = t.dims[1];
  for (std::size_t i = 0; i < t.dims[0]; ++i) {
    const float* r = t.data.data() + i * row;
    g.means.emplace_back(r[0], r[1], r[2]);
    g.opacities.push_back(r[3]);
    Mat3 S;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) S(a, b) = r[4 + a * 3 + b];
    }
    g.covariances.push_back(S);
    for (std::size_t c = 0; c < static_cast<std::size_t>(g.channels); ++c) g.colors.push_back(r[13 + c]);
  }
  g.validate();
  return g;
}

Tensor to_tensor(const PointMap& map) {
  Tensor t{{static_cast<std::uint32_t>(map.height), static_cast<std::uint32_t>(map.width), 3}, {}};
  t.data.reserve(map.points.size() * 3);
  const float nan = std::numeric_limits<float>::quiet_NaN();
  for (std::size_t p = 0; p < map.points.size(); ++p) {
    for (int d = 0; d < 3; ++d) t.data.push_back(map.validity.values[p] ? static_cast<float>(map.points[p][d]) : nan);
  }
  return t;
}

PointMap pointmap_from_tensor(const Tensor& t) {
  expect_shape(t, 3, "pointmap");
  require(t.dims[2] == 3, ErrorCode::format, "pointmap last dim must be 3");
  PointMap m(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]));
  for (std::size_t p = 0; p < m.points.size(); ++p) {
    const float* v = t.data.data() + 3 * p;
    if (std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2])) {
      m.points[p] = Vec3(v[0], v[1], v[2]);
      m.validity.values[p] = 1;
    }
  }
  return m;
}

Tensor to_tensor(const BinaryMap& mask) {
  Tensor t{{static_cast<std::uint32_t>(mask.height), static_cast<std::uint32_t>(mask.width)}, {}};
  for (std::uint8_t v : mask.values) t.data.push_back(v ? 1.0f : 0.0f);
  return t;
}

BinaryMap mask_from_tensor(const Tensor& t) {
  expect_shape(t, 2, "mask");
  BinaryMap m(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]));
  for (std::size_t p = 0; p < m.values.size(); ++p) {
    require(t.data[p] == 0.0f || t.data[p] == 1.0f, ErrorCode::format, "mask values must be 0 or 1");
    m.values[p] = t.data[p] == 1.0f ? 1 : 0;
  }
  return m;
}

Tensor to_tensor(const std::vector<std::vector<double>>& rows) {
  const std::size_t d = rows.empty() ? 0 : rows.front().size();
  Tensor t{{static_cast<std::uint32_t>(rows.size()), static_cast<std::uint32_t>(d)}, {}};
  for (const auto& r : rows) {
    require(r.size() == d, ErrorCode::invalid_argument, "ragged rows");
    for (double v : r) t.data.push_back(static_cast<float>(v));
  }
  return t;
}

}  // namespace steerkit
