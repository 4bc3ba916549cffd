#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "elastored/errors.hpp"
#include "elastored/raster.hpp"
#include "elastored/types.hpp"

namespace elastored {

static_assert(std::endian::native == std::endian::little,
              "REDW/EFLD readers assume a little-endian host");

/// One 3x3 convolution layer; weights are laid out [out][in][3][3].
struct ConvLayer {
  int in_channels = 0;
  int out_channels = 0;
  std::vector<float> weights;
  std::vector<float> bias;
};

/// Fixed residual CNN: five 3x3 convolutions with channels 1-16-16-16-16-1,
/// ReLU after the first four, replicate (half-sample reflective) padding.
/// The network predicts the noise; the denoised image is input - prediction.
struct CnnModel {
  static constexpr int kLayers = 5;
  static constexpr std::array<int, kLayers + 1> kChannels{1, 16, 16, 16, 16, 1};
  /// Affine window mapping elasticity into the network's input range.
  static constexpr double kWindowLow = 0.0;
  static constexpr double kWindowHigh = 1.0;

  std::vector<ConvLayer> layers;
  RowMajorMatrix golden_input;
  RowMajorMatrix golden_output;

  static CnnModel zeros() {
    CnnModel m;
    for (int l = 0; l < kLayers; ++l) {
      ConvLayer c;
      c.in_channels = kChannels[std::size_t(l)];
      c.out_channels = kChannels[std::size_t(l + 1)];
      c.weights.assign(std::size_t(c.out_channels * c.in_channels * 9), 0.0f);
      c.bias.assign(std::size_t(c.out_channels), 0.0f);
      m.layers.push_back(std::move(c));
    }
    return m;
  }
};

namespace detail {

inline std::vector<RowMajorMatrix> conv3x3(const std::vector<RowMajorMatrix>& in,
                                           const ConvLayer& layer, bool relu) {
  const int rows = int(in.front().rows());
  const int cols = int(in.front().cols());
  std::vector<RowMajorMatrix> out(std::size_t(layer.out_channels));
  for (int o = 0; o < layer.out_channels; ++o) {
    RowMajorMatrix acc = RowMajorMatrix::Constant(rows, cols, double(layer.bias[std::size_t(o)]));
    for (int i = 0; i < layer.in_channels; ++i) {
      const float* w = &layer.weights[std::size_t((o * layer.in_channels + i) * 9)];
      const RowMajorMatrix& src = in[std::size_t(i)];
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
          double s = 0.0;
          for (int kr = 0; kr < 3; ++kr) {
            const int rr = reflect_index(r + kr - 1, rows);
            for (int kc = 0; kc < 3; ++kc)
              s += double(w[kr * 3 + kc]) * src(rr, reflect_index(c + kc - 1, cols));
          }
          acc(r, c) += s;
        }
      }
    }
    if (relu) acc = acc.cwiseMax(0.0);
    out[std::size_t(o)] = std::move(acc);
  }
  return out;
}

}  // namespace detail

/// Runs the network on a raster already in the normalized window and returns
/// the denoised raster (input - predicted noise).
inline RowMajorMatrix cnn_infer_raster(const CnnModel& model, const RowMajorMatrix& input) {
  std::vector<RowMajorMatrix> act{input};
  for (std::size_t l = 0; l < model.layers.size(); ++l)
    act = detail::conv3x3(act, model.layers[l], l + 1 < model.layers.size());
  return input - act.front();
}

inline Vector cnn_infer(const CnnModel& model, const Vector& field, const RasterDims& dims) {
  constexpr double lo = CnnModel::kWindowLow;
  constexpr double span = CnnModel::kWindowHigh - CnnModel::kWindowLow;
  const RowMajorMatrix x = (to_raster(field, dims).array() - lo) / span;
  const RowMajorMatrix y = cnn_infer_raster(model, x);
  return from_raster((y.array() * span + lo).matrix());
}

namespace detail {

struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

inline std::uint32_t read_u32(std::istream& in, const std::string& what) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw LoadError("REDW: truncated while reading " + what);
  return v;
}

inline Tensor read_tensor(std::istream& in, const std::string& name) {
  Tensor t;
  const std::uint32_t rank = read_u32(in, name + ".rank");
  if (rank == 0 || rank > 4) throw LoadError("REDW: tensor " + name + " has invalid rank " + std::to_string(rank));
  std::uint64_t count = 1;
  for (std::uint32_t k = 0; k < rank; ++k) {
    t.dims.push_back(read_u32(in, name + ".dims"));
    count *= t.dims.back();
  }
  if (count == 0 || count > (std::uint64_t(1) << 28))
    throw LoadError("REDW: tensor " + name + " has invalid element count");
  t.data.resize(std::size_t(count));
  if (!in.read(reinterpret_cast<char*>(t.data.data()), std::streamsize(count * sizeof(float))))
    throw LoadError("REDW: truncated data in tensor " + name);
  return t;
}

inline std::string dims_string(const std::vector<std::uint32_t>& d) {
  std::string s = "[";
  for (std::size_t i = 0; i < d.size(); ++i) s += (i ? "," : "") + std::to_string(d[i]);
  return s + "]";
}

inline void expect_dims(const Tensor& t, const std::vector<std::uint32_t>& want,
                        const std::string& name) {
  if (t.dims != want)
    throw LoadError("REDW: tensor " + name + " has shape " + dims_string(t.dims) +
                    ", expected " + dims_string(want));
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_tensor(std::ostream& out, const std::vector<std::uint32_t>& dims,
                         const float* data, std::size_t count) {
  write_u32(out, std::uint32_t(dims.size()));
  for (auto d : dims) write_u32(out, d);
  out.write(reinterpret_cast<const char*>(data), std::streamsize(count * sizeof(float)));
}

}  // namespace detail

/// Parses a REDW weights file. Any mismatch throws LoadError naming the
/// offending tensor; no partially-initialized model escapes.
inline CnnModel cnn_load(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "REDW", 4) != 0)
    throw LoadError("REDW: bad magic");
  const std::uint32_t version = detail::read_u32(in, "version");
  if (version != 1) throw LoadError("REDW: unsupported version " + std::to_string(version));
  const std::uint32_t layers = detail::read_u32(in, "layer count");
  if (layers != CnnModel::kLayers)
    throw LoadError("REDW: expected " + std::to_string(CnnModel::kLayers) + " layers, got " +
                    std::to_string(layers));

  CnnModel m;
  for (int l = 0; l < CnnModel::kLayers; ++l) {
    const auto cin = std::uint32_t(CnnModel::kChannels[std::size_t(l)]);
    const auto cout = std::uint32_t(CnnModel::kChannels[std::size_t(l + 1)]);
    const std::string prefix = "layer" + std::to_string(l + 1);
    detail::Tensor w = detail::read_tensor(in, prefix + ".weight");
    detail::expect_dims(w, {cout, cin, 3, 3}, prefix + ".weight");
    detail::Tensor b = detail::read_tensor(in, prefix + ".bias");
    detail::expect_dims(b, {cout}, prefix + ".bias");
    ConvLayer c;
    c.in_channels = int(cin);
    c.out_channels = int(cout);
    c.weights = std::move(w.data);
    c.bias = std::move(b.data);
    m.layers.push_back(std::move(c));
  }

  detail::Tensor gi = detail::read_tensor(in, "golden.input");
  if (gi.dims.size() != 2) throw LoadError("REDW: tensor golden.input must have rank 2");
  detail::Tensor go = detail::read_tensor(in, "golden.output");
  detail::expect_dims(go, gi.dims, "golden.output");
  const int rows = int(gi.dims[0]);
  const int cols = int(gi.dims[1]);
  m.golden_input = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                       gi.data.data(), rows, cols).cast<double>();
  m.golden_output = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                        go.data.data(), rows, cols).cast<double>();
  if (in.peek() != std::char_traits<char>::eof()) throw LoadError("REDW: trailing bytes after golden pair");
  return m;
}

inline CnnModel cnn_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("REDW: cannot open " + path);
  return cnn_load(in);
}

inline void cnn_save(std::ostream& out, const CnnModel& m) {
  out.write("REDW", 4);
  detail::write_u32(out, 1);
  detail::write_u32(out, std::uint32_t(m.layers.size()));
  for (const auto& c : m.layers) {
    detail::write_tensor(out, {std::uint32_t(c.out_channels), std::uint32_t(c.in_channels), 3, 3},
                         c.weights.data(), c.weights.size());
    detail::write_tensor(out, {std::uint32_t(c.out_channels)}, c.bias.data(), c.bias.size());
  }
  const std::vector<std::uint32_t> gd{std::uint32_t(m.golden_input.rows()),
                                      std::uint32_t(m.golden_input.cols())};
  const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> gi = m.golden_input.cast<float>();
  const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> go = m.golden_output.cast<float>();
  detail::write_tensor(out, gd, gi.data(), std::size_t(gi.size()));
  detail::write_tensor(out, gd, go.data(), std::size_t(go.size()));
}

inline void cnn_save(const std::string& path, const CnnModel& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  cnn_save(out, m);
  if (!out) throw IoError("write failed for " + path);
}

/// Max-abs deviation of the model's output on its embedded golden input.
inline double cnn_golden_error(const CnnModel& m) {
  if (m.golden_input.size() == 0) return 0.0;
  return (cnn_infer_raster(m, m.golden_input) - m.golden_output).cwiseAbs().maxCoeff();
}

}  // namespace elastored
