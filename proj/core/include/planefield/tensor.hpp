#pragma once

#include <cassert>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "planefield/errors.hpp"

namespace planefield {

/// Dense row-major tensor of 64-bit floats.
///
/// Rank-3 tensors are indexed (row, column, channel); convolution kernels
/// are rank-4 (ky, kx, c_in, c_out). Plain value type: copying copies the
/// buffer, so tensors can be handed across threads freely.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape)
      : shape_(std::move(shape)), data_(checked_size(shape_), 0.0) {}

  Tensor(std::vector<int> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<std::size_t>(checked_size(shape_)) != data_.size()) {
      throw ShapeError("tensor data length does not match shape");
    }
  }

  static Tensor full(std::vector<int> shape, double value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  const std::vector<int>& shape() const noexcept { return shape_; }
  int rank() const noexcept { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::int64_t size() const noexcept {
    return static_cast<std::int64_t>(data_.size());
  }
  bool empty() const noexcept { return data_.empty(); }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  double& operator[](std::int64_t i) {
    assert(i >= 0 && i < size());
    return data_[static_cast<std::size_t>(i)];
  }
  double operator[](std::int64_t i) const {
    assert(i >= 0 && i < size());
    return data_[static_cast<std::size_t>(i)];
  }

  // (row, column, channel) accessor for rank-3 tensors.
  double& operator()(int y, int x, int c) {
    assert(rank() == 3);
    return data_[index3(y, x, c)];
  }
  double operator()(int y, int x, int c) const {
    assert(rank() == 3);
    return data_[index3(y, x, c)];
  }

  // (ky, kx, c_in, c_out) accessor for rank-4 kernels.
  double& operator()(int a, int b, int c, int d) {
    assert(rank() == 4);
    return data_[index4(a, b, c, d)];
  }
  double operator()(int a, int b, int c, int d) const {
    assert(rank() == 4);
    return data_[index4(a, b, c, d)];
  }

  bool same_shape(const Tensor& other) const noexcept {
    return shape_ == other.shape_;
  }

 private:
  static std::int64_t checked_size(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
      if (d < 0) throw ShapeError("negative tensor dimension");
      n *= d;
    }
    return n;
  }

  std::size_t index3(int y, int x, int c) const {
    assert(y >= 0 && y < shape_[0] && x >= 0 && x < shape_[1] && c >= 0 &&
           c < shape_[2]);
    return (static_cast<std::size_t>(y) * shape_[1] + x) * shape_[2] + c;
  }

  std::size_t index4(int a, int b, int c, int d) const {
    assert(a >= 0 && a < shape_[0] && b >= 0 && b < shape_[1] && c >= 0 &&
           c < shape_[2] && d >= 0 && d < shape_[3]);
    return ((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) *
               shape_[3] +
           d;
  }

  std::vector<int> shape_;
  std::vector<double> data_;
};

inline std::string shape_string(const std::vector<int>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

/// Named parameter tensors for the fusion modules, with the seed they were
/// initialized from. Serializes to a JSON manifest plus one binary blob of
/// little-endian float64 so runs are reproducible.
struct LayerParams {
  std::string module;  // "pre-fixed" | "pre-attention" | ...
  std::uint64_t seed = 0;
  std::map<std::string, std::int64_t> meta;
  std::map<std::string, Tensor> entries;

  const Tensor& at(const std::string& name) const {
    auto it = entries.find(name);
    if (it == entries.end()) {
      throw DomainError("missing parameter tensor: " + name);
    }
    return it->second;
  }
};

void save_params(const LayerParams& params,
                 const std::filesystem::path& manifest_path);
LayerParams load_params(const std::filesystem::path& manifest_path);

}  // namespace planefield
