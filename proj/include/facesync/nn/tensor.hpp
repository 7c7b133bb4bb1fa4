#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "facesync/error.hpp"

namespace facesync::nn {

/// Batch of multichannel sequences, laid out [batch][time][channel].
struct Tensor {
  std::size_t batch = 0, len = 0, ch = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t b, std::size_t l, std::size_t c, double fill = 0.0)
      : batch(b), len(l), ch(c), data(b * l * c, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t sample_size() const { return len * ch; }
  double* sample(std::size_t b) { return data.data() + b * len * ch; }
  const double* sample(std::size_t b) const { return data.data() + b * len * ch; }
  double& at(std::size_t b, std::size_t t, std::size_t c) { return data[(b * len + t) * ch + c]; }
  double at(std::size_t b, std::size_t t, std::size_t c) const { return data[(b * len + t) * ch + c]; }

  bool same_shape(const Tensor& o) const { return batch == o.batch && len == o.len && ch == o.ch; }
  std::string shape_str() const {
    return "[" + std::to_string(batch) + "x" + std::to_string(len) + "x" + std::to_string(ch) + "]";
  }
};

inline void require_shape(const Tensor& t, std::size_t len, std::size_t ch, const std::string& where) {
  if (t.len != len || t.ch != ch)
    throw ShapeError(where + ": expected [Bx" + std::to_string(len) + "x" + std::to_string(ch) +
                     "], got " + t.shape_str());
}

/// Channel-wise concatenation (same batch and length).
Tensor concat_channels(const Tensor& a, const Tensor& b);
/// Inverse of concat_channels for gradients: first `ch_a` channels to `a`.
void split_channels(const Tensor& g, std::size_t ch_a, Tensor& a, Tensor& b);

}  // namespace facesync::nn
