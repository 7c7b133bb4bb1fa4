#pragma once

// Layers with explicit forward/backward passes. Each layer caches what its
// backward pass needs from the most recent forward call, so a forward must
// precede every backward and layers are not re-entrant.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "facesync/nn/tensor.hpp"

namespace facesync::nn {

struct Param {
  std::string name;
  std::vector<double> value;
  std::vector<double> grad;

  explicit Param(std::string n = {}, std::size_t size = 0)
      : name(std::move(n)), value(size, 0.0), grad(size, 0.0) {}
};

struct Context {
  bool train = false;
  /// Batch-norm running statistics are updated only when both train and
  /// update_stats are set.
  bool update_stats = true;
  /// Dropout masks are a pure function of (seed, layer id); repeating a
  /// pass with the same seed reproduces the same masks.
  std::uint64_t dropout_seed = 0;
  /// Reuse the ReLU masks and max-pool winners recorded by the previous
  /// forward pass instead of recomputing them. The network is then a smooth
  /// function of its input around that pass, which finite-difference
  /// curvature products rely on.
  bool reuse_patterns = false;
};

/// Collects parameters and persistent buffers in a fixed traversal order.
struct ParamRegistry {
  std::vector<Param*> params;
  std::vector<std::vector<double>*> buffers;
};

class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t kernel);

  void init(std::mt19937_64& rng);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  void collect(ParamRegistry& r);

  std::size_t in_channels() const { return in_; }
  std::size_t out_channels() const { return out_; }

  Param weight;  // [(k * in + ci) * out + co]
  Param bias;

 private:
  std::string name_;
  std::size_t in_ = 0, out_ = 0, kernel_ = 0;
  Tensor cols_;  // im2col of the last input: [batch*len] x [kernel*in]
  std::size_t in_len_ = 0, batch_ = 0;
};

class BatchNorm1d {
 public:
  BatchNorm1d() = default;
  BatchNorm1d(std::string name, std::size_t ch);

  Tensor forward(const Tensor& x, const Context& ctx);
  Tensor backward(const Tensor& dy);
  void collect(ParamRegistry& r);

  Param gamma, beta;
  std::vector<double> running_mean, running_var;

  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

 private:
  std::size_t ch_ = 0;
  bool used_batch_stats_ = false;
  Tensor xhat_;
  std::vector<double> inv_std_;
};

class ReLU {
 public:
  Tensor forward(const Tensor& x, const Context& ctx = {});
  Tensor backward(const Tensor& dy) const;

 private:
  std::vector<bool> mask_;
};

class Dropout {
 public:
  Dropout() = default;
  Dropout(double rate, std::uint64_t id) : rate_(rate), id_(id) {}

  Tensor forward(const Tensor& x, const Context& ctx);
  Tensor backward(const Tensor& dy) const;

 private:
  double rate_ = 0.0;
  std::uint64_t id_ = 0;
  bool active_ = false;
  std::vector<double> scale_;
};

/// Temporal max-pooling; output length is floor(len / factor).
class MaxPool1d {
 public:
  explicit MaxPool1d(std::size_t factor = 2) : factor_(factor) {}
  Tensor forward(const Tensor& x, const Context& ctx = {});
  Tensor backward(const Tensor& dy) const;

 private:
  std::size_t factor_;
  std::size_t in_len_ = 0;
  std::vector<std::size_t> argmax_;
};

/// Nearest-neighbour temporal upsampling to an explicit target length:
/// out[t] = in[min(t / factor, len - 1)]. With target = factor * len this is
/// plain factor-x repetition; a longer target replicates the last frame.
class Upsample1d {
 public:
  explicit Upsample1d(std::size_t factor = 2) : factor_(factor) {}
  Tensor forward(const Tensor& x, std::size_t target_len);
  Tensor backward(const Tensor& dy) const;

 private:
  std::size_t factor_;
  std::size_t in_len_ = 0;
};

class Sigmoid {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy) const;

 private:
  Tensor y_;
};

/// Dense layer over the flattened (len x ch) sample; output is [B x 1 x out].
class Linear {
 public:
  Linear() = default;
  Linear(std::string name, std::size_t in, std::size_t out);

  void init(std::mt19937_64& rng);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  void collect(ParamRegistry& r);

  Param weight;  // [in * out + o]
  Param bias;

 private:
  std::size_t in_ = 0, out_ = 0;
  Tensor x_;
};

/// (Conv1d -> BatchNorm -> ReLU -> Dropout) twice.
class DoubleConv {
 public:
  DoubleConv() = default;
  DoubleConv(const std::string& name, std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
             double dropout, std::uint64_t& dropout_ids);

  void init(std::mt19937_64& rng);
  Tensor forward(const Tensor& x, const Context& ctx);
  Tensor backward(const Tensor& dy);
  void collect(ParamRegistry& r);

  std::size_t out_channels() const { return conv2_.out_channels(); }

 private:
  Conv1d conv1_, conv2_;
  BatchNorm1d bn1_, bn2_;
  ReLU relu1_, relu2_;
  Dropout drop1_, drop2_;
};

void zero_grads(const ParamRegistry& r);

}  // namespace facesync::nn
