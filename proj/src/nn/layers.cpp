#include "facesync/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "facesync/simd/kernels.hpp"

namespace facesync::nn {
namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

void uniform_fill(std::vector<double>& v, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& x : v) x = u(rng);
}

}  // namespace

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.batch != b.batch || a.len != b.len)
    throw ShapeError("concat: " + a.shape_str() + " vs " + b.shape_str());
  Tensor out(a.batch, a.len, a.ch + b.ch);
  for (std::size_t i = 0; i < a.batch * a.len; ++i) {
    std::copy_n(a.data.data() + i * a.ch, a.ch, out.data.data() + i * out.ch);
    std::copy_n(b.data.data() + i * b.ch, b.ch, out.data.data() + i * out.ch + a.ch);
  }
  return out;
}

void split_channels(const Tensor& g, std::size_t ch_a, Tensor& a, Tensor& b) {
  a = Tensor(g.batch, g.len, ch_a);
  b = Tensor(g.batch, g.len, g.ch - ch_a);
  for (std::size_t i = 0; i < g.batch * g.len; ++i) {
    std::copy_n(g.data.data() + i * g.ch, ch_a, a.data.data() + i * a.ch);
    std::copy_n(g.data.data() + i * g.ch + ch_a, b.ch, b.data.data() + i * b.ch);
  }
}

void zero_grads(const ParamRegistry& r) {
  for (auto* p : r.params) std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

// ---------------------------------------------------------------- Conv1d

Conv1d::Conv1d(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t kernel)
    : weight(name + ".weight", kernel * in_ch * out_ch),
      bias(name + ".bias", out_ch),
      name_(std::move(name)),
      in_(in_ch),
      out_(out_ch),
      kernel_(kernel) {}

void Conv1d::init(std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_ * kernel_));
  uniform_fill(weight.value, bound, rng);
  uniform_fill(bias.value, bound, rng);
}

void Conv1d::collect(ParamRegistry& r) {
  r.params.push_back(&weight);
  r.params.push_back(&bias);
}

Tensor Conv1d::forward(const Tensor& x) {
  if (x.ch != in_)
    throw ShapeError(name_ + ": expected " + std::to_string(in_) + " input channels, got " + x.shape_str());
  const std::size_t B = x.batch, L = x.len, K = kernel_, pad = kernel_ / 2;
  const std::size_t width = K * in_;
  batch_ = B;
  in_len_ = L;
  cols_ = Tensor(1, B * L, width);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < L; ++t)
      for (std::size_t k = 0; k < K; ++k) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(pad);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(L)) continue;
        std::copy_n(x.sample(b) + static_cast<std::size_t>(src) * in_, in_,
                    cols_.data.data() + (b * L + t) * width + k * in_);
      }
  Tensor y(B, L, out_);
  for (std::size_t r = 0; r < B * L; ++r) std::copy_n(bias.value.data(), out_, y.data.data() + r * out_);
  simd::active().gemm_nn(B * L, out_, width, cols_.data.data(), width, weight.value.data(), out_,
                         y.data.data(), out_);
  return y;
}

Tensor Conv1d::backward(const Tensor& dy) {
  const std::size_t B = batch_, L = in_len_, K = kernel_, pad = kernel_ / 2;
  const std::size_t width = K * in_;
  if (dy.batch != B || dy.len != L || dy.ch != out_) throw ShapeError(name_ + ": bad gradient " + dy.shape_str());
  const auto& kern = simd::active();

  kern.gemm_tn(width, out_, B * L, cols_.data.data(), width, dy.data.data(), out_,
               weight.grad.data(), out_);
  for (std::size_t r = 0; r < B * L; ++r)
    for (std::size_t co = 0; co < out_; ++co) bias.grad[co] += dy.data[r * out_ + co];

  std::vector<double> wt(out_ * width);
  for (std::size_t i = 0; i < width; ++i)
    for (std::size_t co = 0; co < out_; ++co) wt[co * width + i] = weight.value[i * out_ + co];
  std::vector<double> dcols(B * L * width, 0.0);
  kern.gemm_nn(B * L, width, out_, dy.data.data(), out_, wt.data(), width, dcols.data(), width);

  Tensor dx(B, L, in_);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < L; ++t)
      for (std::size_t k = 0; k < K; ++k) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(pad);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(L)) continue;
        const double* g = dcols.data() + (b * L + t) * width + k * in_;
        double* d = dx.sample(b) + static_cast<std::size_t>(src) * in_;
        for (std::size_t ci = 0; ci < in_; ++ci) d[ci] += g[ci];
      }
  return dx;
}

// ----------------------------------------------------------- BatchNorm1d

BatchNorm1d::BatchNorm1d(std::string name, std::size_t ch)
    : gamma(name + ".gamma", ch),
      beta(name + ".beta", ch),
      running_mean(ch, 0.0),
      running_var(ch, 1.0),
      ch_(ch) {
  std::fill(gamma.value.begin(), gamma.value.end(), 1.0);
}

void BatchNorm1d::collect(ParamRegistry& r) {
  r.params.push_back(&gamma);
  r.params.push_back(&beta);
  r.buffers.push_back(&running_mean);
  r.buffers.push_back(&running_var);
}

Tensor BatchNorm1d::forward(const Tensor& x, const Context& ctx) {
  if (x.ch != ch_) throw ShapeError(gamma.name + ": channel mismatch " + x.shape_str());
  const std::size_t n = x.batch * x.len;
  std::vector<double> mean(ch_, 0.0), var(ch_, 0.0);
  used_batch_stats_ = ctx.train;
  if (ctx.train) {
    if (n < 2) throw ShapeError(gamma.name + ": batch statistics need at least 2 values per channel");
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < ch_; ++c) mean[c] += x.data[r * ch_ + c];
    for (auto& m : mean) m /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < ch_; ++c) {
        const double d = x.data[r * ch_ + c] - mean[c];
        var[c] += d * d;
      }
    for (auto& v : var) v /= static_cast<double>(n);
    if (ctx.update_stats) {
      const double unbias = static_cast<double>(n) / static_cast<double>(n - 1);
      for (std::size_t c = 0; c < ch_; ++c) {
        running_mean[c] = (1.0 - kMomentum) * running_mean[c] + kMomentum * mean[c];
        running_var[c] = (1.0 - kMomentum) * running_var[c] + kMomentum * var[c] * unbias;
      }
    }
  } else {
    mean = running_mean;
    var = running_var;
  }
  inv_std_.resize(ch_);
  for (std::size_t c = 0; c < ch_; ++c) inv_std_[c] = 1.0 / std::sqrt(var[c] + kEps);
  xhat_ = Tensor(x.batch, x.len, ch_);
  Tensor y(x.batch, x.len, ch_);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < ch_; ++c) {
      const double h = (x.data[r * ch_ + c] - mean[c]) * inv_std_[c];
      xhat_.data[r * ch_ + c] = h;
      y.data[r * ch_ + c] = gamma.value[c] * h + beta.value[c];
    }
  return y;
}

Tensor BatchNorm1d::backward(const Tensor& dy) {
  const std::size_t n = dy.batch * dy.len;
  std::vector<double> sum_dy(ch_, 0.0), sum_dy_xhat(ch_, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < ch_; ++c) {
      sum_dy[c] += dy.data[r * ch_ + c];
      sum_dy_xhat[c] += dy.data[r * ch_ + c] * xhat_.data[r * ch_ + c];
    }
  for (std::size_t c = 0; c < ch_; ++c) {
    gamma.grad[c] += sum_dy_xhat[c];
    beta.grad[c] += sum_dy[c];
  }
  Tensor dx(dy.batch, dy.len, ch_);
  const double nn = static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < ch_; ++c) {
      const double g = gamma.value[c] * inv_std_[c];
      const double d = dy.data[r * ch_ + c];
      dx.data[r * ch_ + c] =
          used_batch_stats_
              ? g * (d - sum_dy[c] / nn - xhat_.data[r * ch_ + c] * sum_dy_xhat[c] / nn)
              : g * d;
    }
  return dx;
}

// ----------------------------------------------------- pointwise layers

Tensor ReLU::forward(const Tensor& x, const Context& ctx) {
  Tensor y = x;
  if (ctx.reuse_patterns) {
    if (mask_.size() != x.size()) throw ShapeError("relu: no recorded mask for this shape");
    for (std::size_t i = 0; i < y.size(); ++i)
      if (!mask_[i]) y.data[i] = 0.0;
    return y;
  }
  mask_.assign(x.size(), false);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y.data[i] > 0.0)
      mask_[i] = true;
    else
      y.data[i] = 0.0;
  }
  return y;
}

Tensor ReLU::backward(const Tensor& dy) const {
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (!mask_[i]) dx.data[i] = 0.0;
  return dx;
}

Tensor Dropout::forward(const Tensor& x, const Context& ctx) {
  active_ = ctx.train && rate_ > 0.0;
  if (!active_) return x;
  std::mt19937_64 rng(mix(ctx.dropout_seed ^ mix(id_)));
  std::bernoulli_distribution keep(1.0 - rate_);
  const double s = 1.0 / (1.0 - rate_);
  scale_.resize(x.size());
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) {
    scale_[i] = keep(rng) ? s : 0.0;
    y.data[i] *= scale_[i];
  }
  return y;
}

Tensor Dropout::backward(const Tensor& dy) const {
  if (!active_) return dy;
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= scale_[i];
  return dx;
}

Tensor MaxPool1d::forward(const Tensor& x, const Context& ctx) {
  const std::size_t lo = x.len / factor_;
  in_len_ = x.len;
  Tensor y(x.batch, lo, x.ch);
  if (ctx.reuse_patterns) {
    if (argmax_.size() != y.size()) throw ShapeError("maxpool: no recorded winners for this shape");
    for (std::size_t b = 0; b < x.batch; ++b)
      for (std::size_t t = 0; t < lo; ++t)
        for (std::size_t c = 0; c < x.ch; ++c) {
          const std::size_t o = (b * lo + t) * x.ch + c;
          y.data[o] = x.at(b, argmax_[o], c);
        }
    return y;
  }
  argmax_.assign(y.size(), 0);
  for (std::size_t b = 0; b < x.batch; ++b)
    for (std::size_t t = 0; t < lo; ++t)
      for (std::size_t c = 0; c < x.ch; ++c) {
        std::size_t best = t * factor_;
        for (std::size_t k = 1; k < factor_; ++k)
          if (x.at(b, t * factor_ + k, c) > x.at(b, best, c)) best = t * factor_ + k;
        const std::size_t o = (b * lo + t) * x.ch + c;
        y.data[o] = x.at(b, best, c);
        argmax_[o] = best;
      }
  return y;
}

Tensor MaxPool1d::backward(const Tensor& dy) const {
  Tensor dx(dy.batch, in_len_, dy.ch);
  for (std::size_t b = 0; b < dy.batch; ++b)
    for (std::size_t t = 0; t < dy.len; ++t)
      for (std::size_t c = 0; c < dy.ch; ++c) {
        const std::size_t o = (b * dy.len + t) * dy.ch + c;
        dx.at(b, argmax_[o], c) += dy.data[o];
      }
  return dx;
}

Tensor Upsample1d::forward(const Tensor& x, std::size_t target_len) {
  in_len_ = x.len;
  Tensor y(x.batch, target_len, x.ch);
  for (std::size_t b = 0; b < x.batch; ++b)
    for (std::size_t t = 0; t < target_len; ++t) {
      const std::size_t src = std::min(t / factor_, x.len - 1);
      std::copy_n(x.sample(b) + src * x.ch, x.ch, y.sample(b) + t * x.ch);
    }
  return y;
}

Tensor Upsample1d::backward(const Tensor& dy) const {
  Tensor dx(dy.batch, in_len_, dy.ch);
  for (std::size_t b = 0; b < dy.batch; ++b)
    for (std::size_t t = 0; t < dy.len; ++t) {
      const std::size_t src = std::min(t / factor_, in_len_ - 1);
      for (std::size_t c = 0; c < dy.ch; ++c) dx.at(b, src, c) += dy.at(b, t, c);
    }
  return dx;
}

Tensor Sigmoid::forward(const Tensor& x) {
  y_ = x;
  for (auto& v : y_.data) v = 1.0 / (1.0 + std::exp(-v));
  return y_;
}

Tensor Sigmoid::backward(const Tensor& dy) const {
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= y_.data[i] * (1.0 - y_.data[i]);
  return dx;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(std::string name, std::size_t in, std::size_t out)
    : weight(name + ".weight", in * out), bias(name + ".bias", out), in_(in), out_(out) {}

void Linear::init(std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
  uniform_fill(weight.value, bound, rng);
  uniform_fill(bias.value, bound, rng);
}

void Linear::collect(ParamRegistry& r) {
  r.params.push_back(&weight);
  r.params.push_back(&bias);
}

Tensor Linear::forward(const Tensor& x) {
  if (x.sample_size() != in_)
    throw ShapeError(weight.name + ": expected " + std::to_string(in_) + " inputs per sample, got " + x.shape_str());
  x_ = x;
  Tensor y(x.batch, 1, out_);
  for (std::size_t b = 0; b < x.batch; ++b) std::copy_n(bias.value.data(), out_, y.sample(b));
  simd::active().gemm_nn(x.batch, out_, in_, x.data.data(), in_, weight.value.data(), out_,
                         y.data.data(), out_);
  return y;
}

Tensor Linear::backward(const Tensor& dy) {
  const auto& kern = simd::active();
  kern.gemm_tn(in_, out_, x_.batch, x_.data.data(), in_, dy.data.data(), out_, weight.grad.data(), out_);
  for (std::size_t b = 0; b < dy.batch; ++b)
    for (std::size_t o = 0; o < out_; ++o) bias.grad[o] += dy.data[b * out_ + o];
  Tensor dx(x_.batch, x_.len, x_.ch);
  for (std::size_t b = 0; b < dy.batch; ++b)
    for (std::size_t o = 0; o < out_; ++o) {
      const double g = dy.data[b * out_ + o];
      for (std::size_t i = 0; i < in_; ++i) dx.data[b * in_ + i] += g * weight.value[i * out_ + o];
    }
  return dx;
}

// ------------------------------------------------------------ DoubleConv

DoubleConv::DoubleConv(const std::string& name, std::size_t in_ch, std::size_t out_ch,
                       std::size_t kernel, double dropout, std::uint64_t& dropout_ids)
    : conv1_(name + ".conv1", in_ch, out_ch, kernel),
      conv2_(name + ".conv2", out_ch, out_ch, kernel),
      bn1_(name + ".bn1", out_ch),
      bn2_(name + ".bn2", out_ch),
      drop1_(dropout, dropout_ids++),
      drop2_(dropout, dropout_ids++) {}

void DoubleConv::init(std::mt19937_64& rng) {
  conv1_.init(rng);
  conv2_.init(rng);
}

Tensor DoubleConv::forward(const Tensor& x, const Context& ctx) {
  Tensor h = drop1_.forward(relu1_.forward(bn1_.forward(conv1_.forward(x), ctx), ctx), ctx);
  return drop2_.forward(relu2_.forward(bn2_.forward(conv2_.forward(h), ctx), ctx), ctx);
}

Tensor DoubleConv::backward(const Tensor& dy) {
  Tensor g = conv2_.backward(bn2_.backward(relu2_.backward(drop2_.backward(dy))));
  return conv1_.backward(bn1_.backward(relu1_.backward(drop1_.backward(g))));
}

void DoubleConv::collect(ParamRegistry& r) {
  conv1_.collect(r);
  bn1_.collect(r);
  conv2_.collect(r);
  bn2_.collect(r);
}

}  // namespace facesync::nn
