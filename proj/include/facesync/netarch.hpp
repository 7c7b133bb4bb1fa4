#pragma once

// Generator: 1D U-Net over speech + ramp noise with three sigmoid decoder
// heads (gaze, head, AUs). Discriminator: speech-conditioned critic ending
// in linear -> sigmoid. Plus checkpoint persistence.

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "facesync/domain.hpp"
#include "facesync/nn/layers.hpp"

namespace facesync {

struct ArchConfig {
  std::size_t clip_length = 100;
  std::vector<std::size_t> encoder_channels{64, 128, 256, 512, 512};
  std::vector<std::size_t> decoder_channels{256, 128, 64, 64};
  std::size_t kernel_size = 3;
  double dropout = 0.2;
  std::size_t pool_factor = 2;
  std::size_t upsample_factor = 2;
  std::size_t noise_length = 200;
  std::size_t noise_channels = 2;
  std::array<std::size_t, 3> head_channels{kGazeDim, kHeadDim, kAuDim};
  std::size_t disc_embed_channels = 64;
  std::vector<std::size_t> disc_channels{128, 256, 512, 512};
  bool disc_sigmoid = true;

  /// Throws ShapeError naming the first inconsistency, including any skip
  /// connection whose decoder-side and encoder-side resolutions disagree.
  void validate() const;

  /// Temporal length after each encoder level (level 0 is the input length).
  std::vector<std::size_t> encoder_lengths() const;

  bool operator==(const ArchConfig&) const = default;
};

struct NoiseVector {
  std::vector<double> values;
};

/// Endpoints a, b ~ U[0, 1]; values[i] = a + (b - a) * i / (length - 1).
NoiseVector make_noise(std::mt19937_64& rng, std::size_t length = 200);
NoiseVector ramp_noise(double a, double b, std::size_t length = 200);

class Generator {
 public:
  Generator(const ArchConfig& config, std::uint64_t seed);

  /// speech [B x L x 22] in [0, 1], noise [B x 1 x noise_length] -> [B x L x 28] in (0, 1).
  nn::Tensor forward(const nn::Tensor& speech, const nn::Tensor& noise, const nn::Context& ctx);
  /// Accumulates parameter gradients; returns the gradient w.r.t. speech.
  nn::Tensor backward(const nn::Tensor& dy);

  const ArchConfig& config() const { return config_; }
  nn::ParamRegistry& registry() { return registry_; }
  std::size_t parameter_count() const;

  Generator(const Generator&) = delete;
  Generator& operator=(const Generator&) = delete;
  Generator(Generator&&) = delete;

 private:
  struct Head {
    std::vector<nn::Upsample1d> up;
    std::vector<nn::DoubleConv> blocks;
    nn::Conv1d out;
    nn::Sigmoid sigmoid;
    std::vector<std::size_t> in_skip_split;  // channels coming from below
  };

  ArchConfig config_;
  std::vector<nn::DoubleConv> encoder_;
  std::vector<nn::MaxPool1d> pools_;
  std::vector<Head> heads_;
  nn::ParamRegistry registry_;
  std::size_t speech_channels_ = kSpeechDim;
};

class Discriminator {
 public:
  Discriminator(const ArchConfig& config, std::uint64_t seed);

  /// speech [B x L x 22], behavior [B x L x 28] -> [B x 1 x 1].
  nn::Tensor forward(const nn::Tensor& speech, const nn::Tensor& behavior, const nn::Context& ctx);
  /// Returns gradients w.r.t. (speech, behavior); accumulates parameter gradients.
  std::pair<nn::Tensor, nn::Tensor> backward(const nn::Tensor& dy);

  const ArchConfig& config() const { return config_; }
  nn::ParamRegistry& registry() { return registry_; }
  std::size_t parameter_count() const;

  Discriminator(const Discriminator&) = delete;
  Discriminator& operator=(const Discriminator&) = delete;
  Discriminator(Discriminator&&) = delete;

 private:
  ArchConfig config_;
  nn::DoubleConv speech_enc_, behavior_enc_;
  std::vector<nn::DoubleConv> blocks_;
  std::vector<nn::MaxPool1d> pools_;
  nn::Linear head_;
  nn::Sigmoid sigmoid_;
  nn::ParamRegistry registry_;
  std::size_t flat_len_ = 0;
};

/// Flattened parameter values followed by persistent buffers.
std::vector<double> export_state(const nn::ParamRegistry& r);
void import_state(nn::ParamRegistry& r, const std::vector<double>& state);

struct CheckpointData {
  ArchConfig arch;
  NormStats stats;
  std::uint64_t step = 0;
  std::vector<double> generator_state;
  std::vector<double> discriminator_state;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary container: magic, version, JSON header (arch, stats, step),
/// then both parameter blocks as raw little-endian doubles. Written to a
/// temporary file and renamed into place.
void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData read_checkpoint(const std::filesystem::path& path);

}  // namespace facesync
