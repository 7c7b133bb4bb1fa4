#pragma once

// Adversarial training: reconstruction loss, gradient penalty, critic and
// generator objectives, fabricated speaking/listening mismatch pairs, and the
// training loop itself.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "facesync/netarch.hpp"
#include "facesync/preprocess.hpp"

namespace facesync {

struct TrainConfig {
  double lr_generator = 1e-4;
  double lr_discriminator = 1e-5;
  std::size_t batch_size = 32;
  double lambda_gp = 10.0;
  double adv_weight = 0.1;
  std::size_t n_critic = 5;
  std::size_t epochs = 1;
  std::size_t checkpoint_interval = 100;  // generator steps
  std::uint64_t seed = 1;
  double mismatch_fraction = 1.0 / 3.0;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.9;
  double speaking_threshold = 0.8;
  /// Interpolate real behavior with the whole fake batch (mismatch pairs
  /// included) for the penalty, instead of with generated behavior only.
  bool gp_interpolate_mismatch = false;

  void validate() const;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

// ------------------------------------------------------------ losses

struct ReconstructionLoss {
  double gaze = 0.0, head = 0.0, au = 0.0, total = 0.0;
};

/// Per-group RMSE over frames and group features, summed into L_G.
/// Inputs are frames x 28 row-major.
ReconstructionLoss reconstruction_loss(std::span<const double> generated, std::span<const double> real);

/// Batch mean of per-clip losses; writes d(total)/d(generated) when asked.
ReconstructionLoss reconstruction_loss(const nn::Tensor& generated, const nn::Tensor& real,
                                       nn::Tensor* grad = nullptr);

/// Gradient of sum_i D(speech_i, x_i) with respect to every x_i.
using CriticGradient = std::function<nn::Tensor(const nn::Tensor& speech, const nn::Tensor& behavior)>;

struct PenaltyResult {
  double value = 0.0;
  std::vector<double> norms;  // per-sample gradient norms
};

/// lambda * mean_i (||grad D at x_i||_2 - 1)^2 with x_i = t_i real_i + (1 - t_i) fake_i,
/// t_i ~ U[0, 1]. Throws "penalty diverged" on a non-finite gradient.
PenaltyResult gradient_penalty(const CriticGradient& critic, const nn::Tensor& speech,
                               const nn::Tensor& real, const nn::Tensor& fake, std::mt19937_64& rng,
                               double lambda);

/// Same penalty on the discriminator network. When `param_grad` is set the
/// penalty's parameter gradient is added to the discriminator's accumulated
/// gradients (existing accumulations are preserved).
PenaltyResult discriminator_penalty(Discriminator& d, const nn::Tensor& speech, const nn::Tensor& real,
                                    const nn::Tensor& fake, std::mt19937_64& rng, double lambda,
                                    std::uint64_t dropout_seed, bool param_grad);

struct AdversarialLosses {
  double critic = 0.0;     // mean D(fake) - mean D(real) + penalty
  double generator = 0.0;  // -mean D(fake)
};

AdversarialLosses adversarial_losses(std::span<const double> d_real, std::span<const double> d_fake,
                                     double penalty);

/// L_G + w * adversarial term.
double combined_generator_loss(double reconstruction, double adversarial, double w);

// -------------------------------------------------- mismatch examples

enum class ClipKind { speaking, listening, mixed };

/// Speaking (listening) when more than `threshold` of frames carry flag 1 (0).
ClipKind classify_clip(const ClipPair& clip, double threshold = 0.8);

struct MismatchPair {
  std::vector<SpeechFrame> speech;
  std::vector<BehaviorFrame> behavior;
  std::string speech_source;
  std::string behavior_source;
  bool speaking_speech = true;  // speaking speech with listening behavior
};

/// Each pair takes speech from one pool and behavior from the other, with a
/// random direction per pair. Throws "insufficient turn diversity" when a
/// pool is empty.
std::vector<MismatchPair> fabricate_mismatch(std::span<const ClipPair* const> speaking,
                                             std::span<const ClipPair* const> listening,
                                             std::size_t count, std::mt19937_64& rng);

// ---------------------------------------------------------- training

class Adam {
 public:
  Adam(nn::ParamRegistry& registry, double lr, double beta1, double beta2, double eps = 1e-8);
  void step();

 private:
  nn::ParamRegistry* reg_;
  double lr_, b1_, b2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct LossRecord {
  std::uint64_t step = 0;
  bool discriminator = false;
  double critic = 0.0, penalty = 0.0;
  double l_g = 0.0, gaze = 0.0, head = 0.0, au = 0.0, adv = 0.0;
};

/// One delimited line in the loss-log layout
/// "step,L_D,penalty,L_G,L_gaze,L_head,L_AU,L_adv" (fields that do not apply
/// to the step's network are left empty).
std::string format_loss_record(const LossRecord& r);
inline constexpr const char* kLossLogHeader = "step,L_D,penalty,L_G,L_gaze,L_head,L_AU,L_adv";

struct TrainOutputs {
  std::optional<std::filesystem::path> loss_log;
  std::optional<std::filesystem::path> checkpoint_dir;
  std::function<void(const LossRecord&)> on_record;
};

struct ClipBatch {
  nn::Tensor speech;    // [B x L x 22]
  nn::Tensor behavior;  // [B x L x 28]
};

ClipBatch make_batch(std::span<const ClipPair* const> clips);

class Trainer {
 public:
  /// Clips must already be normalized with `stats`.
  Trainer(const ArchConfig& arch, const TrainConfig& config, const NormStats& stats,
          std::vector<ClipPair> clips);

  /// Runs all epochs. Returns the full loss log.
  std::vector<LossRecord> run(const TrainOutputs& outputs = {});

  /// One critic update on the given batch. Exposed for tests.
  LossRecord discriminator_step(const ClipBatch& batch);
  /// One generator update on the given batch. Exposed for tests.
  LossRecord generator_step(const ClipBatch& batch);

  Generator& generator() { return gen_; }
  Discriminator& discriminator() { return disc_; }
  const NormStats& stats() const { return stats_; }
  std::uint64_t steps() const { return step_; }
  /// Number of mismatch pairs in the most recent critic batch.
  std::size_t last_mismatch_count() const { return last_mismatch_; }

  CheckpointData checkpoint() const;

 private:
  ArchConfig arch_;
  TrainConfig config_;
  NormStats stats_;
  std::vector<ClipPair> clips_;
  std::vector<const ClipPair*> speaking_, listening_;
  Generator gen_;
  Discriminator disc_;
  Adam opt_g_, opt_d_;
  std::mt19937_64 rng_;
  std::uint64_t step_ = 0;
  std::size_t last_mismatch_ = 0;
};

/// Loads a generator (inference mode) from checkpoint data.
std::unique_ptr<Generator> restore_generator(const CheckpointData& data);
std::unique_ptr<Discriminator> restore_discriminator(const CheckpointData& data);

/// Inference on normalized speech of any length: 100-frame windows, the
/// last one padded with its final frame, outputs trimmed back. Returns
/// normalized behavior frames.
std::vector<BehaviorFrame> generate_behavior(Generator& gen, std::span<const SpeechFrame> speech,
                                             std::mt19937_64& rng);

}  // namespace facesync
