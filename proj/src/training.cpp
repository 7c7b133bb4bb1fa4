#include "facesync/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <numeric>

#include <spdlog/spdlog.h>

namespace facesync {

using nn::Tensor;

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw DataError("train config: " + m); };
  if (!(lr_generator > 0.0) || !(lr_discriminator > 0.0)) fail("learning rates must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (!(lambda_gp > 0.0)) fail("lambda_gp must be positive");
  if (!(adv_weight > 0.0)) fail("adv_weight must be positive");
  if (n_critic == 0) fail("n_critic must be positive");
  if (epochs == 0) fail("epochs must be positive");
  if (checkpoint_interval == 0) fail("checkpoint_interval must be positive");
  if (!(mismatch_fraction >= 0.0 && mismatch_fraction <= 1.0)) fail("mismatch_fraction must lie in [0, 1]");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    fail("Adam betas must lie in [0, 1)");
  if (!(speaking_threshold > 0.5 && speaking_threshold <= 1.0)) fail("speaking_threshold must lie in (0.5, 1]");
}

// ------------------------------------------------------------ losses

namespace {

struct Group {
  std::size_t offset, dim;
};
constexpr std::array<Group, 3> kGroups{{{kGazeOffset, kGazeDim}, {kHeadOffset, kHeadDim}, {kAuOffset, kAuDim}}};

std::array<double, 3> group_rmse(const double* gen, const double* real, std::size_t frames) {
  std::array<double, 3> out{};
  for (std::size_t g = 0; g < 3; ++g) {
    double s = 0.0;
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t c = 0; c < kGroups[g].dim; ++c) {
        const std::size_t i = t * kBehaviorDim + kGroups[g].offset + c;
        const double d = gen[i] - real[i];
        s += d * d;
      }
    out[g] = std::sqrt(s / static_cast<double>(frames * kGroups[g].dim));
  }
  return out;
}

}  // namespace

ReconstructionLoss reconstruction_loss(std::span<const double> generated, std::span<const double> real) {
  if (generated.size() != real.size())
    throw ShapeError("reconstruction loss: " + std::to_string(generated.size()) + " vs " +
                     std::to_string(real.size()) + " values");
  if (generated.empty() || generated.size() % kBehaviorDim != 0)
    throw ShapeError("reconstruction loss: expected frames x 28 values");
  const auto r = group_rmse(generated.data(), real.data(), generated.size() / kBehaviorDim);
  return {r[0], r[1], r[2], r[0] + r[1] + r[2]};
}

ReconstructionLoss reconstruction_loss(const Tensor& generated, const Tensor& real, Tensor* grad) {
  if (!generated.same_shape(real))
    throw ShapeError("reconstruction loss: " + generated.shape_str() + " vs " + real.shape_str());
  if (generated.ch != kBehaviorDim || generated.batch == 0 || generated.len == 0)
    throw ShapeError("reconstruction loss: expected [Bx Lx28], got " + generated.shape_str());
  const std::size_t B = generated.batch, L = generated.len;
  const double inv_b = 1.0 / static_cast<double>(B);
  ReconstructionLoss total;
  if (grad) *grad = Tensor(B, L, kBehaviorDim);
  for (std::size_t b = 0; b < B; ++b) {
    const double* x = generated.sample(b);
    const double* y = real.sample(b);
    const auto r = group_rmse(x, y, L);
    total.gaze += r[0] * inv_b;
    total.head += r[1] * inv_b;
    total.au += r[2] * inv_b;
    if (!grad) continue;
    double* g = grad->sample(b);
    for (std::size_t k = 0; k < 3; ++k) {
      if (r[k] == 0.0) continue;
      const double scale = inv_b / (static_cast<double>(L * kGroups[k].dim) * r[k]);
      for (std::size_t t = 0; t < L; ++t)
        for (std::size_t c = 0; c < kGroups[k].dim; ++c) {
          const std::size_t i = t * kBehaviorDim + kGroups[k].offset + c;
          g[i] = (x[i] - y[i]) * scale;
        }
    }
  }
  total.total = total.gaze + total.head + total.au;
  return total;
}

namespace {

Tensor interpolate(const Tensor& real, const Tensor& fake, std::mt19937_64& rng) {
  if (!real.same_shape(fake))
    throw ShapeError("gradient penalty: real " + real.shape_str() + " vs fake " + fake.shape_str());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Tensor x = real;
  for (std::size_t b = 0; b < real.batch; ++b) {
    const double t = unit(rng);
    const double* r = real.sample(b);
    const double* f = fake.sample(b);
    double* o = x.sample(b);
    for (std::size_t i = 0; i < real.sample_size(); ++i) o[i] = t * r[i] + (1.0 - t) * f[i];
  }
  return x;
}

PenaltyResult penalty_from_gradient(const Tensor& g, double lambda) {
  PenaltyResult res;
  for (std::size_t b = 0; b < g.batch; ++b) {
    double s = 0.0;
    const double* p = g.sample(b);
    for (std::size_t i = 0; i < g.sample_size(); ++i) s += p[i] * p[i];
    const double n = std::sqrt(s);
    if (!std::isfinite(n)) throw TrainingDiverged("penalty diverged");
    res.norms.push_back(n);
    res.value += (n - 1.0) * (n - 1.0);
  }
  res.value *= lambda / static_cast<double>(g.batch);
  return res;
}

std::vector<std::vector<double>> grad_snapshot(const nn::ParamRegistry& r) {
  std::vector<std::vector<double>> s;
  s.reserve(r.params.size());
  for (auto* p : r.params) s.push_back(p->grad);
  return s;
}

}  // namespace

PenaltyResult gradient_penalty(const CriticGradient& critic, const Tensor& speech, const Tensor& real,
                               const Tensor& fake, std::mt19937_64& rng, double lambda) {
  const Tensor x = interpolate(real, fake, rng);
  const Tensor g = critic(speech, x);
  if (!g.same_shape(x)) throw ShapeError("gradient penalty: critic gradient has shape " + g.shape_str());
  return penalty_from_gradient(g, lambda);
}

PenaltyResult discriminator_penalty(Discriminator& d, const Tensor& speech, const Tensor& real, const Tensor& fake,
                                    std::mt19937_64& rng, double lambda, std::uint64_t dropout_seed,
                                    bool param_grad) {
  const Tensor x = interpolate(real, fake, rng);
  const std::size_t B = x.batch;
  const auto saved = grad_snapshot(d.registry());
  const Tensor ones(B, 1, 1, 1.0);

  nn::Context ctx{.train = true, .update_stats = false, .dropout_seed = dropout_seed, .reuse_patterns = false};
  d.forward(speech, x, ctx);
  const Tensor gx = d.backward(ones).second;
  PenaltyResult res = penalty_from_gradient(gx, lambda);

  auto& params = d.registry().params;
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->grad = saved[i];
  if (!param_grad) return res;

  // d PEN / d theta = d/de [grad_theta S(x + e U)] at e = 0, S = sum_i D(x_i),
  // U_i = (2 lambda / B) (|g_i| - 1) / |g_i| g_i.
  Tensor u(B, x.len, x.ch);
  double umax = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const double n = res.norms[b];
    if (n == 0.0) continue;
    const double k = 2.0 * lambda / static_cast<double>(B) * (n - 1.0) / n;
    for (std::size_t i = 0; i < x.sample_size(); ++i) {
      u.sample(b)[i] = k * gx.sample(b)[i];
      umax = std::max(umax, std::abs(u.sample(b)[i]));
    }
  }
  if (umax == 0.0) return res;
  const double eps = 1e-5 / umax;

  ctx.reuse_patterns = true;
  auto probe = [&](double sign) {
    Tensor xp = x;
    for (std::size_t i = 0; i < xp.size(); ++i) xp.data[i] += sign * eps * u.data[i];
    nn::zero_grads(d.registry());
    d.forward(speech, xp, ctx);
    d.backward(ones);
    return grad_snapshot(d.registry());
  };
  const auto plus = probe(1.0);
  const auto minus = probe(-1.0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& g = params[i]->grad;
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = saved[i][k] + (plus[i][k] - minus[i][k]) / (2.0 * eps);
  }
  return res;
}

AdversarialLosses adversarial_losses(std::span<const double> d_real, std::span<const double> d_fake,
                                     double penalty) {
  if (d_real.empty() || d_fake.empty()) throw DataError("adversarial losses: empty discriminator outputs");
  const double mr = std::accumulate(d_real.begin(), d_real.end(), 0.0) / static_cast<double>(d_real.size());
  const double mf = std::accumulate(d_fake.begin(), d_fake.end(), 0.0) / static_cast<double>(d_fake.size());
  return {mf - mr + penalty, -mf};
}

double combined_generator_loss(double reconstruction, double adversarial, double w) {
  return reconstruction + w * adversarial;
}

// -------------------------------------------------- mismatch examples

ClipKind classify_clip(const ClipPair& clip, double threshold) {
  if (clip.speech.empty()) throw DataError("classify clip: empty clip " + clip.source_id);
  std::size_t speaking = 0;
  for (const auto& f : clip.speech) speaking += f.speaking() ? 1 : 0;
  const double n = static_cast<double>(clip.speech.size());
  if (static_cast<double>(speaking) / n > threshold) return ClipKind::speaking;
  if (static_cast<double>(clip.speech.size() - speaking) / n > threshold) return ClipKind::listening;
  return ClipKind::mixed;
}

std::vector<MismatchPair> fabricate_mismatch(std::span<const ClipPair* const> speaking,
                                             std::span<const ClipPair* const> listening, std::size_t count,
                                             std::mt19937_64& rng) {
  if (speaking.empty() || listening.empty())
    throw DataError("insufficient turn diversity: " + std::to_string(speaking.size()) + " speaking and " +
                    std::to_string(listening.size()) + " listening clips");
  std::uniform_int_distribution<std::size_t> pick_s(0, speaking.size() - 1), pick_l(0, listening.size() - 1);
  std::bernoulli_distribution coin(0.5);
  std::vector<MismatchPair> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const bool speaking_speech = coin(rng);
    const ClipPair* s = speaking[pick_s(rng)];
    const ClipPair* l = listening[pick_l(rng)];
    const ClipPair* from_speech = speaking_speech ? s : l;
    const ClipPair* from_behavior = speaking_speech ? l : s;
    out.push_back({from_speech->speech, from_behavior->behavior, from_speech->source_id, from_behavior->source_id,
                   speaking_speech});
  }
  return out;
}

// ---------------------------------------------------------- training

Adam::Adam(nn::ParamRegistry& registry, double lr, double beta1, double beta2, double eps)
    : reg_(&registry), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
  for (auto* p : registry.params) {
    m_.emplace_back(p->value.size(), 0.0);
    v_.emplace_back(p->value.size(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < reg_->params.size(); ++i) {
    auto& p = *reg_->params[i];
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      m[k] = b1_ * m[k] + (1.0 - b1_) * g;
      v[k] = b2_ * v[k] + (1.0 - b2_) * g * g;
      p.value[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
    }
  }
}

std::string format_loss_record(const LossRecord& r) {
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  std::string s = std::to_string(r.step) + ",";
  if (r.discriminator)
    s += num(r.critic) + "," + num(r.penalty) + ",,,,,";
  else
    s += ",," + num(r.l_g) + "," + num(r.gaze) + "," + num(r.head) + "," + num(r.au) + "," + num(r.adv);
  return s;
}

ClipBatch make_batch(std::span<const ClipPair* const> clips) {
  if (clips.empty()) throw DataError("empty batch");
  const std::size_t L = clips.front()->speech.size();
  ClipBatch b{Tensor(clips.size(), L, kSpeechDim), Tensor(clips.size(), L, kBehaviorDim)};
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const auto& c = *clips[i];
    if (c.speech.size() != L || c.behavior.size() != L)
      throw ShapeError("batch: clip " + c.source_id + " has " + std::to_string(c.speech.size()) + "/" +
                       std::to_string(c.behavior.size()) + " frames, expected " + std::to_string(L));
    for (std::size_t t = 0; t < L; ++t) {
      std::copy(c.speech[t].values().begin(), c.speech[t].values().end(), &b.speech.at(i, t, 0));
      std::copy(c.behavior[t].values().begin(), c.behavior[t].values().end(), &b.behavior.at(i, t, 0));
    }
  }
  return b;
}

namespace {

Tensor noise_batch(std::size_t batch, std::size_t length, std::mt19937_64& rng) {
  Tensor z(batch, 1, length);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto n = make_noise(rng, length);
    std::copy(n.values.begin(), n.values.end(), z.sample(b));
  }
  return z;
}

double mean_of(const Tensor& t) {
  return std::accumulate(t.data.begin(), t.data.end(), 0.0) / static_cast<double>(t.size());
}

bool finite(const LossRecord& r) {
  return std::isfinite(r.critic) && std::isfinite(r.penalty) && std::isfinite(r.l_g) && std::isfinite(r.adv);
}

void check_grads(const nn::ParamRegistry& reg, const char* who, std::uint64_t step) {
  for (auto* p : reg.params)
    for (double g : p->grad)
      if (!std::isfinite(g))
        throw TrainingDiverged(std::string("non-finite ") + who + " gradient in " + p->name + " at step " +
                               std::to_string(step));
}

// Batch-norm running statistics move during the forward passes, before the
// loss is known to be finite. An aborted step puts them back.
class BufferGuard {
 public:
  explicit BufferGuard(nn::ParamRegistry& reg) : reg_(reg) {
    for (auto* b : reg.buffers) saved_.push_back(*b);
  }
  ~BufferGuard() {
    if (committed_) return;
    for (std::size_t i = 0; i < saved_.size(); ++i) *reg_.buffers[i] = saved_[i];
  }
  void commit() { committed_ = true; }

 private:
  nn::ParamRegistry& reg_;
  std::vector<std::vector<double>> saved_;
  bool committed_ = false;
};

}  // namespace

Trainer::Trainer(const ArchConfig& arch, const TrainConfig& config, const NormStats& stats,
                 std::vector<ClipPair> clips)
    : arch_(arch),
      config_(config),
      stats_(stats),
      clips_(std::move(clips)),
      gen_(arch, config.seed * 2 + 1),
      disc_(arch, config.seed * 2 + 2),
      opt_g_(gen_.registry(), config.lr_generator, config.adam_beta1, config.adam_beta2),
      opt_d_(disc_.registry(), config.lr_discriminator, config.adam_beta1, config.adam_beta2),
      rng_(config.seed) {
  config_.validate();
  if (clips_.empty()) throw DataError("training needs at least one clip");
  for (const auto& c : clips_) {
    if (c.speech.size() != arch_.clip_length || c.behavior.size() != arch_.clip_length)
      throw ShapeError("training clip " + c.source_id + " is not " + std::to_string(arch_.clip_length) +
                       " frames long");
    const auto kind = classify_clip(c, config_.speaking_threshold);
    if (kind == ClipKind::speaking) speaking_.push_back(&c);
    if (kind == ClipKind::listening) listening_.push_back(&c);
  }
  if (config_.mismatch_fraction > 0.0 && (speaking_.empty() || listening_.empty()))
    throw DataError("insufficient turn diversity: " + std::to_string(speaking_.size()) + " speaking and " +
                    std::to_string(listening_.size()) + " listening clips");
}

LossRecord Trainer::discriminator_step(const ClipBatch& batch) {
  const std::size_t B = batch.speech.batch;
  const auto n_mm = std::min<std::size_t>(
      B, static_cast<std::size_t>(std::llround(config_.mismatch_fraction * static_cast<double>(B))));
  last_mismatch_ = n_mm;
  BufferGuard guard(disc_.registry());

  nn::Context gctx{.train = true, .update_stats = false, .dropout_seed = rng_(), .reuse_patterns = false};
  const Tensor generated = gen_.forward(batch.speech, noise_batch(B, arch_.noise_length, rng_), gctx);

  Tensor fake_speech = batch.speech;
  Tensor fake_behavior = generated;
  if (n_mm > 0) {
    const auto pairs = fabricate_mismatch(speaking_, listening_, n_mm, rng_);
    for (std::size_t i = 0; i < n_mm; ++i) {
      const std::size_t slot = B - n_mm + i;
      for (std::size_t t = 0; t < arch_.clip_length; ++t) {
        std::copy(pairs[i].speech[t].values().begin(), pairs[i].speech[t].values().end(), &fake_speech.at(slot, t, 0));
        std::copy(pairs[i].behavior[t].values().begin(), pairs[i].behavior[t].values().end(),
                  &fake_behavior.at(slot, t, 0));
      }
    }
  }

  nn::zero_grads(disc_.registry());
  const double inv_b = 1.0 / static_cast<double>(B);
  nn::Context dctx{.train = true, .update_stats = true, .dropout_seed = rng_(), .reuse_patterns = false};
  const Tensor d_real = disc_.forward(batch.speech, batch.behavior, dctx);
  disc_.backward(Tensor(B, 1, 1, -inv_b));
  dctx.dropout_seed = rng_();
  const Tensor d_fake = disc_.forward(fake_speech, fake_behavior, dctx);
  disc_.backward(Tensor(B, 1, 1, inv_b));

  const Tensor& other = config_.gp_interpolate_mismatch ? fake_behavior : generated;
  const auto pen = discriminator_penalty(disc_, batch.speech, batch.behavior, other, rng_, config_.lambda_gp,
                                         rng_(), true);

  LossRecord rec;
  rec.step = step_;
  rec.discriminator = true;
  rec.penalty = pen.value;
  rec.critic = adversarial_losses(d_real.data, d_fake.data, pen.value).critic;
  if (!finite(rec)) throw TrainingDiverged("non-finite discriminator loss at step " + std::to_string(step_));
  check_grads(disc_.registry(), "discriminator", step_);
  guard.commit();
  opt_d_.step();
  ++step_;
  return rec;
}

LossRecord Trainer::generator_step(const ClipBatch& batch) {
  const std::size_t B = batch.speech.batch;
  BufferGuard guard(gen_.registry());
  nn::zero_grads(gen_.registry());
  nn::Context gctx{.train = true, .update_stats = true, .dropout_seed = rng_(), .reuse_patterns = false};
  const Tensor generated = gen_.forward(batch.speech, noise_batch(B, arch_.noise_length, rng_), gctx);

  Tensor grad;
  const auto rec_loss = reconstruction_loss(generated, batch.behavior, &grad);

  nn::Context dctx{.train = true, .update_stats = false, .dropout_seed = rng_(), .reuse_patterns = false};
  const Tensor d_fake = disc_.forward(batch.speech, generated, dctx);
  const double adv = -mean_of(d_fake);
  const Tensor dadv = disc_.backward(Tensor(B, 1, 1, -config_.adv_weight / static_cast<double>(B))).second;
  nn::zero_grads(disc_.registry());
  for (std::size_t i = 0; i < grad.size(); ++i) grad.data[i] += dadv.data[i];

  LossRecord rec;
  rec.step = step_;
  rec.l_g = rec_loss.total;
  rec.gaze = rec_loss.gaze;
  rec.head = rec_loss.head;
  rec.au = rec_loss.au;
  rec.adv = adv;
  if (!finite(rec)) throw TrainingDiverged("non-finite generator loss at step " + std::to_string(step_));
  gen_.backward(grad);
  check_grads(gen_.registry(), "generator", step_);
  guard.commit();
  opt_g_.step();
  ++step_;
  return rec;
}

CheckpointData Trainer::checkpoint() const {
  auto& self = const_cast<Trainer&>(*this);
  return {arch_, stats_, step_, export_state(self.gen_.registry()), export_state(self.disc_.registry())};
}

std::vector<LossRecord> Trainer::run(const TrainOutputs& outputs) {
  std::ofstream log;
  if (outputs.loss_log) {
    if (outputs.loss_log->has_parent_path()) std::filesystem::create_directories(outputs.loss_log->parent_path());
    log.open(*outputs.loss_log, std::ios::trunc);
    if (!log) throw DataError("cannot write loss log " + outputs.loss_log->string());
    log << kLossLogHeader << '\n';
  }
  if (outputs.checkpoint_dir) std::filesystem::create_directories(*outputs.checkpoint_dir);

  std::future<void> pending;
  auto save = [&](const std::string& name, bool wait) {
    if (!outputs.checkpoint_dir) return;
    if (pending.valid()) pending.get();
    auto data = checkpoint();
    auto path = *outputs.checkpoint_dir / name;
    pending = std::async(std::launch::async, [data = std::move(data), path] { write_checkpoint(path, data); });
    if (wait) pending.get();
  };

  std::vector<LossRecord> records;
  auto emit = [&](const LossRecord& r) {
    records.push_back(r);
    if (log) log << format_loss_record(r) << '\n' << std::flush;
    if (outputs.on_record) outputs.on_record(r);
  };

  std::vector<const ClipPair*> order;
  for (const auto& c : clips_) order.push_back(&c);
  std::uint64_t g_steps = 0;
  try {
    for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng_);
      for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
        const std::size_t end = std::min(order.size(), start + config_.batch_size);
        const auto batch = make_batch(std::span(order).subspan(start, end - start));
        for (std::size_t k = 0; k < config_.n_critic; ++k) emit(discriminator_step(batch));
        emit(generator_step(batch));
        if (++g_steps % config_.checkpoint_interval == 0) {
          char name[32];
          std::snprintf(name, sizeof name, "step_%08llu.ckpt", static_cast<unsigned long long>(step_));
          save(name, false);
        }
      }
      spdlog::debug("epoch {} done, step {}", epoch + 1, step_);
    }
  } catch (const TrainingDiverged& e) {
    if (pending.valid()) pending.get();
    // Parameters are updated only after the loss check, so the current
    // state is the last good one.
    save("last_good.ckpt", true);
    spdlog::error("{}", e.what());
    throw;
  }
  save("final.ckpt", true);
  return records;
}

std::unique_ptr<Generator> restore_generator(const CheckpointData& data) {
  auto g = std::make_unique<Generator>(data.arch, 0);
  import_state(g->registry(), data.generator_state);
  return g;
}

std::unique_ptr<Discriminator> restore_discriminator(const CheckpointData& data) {
  auto d = std::make_unique<Discriminator>(data.arch, 0);
  import_state(d->registry(), data.discriminator_state);
  return d;
}

std::vector<BehaviorFrame> generate_behavior(Generator& gen, std::span<const SpeechFrame> speech,
                                             std::mt19937_64& rng) {
  if (speech.empty()) throw DataError("generate: empty speech input");
  const std::size_t L = gen.config().clip_length;
  const std::size_t windows = (speech.size() + L - 1) / L;
  Tensor x(windows, L, kSpeechDim);
  for (std::size_t w = 0; w < windows; ++w)
    for (std::size_t t = 0; t < L; ++t) {
      const auto& f = speech[std::min(w * L + t, speech.size() - 1)];
      std::copy(f.values().begin(), f.values().end(), &x.at(w, t, 0));
    }
  const Tensor y = gen.forward(x, noise_batch(windows, gen.config().noise_length, rng), nn::Context{});
  std::vector<BehaviorFrame> out(speech.size());
  for (std::size_t i = 0; i < speech.size(); ++i)
    std::copy_n(y.data.data() + ((i / L) * L + i % L) * kBehaviorDim, kBehaviorDim, out[i].values().begin());
  return out;
}

}  // namespace facesync
