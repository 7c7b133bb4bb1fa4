#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "facesync/training.hpp"
#include "support.hpp"

using namespace facesync;
using nn::Tensor;

namespace {

Tensor random_tensor(std::mt19937_64& rng, std::size_t b, std::size_t l, std::size_t c) {
  Tensor t(b, l, c);
  for (auto& v : t.data) v = testing::uniform(rng);
  return t;
}

// Critic whose input gradient is the constant vector with the given norm.
CriticGradient constant_gradient_critic(double norm) {
  return [norm](const Tensor&, const Tensor& x) {
    const double per = norm / std::sqrt(static_cast<double>(x.sample_size()));
    return Tensor(x.batch, x.len, x.ch, per);
  };
}

ClipPair make_clip(std::mt19937_64& rng, std::size_t len, bool speaking, const std::string& id) {
  ClipPair c;
  c.source_id = id;
  c.speech.resize(len);
  c.behavior.resize(len);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t k = 0; k < kSpeakingIndex; ++k) c.speech[t][k] = testing::uniform(rng);
    c.speech[t][kSpeakingIndex] = speaking ? 1.0 : 0.0;
    if (speaking)
      for (std::size_t k = 0; k < kBehaviorDim; ++k) c.behavior[t][k] = testing::uniform(rng);
  }
  return c;
}

std::vector<ClipPair> clip_set(std::size_t len, std::size_t n = 8, std::uint64_t seed = 3) {
  std::mt19937_64 rng(seed);
  std::vector<ClipPair> clips;
  for (std::size_t i = 0; i < n; ++i)
    clips.push_back(make_clip(rng, len, i % 2 == 0, "clip" + std::to_string(i)));
  return clips;
}

NormStats unit_stats() {
  NormStats s;
  s.behavior_max.fill(1.0);
  s.speech_max.fill(1.0);
  return s;
}

TrainConfig small_config() {
  TrainConfig c;
  c.batch_size = 8;
  c.n_critic = 2;
  c.seed = 4;
  return c;
}

ClipBatch whole_batch(const std::vector<ClipPair>& clips) {
  std::vector<const ClipPair*> ptrs;
  for (const auto& c : clips) ptrs.push_back(&c);
  return make_batch(ptrs);
}

}  // namespace

TEST_CASE("gradient penalty on analytic critics") {
  std::mt19937_64 rng(1);
  const auto speech = random_tensor(rng, 4, 10, kSpeechDim);
  const auto real = random_tensor(rng, 4, 10, kBehaviorDim);
  const auto fake = random_tensor(rng, 4, 10, kBehaviorDim);
  const auto unit = gradient_penalty(constant_gradient_critic(1.0), speech, real, fake, rng, 10.0);
  CHECK(unit.value == doctest::Approx(0.0).epsilon(1e-4).scale(1.0));
  for (double n : unit.norms) CHECK(n == doctest::Approx(1.0));
  CHECK(gradient_penalty(constant_gradient_critic(2.0), speech, real, fake, rng, 10.0).value ==
        doctest::Approx(10.0).epsilon(1e-5));
  CHECK(gradient_penalty(constant_gradient_critic(0.0), speech, real, fake, rng, 10.0).value ==
        doctest::Approx(10.0).epsilon(1e-5));

  const CriticGradient broken = [](const Tensor&, const Tensor& x) {
    return Tensor(x.batch, x.len, x.ch, std::numeric_limits<double>::quiet_NaN());
  };
  CHECK_THROWS_WITH_AS(gradient_penalty(broken, speech, real, fake, rng, 10.0),
                       doctest::Contains("penalty diverged"), TrainingDiverged);
}

TEST_CASE("gradient penalty interpolates between real and fake") {
  std::mt19937_64 rng(2);
  const auto speech = random_tensor(rng, 6, 5, kSpeechDim);
  const auto real = random_tensor(rng, 6, 5, kBehaviorDim);
  const auto fake = random_tensor(rng, 6, 5, kBehaviorDim);
  // Record the evaluation points through the critic.
  Tensor seen;
  const CriticGradient probe = [&](const Tensor&, const Tensor& x) {
    seen = x;
    return Tensor(x.batch, x.len, x.ch, 0.0);
  };
  gradient_penalty(probe, speech, real, fake, rng, 10.0);
  for (std::size_t b = 0; b < 6; ++b) {
    const double t = (seen.at(b, 0, 0) - fake.at(b, 0, 0)) / (real.at(b, 0, 0) - fake.at(b, 0, 0));
    CHECK((t >= 0.0 && t <= 1.0));
    for (std::size_t i = 0; i < seen.sample_size(); ++i)
      CHECK(seen.sample(b)[i] == doctest::Approx(t * real.sample(b)[i] + (1 - t) * fake.sample(b)[i]));
  }
}

TEST_CASE("discriminator penalty matches a finite-difference input gradient") {
  const auto arch = testing::tiny_arch();
  Discriminator d(arch, 5);
  std::mt19937_64 rng(3);
  const auto speech = random_tensor(rng, 2, arch.clip_length, kSpeechDim);
  const auto real = random_tensor(rng, 2, arch.clip_length, kBehaviorDim);
  const auto fake = random_tensor(rng, 2, arch.clip_length, kBehaviorDim);

  // With real == fake the evaluation point is known exactly.
  std::mt19937_64 r1(7);
  const auto pen = discriminator_penalty(d, speech, real, real, r1, 10.0, 77, false);
  const nn::Context ctx{.train = true, .update_stats = false, .dropout_seed = 77};
  Tensor x = real;
  const double h = 1e-6;
  for (std::size_t b = 0; b < 2; ++b) {
    double sq = 0;
    for (std::size_t i = 0; i < x.sample_size(); ++i) {
      double& v = x.sample(b)[i];
      const double keep = v;
      v = keep + h;
      const auto up = d.forward(speech, x, ctx);
      v = keep - h;
      const auto dn = d.forward(speech, x, ctx);
      v = keep;
      double s = 0;
      for (std::size_t k = 0; k < 2; ++k) s += up.data[k] - dn.data[k];
      const double g = s / (2 * h);
      sq += g * g;
    }
    CHECK(pen.norms[b] == doctest::Approx(std::sqrt(sq)).epsilon(1e-5));
  }
  double expect = 0;
  for (double n : pen.norms) expect += (n - 1) * (n - 1);
  CHECK(pen.value == doctest::Approx(10.0 * expect / 2));
}

TEST_CASE("penalty parameter gradient matches brute-force differences") {
  const auto arch = testing::tiny_arch();
  Discriminator d(arch, 9);
  std::mt19937_64 rng(4);
  const auto speech = random_tensor(rng, 3, arch.clip_length, kSpeechDim);
  const auto real = random_tensor(rng, 3, arch.clip_length, kBehaviorDim);
  const auto fake = random_tensor(rng, 3, arch.clip_length, kBehaviorDim);
  const std::uint64_t seed = 31;

  auto& params = d.registry().params;
  nn::zero_grads(d.registry());
  // Pre-existing accumulations must survive.
  for (auto* p : params) std::fill(p->grad.begin(), p->grad.end(), 0.5);
  std::mt19937_64 r0(11);
  discriminator_penalty(d, speech, real, fake, r0, 10.0, seed, true);

  auto penalty_at = [&] {
    std::mt19937_64 r(11);
    return discriminator_penalty(d, speech, real, fake, r, 10.0, seed, false).value;
  };
  const double h = 1e-6;
  std::size_t checked = 0, close = 0;
  double worst = 0;
  for (auto* p : params) {
    for (std::size_t k = 0; k < p->value.size(); ++k) {
      const double keep = p->value[k];
      p->value[k] = keep + h;
      const double up = penalty_at();
      p->value[k] = keep - h;
      const double dn = penalty_at();
      p->value[k] = keep;
      const double fd = (up - dn) / (2 * h);
      const double an = p->grad[k] - 0.5;
      const double err = std::abs(an - fd) / std::max(1.0, std::abs(fd));
      worst = std::max(worst, err);
      ++checked;
      close += err < 1e-4;
    }
  }
  INFO("worst relative error " << worst);
  CHECK(checked > 500);
  CHECK(close == checked);
}

TEST_CASE("reconstruction loss") {
  std::mt19937_64 rng(5);
  std::vector<double> real(100 * kBehaviorDim);
  for (auto& v : real) v = testing::uniform(rng);
  const auto zero = reconstruction_loss(real, real);
  CHECK(zero.total == 0.0);
  CHECK(zero.gaze == 0.0);

  auto shifted = real;
  for (auto& v : shifted) v += 0.1;
  const auto l = reconstruction_loss(shifted, real);
  CHECK(l.gaze == doctest::Approx(0.1));
  CHECK(l.head == doctest::Approx(0.1));
  CHECK(l.au == doctest::Approx(0.1));
  CHECK(l.total == doctest::Approx(0.3));

  std::vector<double> gen(real.size());
  for (auto& v : gen) v = testing::uniform(rng);
  const auto got = reconstruction_loss(gen, real);
  auto rmse = [&](std::size_t lo, std::size_t n) {
    long double s = 0;
    for (std::size_t t = 0; t < 100; ++t)
      for (std::size_t c = lo; c < lo + n; ++c) {
        const long double d = gen[t * kBehaviorDim + c] - real[t * kBehaviorDim + c];
        s += d * d;
      }
    return static_cast<double>(std::sqrt(s / (100.0L * n)));
  };
  CHECK(got.gaze == doctest::Approx(rmse(kGazeOffset, kGazeDim)).epsilon(1e-9));
  CHECK(got.head == doctest::Approx(rmse(kHeadOffset, kHeadDim)).epsilon(1e-9));
  CHECK(got.au == doctest::Approx(rmse(kAuOffset, kAuDim)).epsilon(1e-9));
  CHECK(got.total == doctest::Approx(got.gaze + got.head + got.au).epsilon(1e-12));

  CHECK_THROWS_AS(reconstruction_loss(std::span(gen).first(27), std::span(real).first(27)), ShapeError);
  CHECK_THROWS_AS(reconstruction_loss(std::span(gen).first(28), std::span(real).first(56)), ShapeError);
}

TEST_CASE("batched reconstruction loss gradient") {
  std::mt19937_64 rng(6);
  auto gen = random_tensor(rng, 3, 5, kBehaviorDim);
  const auto real = random_tensor(rng, 3, 5, kBehaviorDim);
  Tensor grad;
  const auto l = reconstruction_loss(gen, real, &grad);
  double mean = 0;
  for (std::size_t b = 0; b < 3; ++b)
    mean += reconstruction_loss(std::span<const double>(gen.sample(b), gen.sample_size()),
                                std::span<const double>(real.sample(b), real.sample_size()))
                .total;
  CHECK(l.total == doctest::Approx(mean / 3));
  const double h = 1e-6;
  for (std::size_t i = 0; i < gen.size(); i += 7) {
    const double keep = gen.data[i];
    gen.data[i] = keep + h;
    const double up = reconstruction_loss(gen, real).total;
    gen.data[i] = keep - h;
    const double dn = reconstruction_loss(gen, real).total;
    gen.data[i] = keep;
    CHECK(grad.data[i] == doctest::Approx((up - dn) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("adversarial objectives") {
  const std::vector<double> c{0.5, 0.5};
  CHECK(adversarial_losses(c, c, 0.0).critic == 0.0);
  const std::vector<double> real{0.3, 0.5}, fake{0.6, 0.8};
  const auto l = adversarial_losses(real, fake, 10.0);
  CHECK(l.critic == doctest::Approx(10.3));
  CHECK(l.generator == doctest::Approx(-0.7));
  CHECK(combined_generator_loss(1.0, -0.5, 0.1) == doctest::Approx(0.95));
}

TEST_CASE("mismatch pairs oppose speaking profiles") {
  const auto clips = clip_set(16, 6);
  std::vector<const ClipPair*> speaking, listening;
  for (const auto& c : clips) (classify_clip(c) == ClipKind::speaking ? speaking : listening).push_back(&c);
  REQUIRE(speaking.size() == 3);
  std::mt19937_64 rng(8);
  const auto pairs = fabricate_mismatch(speaking, listening, 40, rng);
  REQUIRE(pairs.size() == 40);
  std::size_t both = 0;
  for (const auto& p : pairs) {
    CHECK(p.speech_source != p.behavior_source);
    if (p.speaking_speech) {
      ++both;
      for (std::size_t t = 0; t < 16; ++t) {
        CHECK(p.speech[t].speaking());
        CHECK(p.behavior[t] == BehaviorFrame{});
      }
    } else {
      bool varies = false;
      for (std::size_t t = 0; t < 16; ++t) {
        CHECK_FALSE(p.speech[t].speaking());
        varies = varies || !(p.behavior[t] == p.behavior[0]);
      }
      CHECK(varies);
    }
  }
  CHECK(both > 0);
  CHECK(both < 40);
  CHECK_THROWS_WITH_AS(fabricate_mismatch(speaking, {}, 1, rng), doctest::Contains("insufficient turn diversity"),
                       DataError);
}

TEST_CASE("clip classification threshold") {
  std::mt19937_64 rng(9);
  auto c = make_clip(rng, 10, true, "a");
  CHECK(classify_clip(c) == ClipKind::speaking);
  for (std::size_t t = 0; t < 2; ++t) c.speech[t][kSpeakingIndex] = 0;
  CHECK(classify_clip(c) == ClipKind::mixed);
  for (std::size_t t = 0; t < 9; ++t) c.speech[t][kSpeakingIndex] = 0;
  CHECK(classify_clip(c) == ClipKind::listening);
}

TEST_CASE("adam first step moves each weight by lr against its gradient sign") {
  nn::Param p("w", 3);
  p.value = {1.0, 2.0, 3.0};
  p.grad = {0.5, -2.0, 0.0};
  nn::ParamRegistry reg;
  reg.params.push_back(&p);
  Adam opt(reg, 0.01, 0.5, 0.9);
  opt.step();
  CHECK(p.value[0] == doctest::Approx(0.99));
  CHECK(p.value[1] == doctest::Approx(2.01));
  CHECK(p.value[2] == 3.0);
}

TEST_CASE("loss records") {
  LossRecord d;
  d.step = 3;
  d.discriminator = true;
  d.critic = 0.25;
  d.penalty = 1.5;
  CHECK(format_loss_record(d) == "3,0.25,1.5,,,,,");
  LossRecord g;
  g.step = 4;
  g.l_g = 0.5;
  g.gaze = 0.125;
  g.head = 0.125;
  g.au = 0.25;
  g.adv = -0.5;
  CHECK(format_loss_record(g) == "4,,,0.5,0.125,0.125,0.25,-0.5");
  CHECK(std::string(kLossLogHeader) == "step,L_D,penalty,L_G,L_gaze,L_head,L_AU,L_adv");
}

TEST_CASE("generator and critic steps touch only their own network") {
  const auto arch = testing::tiny_arch();
  const auto clips = clip_set(arch.clip_length);
  Trainer tr(arch, small_config(), unit_stats(), clips);
  const auto batch = whole_batch(clips);

  const auto g0 = export_state(tr.generator().registry());
  const auto d0 = export_state(tr.discriminator().registry());
  tr.discriminator_step(batch);
  CHECK(export_state(tr.generator().registry()) == g0);
  const auto d1 = export_state(tr.discriminator().registry());
  CHECK(d1 != d0);
  tr.generator_step(batch);
  CHECK(export_state(tr.discriminator().registry()) == d1);
  CHECK(export_state(tr.generator().registry()) != g0);
  CHECK(tr.steps() == 2);
}

TEST_CASE("mismatch share of the fake batch") {
  const auto arch = testing::tiny_arch();
  const auto clips = clip_set(arch.clip_length);
  const auto batch = whole_batch(clips);
  auto cfg = small_config();
  Trainer with(arch, cfg, unit_stats(), clips);
  with.discriminator_step(batch);
  CHECK(with.last_mismatch_count() == 3);
  cfg.mismatch_fraction = 0.0;
  Trainer without(arch, cfg, unit_stats(), clips);
  for (int i = 0; i < 3; ++i) {
    without.discriminator_step(batch);
    CHECK(without.last_mismatch_count() == 0);
  }

  std::vector<ClipPair> only_speaking;
  for (std::size_t i = 0; i < clips.size(); i += 2) only_speaking.push_back(clips[i]);
  CHECK_THROWS_WITH_AS(Trainer(arch, small_config(), unit_stats(), only_speaking),
                       doctest::Contains("insufficient turn diversity"), DataError);
  CHECK_NOTHROW(Trainer(arch, cfg, unit_stats(), only_speaking));
}

TEST_CASE("fixed seed reproduces the loss sequence") {
  const auto arch = testing::tiny_arch();
  const auto clips = clip_set(arch.clip_length, 12);
  auto cfg = small_config();
  cfg.epochs = 2;
  Trainer a(arch, cfg, unit_stats(), clips), b(arch, cfg, unit_stats(), clips);
  const auto ra = a.run(), rb = b.run();
  REQUIRE(ra.size() == 2 * 2 * (cfg.n_critic + 1));
  for (std::size_t i = 0; i < ra.size(); ++i) CHECK(format_loss_record(ra[i]) == format_loss_record(rb[i]));
  CHECK(export_state(a.generator().registry()) == export_state(b.generator().registry()));
  cfg.seed = 5;
  Trainer c(arch, cfg, unit_stats(), clips);
  CHECK(format_loss_record(c.run()[0]) != format_loss_record(ra[0]));
}

TEST_CASE("one batch writes n_critic + 1 log rows and a final checkpoint") {
  const auto arch = testing::tiny_arch();
  const auto clips = clip_set(arch.clip_length);
  testing::TempDir dir("train");
  auto cfg = small_config();
  cfg.checkpoint_interval = 1;
  Trainer tr(arch, cfg, unit_stats(), clips);
  std::size_t callbacks = 0;
  const auto recs = tr.run({dir / "loss_log.csv", dir / "ckpt", [&](const LossRecord&) { ++callbacks; }});
  CHECK(recs.size() == cfg.n_critic + 1);
  CHECK(callbacks == recs.size());
  std::ifstream is(dir / "loss_log.csv");
  std::vector<std::string> lines;
  for (std::string line; std::getline(is, line);) lines.push_back(line);
  REQUIRE(lines.size() == cfg.n_critic + 2);
  CHECK(lines[0] == kLossLogHeader);
  CHECK(lines.back() == format_loss_record(recs.back()));
  CHECK(std::filesystem::exists(dir / "ckpt" / "step_00000003.ckpt"));
  const auto final = read_checkpoint(dir / "ckpt" / "final.ckpt");
  CHECK(final.step == 3);
  CHECK(final.generator_state == export_state(tr.generator().registry()));
}

TEST_CASE("a partial last batch is kept") {
  const auto arch = testing::tiny_arch();
  const auto clips = clip_set(arch.clip_length, 10);
  auto cfg = small_config();
  cfg.n_critic = 1;
  Trainer tr(arch, cfg, unit_stats(), clips);
  CHECK(tr.run().size() == 4);
}

TEST_CASE("non-finite losses abort and keep the last good state") {
  const auto arch = testing::tiny_arch();
  auto clips = clip_set(arch.clip_length);
  clips[0].behavior[3][5] = std::numeric_limits<double>::quiet_NaN();
  testing::TempDir dir("diverge");
  Trainer tr(arch, small_config(), unit_stats(), clips);
  const auto before = export_state(tr.discriminator().registry());
  CHECK_THROWS_AS(tr.run({std::nullopt, dir / "ckpt", {}}), TrainingDiverged);
  const auto saved = read_checkpoint(dir / "ckpt" / "last_good.ckpt");
  CHECK(saved.discriminator_state == before);
  CHECK_FALSE(std::filesystem::exists(dir / "ckpt" / "final.ckpt"));
}

TEST_CASE("generation covers any speech length") {
  const auto arch = testing::tiny_arch();
  Generator gen(arch, 3);
  std::mt19937_64 rng(12);
  std::vector<SpeechFrame> speech(37);
  for (auto& f : speech)
    for (std::size_t k = 0; k < kSpeechDim; ++k) f[k] = testing::uniform(rng);
  std::mt19937_64 r1(5), r2(5);
  const auto a = generate_behavior(gen, speech, r1);
  CHECK(a.size() == 37);
  CHECK(a == generate_behavior(gen, speech, r2));
  for (const auto& f : a)
    for (double v : f.values()) CHECK((v > 0 && v < 1));
  CHECK(generate_behavior(gen, std::span(speech).first(16), r1).size() == 16);
  CHECK_THROWS_AS(generate_behavior(gen, {}, r1), DataError);
}

TEST_CASE("training config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.mismatch_fraction = 1.5;
  CHECK_THROWS(c.validate());
  c = TrainConfig{};
  c.batch_size = 0;
  CHECK_THROWS(c.validate());
  c = TrainConfig{};
  c.lambda_gp = -1;
  CHECK_THROWS(c.validate());
}
