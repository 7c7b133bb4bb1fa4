#include "facesync/netarch.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "facesync/config.hpp"

namespace facesync {

using nn::Tensor;

// ------------------------------------------------------------ ArchConfig

std::vector<std::size_t> ArchConfig::encoder_lengths() const {
  std::vector<std::size_t> lens{clip_length};
  for (std::size_t i = 1; i < encoder_channels.size(); ++i)
    lens.push_back(pool_factor == 0 ? 0 : lens.back() / pool_factor);
  return lens;
}

void ArchConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ShapeError("arch config: " + msg); };
  if (encoder_channels.size() != 5) fail("encoder needs exactly 5 DoubleConv widths");
  if (decoder_channels.size() != encoder_channels.size() - 1)
    fail("each decoder needs one block per pooling level (" + std::to_string(encoder_channels.size() - 1) + ")");
  if (disc_channels.size() != 4) fail("discriminator needs exactly 4 DoubleConv widths");
  if (kernel_size % 2 == 0 || kernel_size == 0) fail("kernel size must be odd");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (pool_factor < 2) fail("pool factor must be at least 2");
  if (upsample_factor < 2) fail("upsample factor must be at least 2");
  if (head_channels[0] + head_channels[1] + head_channels[2] != kBehaviorDim)
    fail("decoder head widths must sum to " + std::to_string(kBehaviorDim));
  if (head_channels != std::array<std::size_t, 3>{kGazeDim, kHeadDim, kAuDim})
    fail("decoder heads must be gaze(8), head(3), au(17)");
  if (noise_channels == 0 || noise_length != noise_channels * clip_length)
    fail("noise of length " + std::to_string(noise_length) + " cannot be reshaped to " +
         std::to_string(noise_channels) + " channels x " + std::to_string(clip_length) + " steps");
  for (auto w : encoder_channels)
    if (w == 0) fail("zero encoder width");
  for (auto w : decoder_channels)
    if (w == 0) fail("zero decoder width");
  for (auto w : disc_channels)
    if (w == 0) fail("zero discriminator width");
  if (disc_embed_channels == 0) fail("zero discriminator embedding width");

  const auto lens = encoder_lengths();
  for (std::size_t i = 0; i < lens.size(); ++i)
    if (lens[i] == 0) fail("temporal resolution vanishes at encoder level " + std::to_string(i));
  // Skip connections: the upsampled decoder input must meet the encoder
  // feature map of the same depth; only the floor remainder of pooling may be
  // replicated.
  std::size_t cur = lens.back();
  for (std::size_t i = 0; i + 1 < lens.size(); ++i) {
    const std::size_t skip_level = lens.size() - 2 - i;
    const std::size_t skip_len = lens[skip_level];
    const std::size_t up = cur * upsample_factor;
    if (up > skip_len || skip_len - up >= pool_factor)
      fail("skip connection at decoder block " + std::to_string(i) + " joins length " + std::to_string(up) +
           " with encoder level " + std::to_string(skip_level) + " of length " + std::to_string(skip_len));
    cur = skip_len;
  }
  std::size_t dl = clip_length;
  for (std::size_t i = 0; i < disc_channels.size(); ++i) dl /= pool_factor;
  if (dl == 0) fail("discriminator pools the sequence down to zero length");
}

// ------------------------------------------------------------------ noise

NoiseVector ramp_noise(double a, double b, std::size_t length) {
  NoiseVector z;
  z.values.resize(length);
  const double denom = length > 1 ? static_cast<double>(length - 1) : 1.0;
  for (std::size_t i = 0; i < length; ++i) z.values[i] = a + (b - a) * static_cast<double>(i) / denom;
  return z;
}

NoiseVector make_noise(std::mt19937_64& rng, std::size_t length) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double a = u(rng);
  const double b = u(rng);
  return ramp_noise(a, b, length);
}

// -------------------------------------------------------------- Generator

namespace {
constexpr std::array<const char*, 3> kHeadNames{"gaze", "head", "au"};

std::size_t count(const nn::ParamRegistry& r) {
  std::size_t n = 0;
  for (auto* p : r.params) n += p->value.size();
  return n;
}
}  // namespace

Generator::Generator(const ArchConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::uint64_t ids = 0;
  const auto& enc = config_.encoder_channels;
  std::size_t in = speech_channels_ + config_.noise_channels;
  for (std::size_t i = 0; i < enc.size(); ++i) {
    encoder_.emplace_back("gen.enc" + std::to_string(i), in, enc[i], config_.kernel_size, config_.dropout, ids);
    in = enc[i];
  }
  pools_.assign(enc.size() - 1, nn::MaxPool1d(config_.pool_factor));

  heads_.resize(3);
  for (std::size_t h = 0; h < 3; ++h) {
    auto& head = heads_[h];
    std::size_t below = enc.back();
    for (std::size_t i = 0; i < config_.decoder_channels.size(); ++i) {
      const std::size_t skip = enc[enc.size() - 2 - i];
      head.up.emplace_back(config_.upsample_factor);
      head.blocks.emplace_back(std::string("gen.") + kHeadNames[h] + ".dec" + std::to_string(i), below + skip,
                               config_.decoder_channels[i], config_.kernel_size, config_.dropout, ids);
      head.in_skip_split.push_back(below);
      below = config_.decoder_channels[i];
    }
    head.out = nn::Conv1d(std::string("gen.") + kHeadNames[h] + ".out", below, config_.head_channels[h], 1);
  }

  std::mt19937_64 rng(seed);
  for (auto& b : encoder_) {
    b.init(rng);
    b.collect(registry_);
  }
  for (auto& head : heads_) {
    for (auto& b : head.blocks) {
      b.init(rng);
      b.collect(registry_);
    }
    head.out.init(rng);
    head.out.collect(registry_);
  }
}

std::size_t Generator::parameter_count() const { return count(registry_); }

Tensor Generator::forward(const Tensor& speech, const Tensor& noise, const nn::Context& ctx) {
  const std::size_t L = config_.clip_length;
  nn::require_shape(speech, L, speech_channels_, "generator speech input");
  if (noise.batch != speech.batch || noise.sample_size() != config_.noise_length)
    throw ShapeError("generator noise input: expected [" + std::to_string(speech.batch) + "x1x" +
                     std::to_string(config_.noise_length) + "], got " + noise.shape_str());

  Tensor z(noise.batch, L, config_.noise_channels);
  for (std::size_t b = 0; b < noise.batch; ++b)
    for (std::size_t c = 0; c < config_.noise_channels; ++c)
      for (std::size_t t = 0; t < L; ++t) z.at(b, t, c) = noise.sample(b)[c * L + t];

  std::vector<Tensor> acts;
  acts.push_back(encoder_[0].forward(nn::concat_channels(speech, z), ctx));
  for (std::size_t i = 1; i < encoder_.size(); ++i)
    acts.push_back(encoder_[i].forward(pools_[i - 1].forward(acts.back(), ctx), ctx));

  Tensor out(speech.batch, L, kBehaviorDim);
  std::size_t offset = 0;
  for (auto& head : heads_) {
    Tensor y = acts.back();
    for (std::size_t i = 0; i < head.blocks.size(); ++i) {
      const Tensor& skip = acts[acts.size() - 2 - i];
      y = head.blocks[i].forward(nn::concat_channels(head.up[i].forward(y, skip.len), skip), ctx);
    }
    const Tensor o = head.sigmoid.forward(head.out.forward(y));
    for (std::size_t r = 0; r < speech.batch * L; ++r)
      std::copy_n(o.data.data() + r * o.ch, o.ch, out.data.data() + r * kBehaviorDim + offset);
    offset += o.ch;
  }
  return out;
}

Tensor Generator::backward(const Tensor& dy) {
  const std::size_t L = config_.clip_length;
  nn::require_shape(dy, L, kBehaviorDim, "generator output gradient");
  const auto lens = config_.encoder_lengths();
  const auto& enc = config_.encoder_channels;
  std::vector<Tensor> dacts;
  for (std::size_t i = 0; i < enc.size(); ++i) dacts.emplace_back(dy.batch, lens[i], enc[i]);

  std::size_t offset = 0;
  for (std::size_t h = 0; h < heads_.size(); ++h) {
    auto& head = heads_[h];
    const std::size_t hc = config_.head_channels[h];
    Tensor dh(dy.batch, L, hc);
    for (std::size_t r = 0; r < dy.batch * L; ++r)
      std::copy_n(dy.data.data() + r * kBehaviorDim + offset, hc, dh.data.data() + r * hc);
    offset += hc;

    Tensor g = head.out.backward(head.sigmoid.backward(dh));
    for (std::size_t i = head.blocks.size(); i-- > 0;) {
      Tensor gc = head.blocks[i].backward(g);
      Tensor gu, gs;
      nn::split_channels(gc, head.in_skip_split[i], gu, gs);
      auto& dskip = dacts[dacts.size() - 2 - i];
      for (std::size_t k = 0; k < gs.size(); ++k) dskip.data[k] += gs.data[k];
      g = head.up[i].backward(gu);
    }
    for (std::size_t k = 0; k < g.size(); ++k) dacts.back().data[k] += g.data[k];
  }

  for (std::size_t i = encoder_.size(); i-- > 1;) {
    const Tensor gp = pools_[i - 1].backward(encoder_[i].backward(dacts[i]));
    for (std::size_t k = 0; k < gp.size(); ++k) dacts[i - 1].data[k] += gp.data[k];
  }
  const Tensor gin = encoder_[0].backward(dacts[0]);
  Tensor dspeech, dnoise;
  nn::split_channels(gin, speech_channels_, dspeech, dnoise);
  return dspeech;
}

// ---------------------------------------------------------- Discriminator

Discriminator::Discriminator(const ArchConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::uint64_t ids = 1000;
  const std::size_t e = config_.disc_embed_channels;
  speech_enc_ = nn::DoubleConv("disc.speech", kSpeechDim, e, config_.kernel_size, config_.dropout, ids);
  behavior_enc_ = nn::DoubleConv("disc.behavior", kBehaviorDim, e, config_.kernel_size, config_.dropout, ids);
  std::size_t in = 2 * e;
  std::size_t len = config_.clip_length;
  for (std::size_t i = 0; i < config_.disc_channels.size(); ++i) {
    blocks_.emplace_back("disc.block" + std::to_string(i), in, config_.disc_channels[i], config_.kernel_size,
                         config_.dropout, ids);
    in = config_.disc_channels[i];
    len /= config_.pool_factor;
  }
  pools_.assign(blocks_.size(), nn::MaxPool1d(config_.pool_factor));
  flat_len_ = len * in;
  head_ = nn::Linear("disc.linear", flat_len_, 1);

  std::mt19937_64 rng(seed);
  speech_enc_.init(rng);
  behavior_enc_.init(rng);
  for (auto& b : blocks_) b.init(rng);
  head_.init(rng);
  speech_enc_.collect(registry_);
  behavior_enc_.collect(registry_);
  for (auto& b : blocks_) b.collect(registry_);
  head_.collect(registry_);
}

std::size_t Discriminator::parameter_count() const { return count(registry_); }

Tensor Discriminator::forward(const Tensor& speech, const Tensor& behavior, const nn::Context& ctx) {
  nn::require_shape(speech, config_.clip_length, kSpeechDim, "discriminator speech input");
  nn::require_shape(behavior, config_.clip_length, kBehaviorDim, "discriminator behavior input");
  if (speech.batch != behavior.batch) throw ShapeError("discriminator: batch sizes differ");
  Tensor x = nn::concat_channels(speech_enc_.forward(speech, ctx), behavior_enc_.forward(behavior, ctx));
  for (std::size_t i = 0; i < blocks_.size(); ++i) x = pools_[i].forward(blocks_[i].forward(x, ctx), ctx);
  Tensor y = head_.forward(x);
  return config_.disc_sigmoid ? sigmoid_.forward(y) : y;
}

std::pair<Tensor, Tensor> Discriminator::backward(const Tensor& dy) {
  Tensor g = head_.backward(config_.disc_sigmoid ? sigmoid_.backward(dy) : dy);
  const std::size_t last_len = flat_len_ / config_.disc_channels.back();
  g.len = last_len;
  g.ch = config_.disc_channels.back();
  for (std::size_t i = blocks_.size(); i-- > 0;) g = blocks_[i].backward(pools_[i].backward(g));
  Tensor gs, gb;
  nn::split_channels(g, config_.disc_embed_channels, gs, gb);
  return {speech_enc_.backward(gs), behavior_enc_.backward(gb)};
}

// ------------------------------------------------------------ checkpoints

std::vector<double> export_state(const nn::ParamRegistry& r) {
  std::vector<double> s;
  for (auto* p : r.params) s.insert(s.end(), p->value.begin(), p->value.end());
  for (auto* b : r.buffers) s.insert(s.end(), b->begin(), b->end());
  return s;
}

void import_state(nn::ParamRegistry& r, const std::vector<double>& state) {
  std::size_t need = 0;
  for (auto* p : r.params) need += p->value.size();
  for (auto* b : r.buffers) need += b->size();
  if (need != state.size())
    throw DataError("checkpoint holds " + std::to_string(state.size()) + " values, network expects " +
                    std::to_string(need));
  std::size_t o = 0;
  for (auto* p : r.params) {
    std::copy_n(state.begin() + static_cast<std::ptrdiff_t>(o), p->value.size(), p->value.begin());
    o += p->value.size();
  }
  for (auto* b : r.buffers) {
    std::copy_n(state.begin() + static_cast<std::ptrdiff_t>(o), b->size(), b->begin());
    o += b->size();
  }
}

namespace {
constexpr char kMagic[8] = {'F', 'S', 'Y', 'N', 'C', 'K', 'P', 'T'};

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is, const std::string& what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw DataError("checkpoint truncated reading " + what);
  return v;
}

void put_block(std::ostream& os, const std::vector<double>& v) {
  put<std::uint64_t>(os, v.size());
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> get_block(std::istream& is, const std::string& what) {
  const auto n = get<std::uint64_t>(is, what);
  if (n > (1ull << 34)) throw DataError("checkpoint: implausible block size for " + what);
  std::vector<double> v(n);
  if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double))))
    throw DataError("checkpoint truncated reading " + what);
  return v;
}
}  // namespace

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
  static_assert(std::endian::native == std::endian::little, "checkpoint format is little-endian");
  std::ostringstream stats;
  write_norm_stats(stats, data.stats);
  nlohmann::json header;
  header["arch"] = data.arch;
  header["norm_stats"] = stats.str();
  header["step"] = data.step;
  const std::string h = header.dump();

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw DataError("cannot write " + tmp.string());
    os.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(os, kCheckpointVersion);
    put<std::uint64_t>(os, h.size());
    os.write(h.data(), static_cast<std::streamsize>(h.size()));
    put_block(os, data.generator_state);
    put_block(os, data.discriminator_state);
    if (!os) throw DataError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError(path.string() + " is not a facesync checkpoint");
  const auto version = get<std::uint32_t>(is, "version");
  if (version != kCheckpointVersion)
    throw DataError("checkpoint version " + std::to_string(version) + " is not supported");
  const auto hlen = get<std::uint64_t>(is, "header length");
  std::string h(hlen, '\0');
  if (!is.read(h.data(), static_cast<std::streamsize>(hlen))) throw DataError("checkpoint truncated reading header");
  CheckpointData d;
  try {
    const auto header = nlohmann::json::parse(h);
    d.arch = header.at("arch").get<ArchConfig>();
    std::istringstream ss(header.at("norm_stats").get<std::string>());
    d.stats = read_norm_stats(ss);
    d.step = header.at("step").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint header: " + std::string(e.what()));
  }
  d.generator_state = get_block(is, "generator parameters");
  d.discriminator_state = get_block(is, "discriminator parameters");
  return d;
}

}  // namespace facesync
