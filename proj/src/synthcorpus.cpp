#include "facesync/synthcorpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "facesync/csv.hpp"

namespace facesync {
namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

struct Ar1 {
  double state = 0.0;
  double rho = 0.95;
  double step(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    state = rho * state + std::sqrt(1.0 - rho * rho) * n(rng);
    return state;
  }
};

// Smooth pitch and energy contours shared by the speech and behavior streams.
struct Prosody {
  double f1, f2, f3, p1, p2, p3;
  double pitch(double tau) const {
    const double two_pi = 2.0 * std::numbers::pi;
    return std::sin(two_pi * f1 * tau + p1) + 0.5 * std::sin(two_pi * f2 * tau + p2);
  }
  double energy(double tau) const {
    return 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * f3 * tau + p3);
  }
};

// Raised-cosine fade over the first and last frames of each turn keeps the
// onset from looking like a tracking jump.
double fade(std::size_t k, std::size_t start, std::size_t end) {
  constexpr std::size_t kFade = 5;
  const std::size_t in = k - start, out = end - 1 - k;
  const std::size_t d = std::min(in, out);
  if (d >= kFade) return 1.0;
  return 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(d + 1) / (kFade + 1));
}

}  // namespace

void SynthConfig::validate() const {
  if (n_tracks == 0) throw Error("synth: n_tracks must be positive");
  if (!(duration_s > 0)) throw Error("synth: duration_s must be positive");
  if (!(turn_length_s > 0)) throw Error("synth: turn_length_s must be positive");
  if (!(coupling_gain > 0)) throw Error("synth: coupling_gain must be positive");
  if (!(expressiveness >= 0.0 && expressiveness <= 1.0))
    throw Error("synth: expressiveness must be in [0, 1]");
}

SpeechTrack SynthTrack::speech() const {
  auto t = speech_track(speech50, turns);
  t.source_id = source_id;
  t.role = role;
  return t;
}

BehaviorTrack SynthTrack::behavior() const {
  auto t = behavior_track(behavior25);
  t.source_id = source_id;
  t.role = role;
  return t;
}

std::vector<SynthTrack> generate_corpus(const SynthConfig& config) {
  config.validate();
  const auto n_frames = static_cast<std::size_t>(std::llround(config.duration_s * kFrameRate));
  const double expr = config.expressiveness;
  std::vector<SynthTrack> tracks;

  const std::size_t n_interactions = (config.n_tracks + 1) / 2;
  for (std::size_t ia = 0; ia < n_interactions; ++ia) {
    std::mt19937_64 turn_rng(splitmix(config.seed * 1000003ull + ia));
    std::uniform_real_distribution<double> turn_len(0.5 * config.turn_length_s, 1.5 * config.turn_length_s);
    // Turn boundaries in whole frames; even turns belong to the starting speaker.
    std::vector<std::pair<std::size_t, std::size_t>> turns;
    for (std::size_t k = 0; k < n_frames;) {
      const auto len = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(turn_len(turn_rng) * kFrameRate)));
      turns.emplace_back(k, std::min(n_frames, k + len));
      k += len;
    }
    const std::size_t starter = std::bernoulli_distribution(0.5)(turn_rng) ? 1 : 0;
    const std::string interaction = config.corpus + "_int" + std::to_string(ia);

    for (std::size_t person = 0; person < 2 && tracks.size() < config.n_tracks; ++person) {
      std::mt19937_64 rng(splitmix(splitmix(config.seed) ^ (2 * ia + person)));
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::normal_distribution<double> noise(0.0, kSynthNoise);
      const Prosody pr{0.3 + 0.5 * u(rng), 1.0 + 1.0 * u(rng), 0.5 + 1.0 * u(rng),
                       2 * std::numbers::pi * u(rng), 2 * std::numbers::pi * u(rng),
                       2 * std::numbers::pi * u(rng)};

      SynthTrack tr;
      tr.interaction = interaction;
      tr.role = person == 0 ? SpeakerRole::first_person : SpeakerRole::second_person;
      tr.source_id = interaction + (person == 0 ? "_p1" : "_p2");

      std::vector<int> turn_of(n_frames, -1);  // turn index if speaking
      for (std::size_t ti = 0; ti < turns.size(); ++ti) {
        if ((ti + starter) % 2 != person) continue;
        const auto [a, b] = turns[ti];
        tr.turns.push_back({static_cast<double>(a) / kFrameRate, static_cast<double>(b) / kFrameRate});
        for (std::size_t k = a; k < b; ++k) turn_of[k] = static_cast<int>(ti);
      }

      // Acoustic stream at 50 fps.
      std::array<Ar1, kSpeechBaseDim> sp_ar;
      // Latent speech contours per 25 fps frame (mean of the two 50 fps
      // samples); the behavior channels are driven from these.
      std::vector<std::array<double, kSpeechBaseDim>> latent(n_frames);
      tr.speech50.resize(2 * n_frames);
      for (std::size_t s = 0; s < 2 * n_frames; ++s) {
        const double tau = static_cast<double>(s) / (2.0 * kFrameRate);
        const bool speaking = turn_of[s / 2] >= 0;
        auto& row = tr.speech50[s];
        row.timestamp = tau;
        for (std::size_t i = 0; i < kSpeechBaseDim; ++i) latent[s / 2][i] += 0.5 * sp_ar[i].step(rng);
        if (speaking) {
          row.features = {0.4 * sp_ar[0].state - 8.0,        // alphaRatio
                          0.4 * sp_ar[1].state + 15.0,       // hammarbergIndex
                          20.0 * pr.energy(tau),             // mfcc1 (energy proxy)
                          2.0 * sp_ar[3].state,              // mfcc2
                          2.0 * sp_ar[4].state,              // mfcc3
                          30.0 + 4.0 * pr.pitch(tau),        // F0 semitones
                          0.5 * sp_ar[6].state};             // logRelF0-H1-H2
        } else {
          row.features.fill(0.0);
        }
        for (auto& v : row.features) v += noise(rng);
      }

      // Behavior stream at 25 fps.
      tr.behavior25.resize(n_frames);
      for (std::size_t k = 0; k < n_frames; ++k) {
        auto& row = tr.behavior25[k];
        row.timestamp = static_cast<double>(k) / kFrameRate;
        row.confidence = 0.98;
        row.success = true;
        const int ti = turn_of[k];
        if (ti < 0) continue;  // listening: neutral zero pose
        const double env = fade(k, turns[ti].first, turns[ti].second);
        const double tau = static_cast<double>(k) / kFrameRate;
        const double lagged = static_cast<double>(k) - static_cast<double>(kSynthLag);
        auto& f = row.features;
        const auto& lat = latent[k >= kSynthLag ? k - kSynthLag : 0];
        const double head_pitch = std::clamp(config.coupling_gain * 0.25 * pr.pitch(lagged / kFrameRate), -0.5, 0.5);
        const double head_yaw = 0.15 * lat[3];
        f[kHeadOffset + 0] = head_pitch;
        f[kHeadOffset + 1] = head_yaw;
        f[kHeadOffset + 2] = 0.05 * lat[4];
        f[6] = 0.5 * head_yaw + 0.05 * lat[0];    // gaze angle x
        f[7] = 0.5 * head_pitch + 0.05 * lat[1];  // gaze angle y
        for (std::size_t e = 0; e < 2; ++e) {
          f[3 * e + 0] = std::sin(f[6]);
          f[3 * e + 1] = std::sin(f[7]);
          f[3 * e + 2] = 0.02 * lat[6];
        }
        // Each AU mixes two latent contours with fixed weights.
        for (std::size_t a = 0; a < kAuDim; ++a) {
          const double w = static_cast<double>(a) * 0.37;
          f[kAuOffset + a] = 0.4 + 0.3 * (std::cos(w) * lat[a % kSpeechBaseDim] + std::sin(w) * lat[(a + 3) % kSpeechBaseDim]);
        }
        f[kAu12Channel] = 1.0 + 3.0 * pr.energy(tau);
        for (std::size_t c = 0; c < kBehaviorDim; ++c) {
          double v = expr * env * (f[c] + noise(rng));
          if (c >= kAuOffset) v = std::clamp(v, 0.0, 5.0);
          if (c >= kHeadOffset && c < kAuOffset) v = std::clamp(v, -0.5, 0.5);
          f[c] = v;
        }
      }
      tracks.push_back(std::move(tr));
    }
  }
  return tracks;
}

void write_corpus(const std::filesystem::path& dir, const SynthConfig& config,
                  const std::vector<SynthTrack>& tracks) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest) throw DataError("cannot write " + (dir / "manifest.csv").string());
  manifest << "source_id,interaction,corpus,role\n";
  for (const auto& t : tracks) {
    manifest << t.source_id << ',' << t.interaction << ',' << config.corpus << ',' << to_string(t.role) << '\n';
    std::ofstream of(dir / (t.source_id + ".openface.csv"));
    write_openface_csv(of, t.behavior25);
    std::ofstream os(dir / (t.source_id + ".egemaps.csv"));
    write_opensmile_csv(os, t.speech50);
    std::ofstream ot(dir / (t.source_id + ".turns.csv"));
    write_turns(ot, t.turns);
    if (!of || !os || !ot) throw DataError("failed writing track " + t.source_id);
  }
}

std::vector<CorpusEntry> read_corpus_manifest(const std::filesystem::path& dir) {
  const auto table = CsvTable::read_file(dir / "manifest.csv");
  const auto c_src = table.column("source_id"), c_int = table.column("interaction"),
             c_corpus = table.column("corpus"), c_role = table.column("role");
  std::vector<CorpusEntry> out;
  for (std::size_t r = 0; r < table.rows(); ++r)
    out.push_back({table.cell(r, c_src), table.cell(r, c_int), table.cell(r, c_corpus),
                   parse_role(table.cell(r, c_role))});
  return out;
}

}  // namespace facesync
