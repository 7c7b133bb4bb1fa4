#pragma once

// Seeded generator of paired speech/behavior recordings with a known
// audio-to-motion coupling: head pitch follows the pitch contour two frames
// late and AU12 follows an energy envelope. Output uses the raw extractor
// formats so it exercises the same ingestion path as real data.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "facesync/domain.hpp"
#include "facesync/ingestion.hpp"

namespace facesync {

inline constexpr std::size_t kSynthLag = 2;         // frames
inline constexpr double kSynthNoise = 0.01;         // noise floor std
inline constexpr std::size_t kPitchChannel = 5;     // F0semitoneFrom27.5Hz
inline constexpr std::size_t kEnergyChannel = 2;    // mfcc1
inline constexpr std::size_t kHeadPitchChannel = kHeadOffset;  // pose_Rx
inline constexpr std::size_t kAu12Channel = kAuOffset + 8;

struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t n_tracks = 10;
  double duration_s = 60.0;
  double turn_length_s = 6.0;
  double coupling_gain = 1.0;
  double expressiveness = 1.0;
  std::string corpus = "synth";

  void validate() const;
};

struct SynthTrack {
  std::string source_id;
  std::string interaction;
  SpeakerRole role = SpeakerRole::first_person;
  std::vector<TurnInterval> turns;
  std::vector<RawSpeechRow> speech50;
  std::vector<RawBehaviorRow> behavior25;

  /// 22-channel track built through the ingestion path.
  SpeechTrack speech() const;
  BehaviorTrack behavior() const;
};

/// Tracks come in interaction pairs with complementary turn schedules
/// (one person speaks while the other listens).
std::vector<SynthTrack> generate_corpus(const SynthConfig& config);

struct CorpusEntry {
  std::string source_id;
  std::string interaction;
  std::string corpus;
  SpeakerRole role = SpeakerRole::first_person;
};

/// Writes <id>.openface.csv, <id>.egemaps.csv, <id>.turns.csv and manifest.csv.
void write_corpus(const std::filesystem::path& dir, const SynthConfig& config,
                  const std::vector<SynthTrack>& tracks);
std::vector<CorpusEntry> read_corpus_manifest(const std::filesystem::path& dir);

}  // namespace facesync
