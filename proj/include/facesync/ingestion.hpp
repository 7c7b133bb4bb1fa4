#pragma once

// Readers for face-tracker (OpenFace) and acoustic (openSMILE eGeMAPS) CSV
// exports, derivative features, 50 -> 25 fps alignment and the speaking flag.

#include <array>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "facesync/domain.hpp"

namespace facesync {

inline constexpr std::size_t kSpeechDerivedDim = 3 * kSpeechBaseDim;  // 21
using SpeechVec = std::array<double, kSpeechDerivedDim>;

struct RawBehaviorRow {
  double timestamp = 0.0;
  double confidence = 0.0;
  bool success = false;
  BehaviorFrame features;
};

struct RawSpeechRow {
  double timestamp = 0.0;
  std::array<double, kSpeechBaseDim> features{};
};

/// Half-open speaking interval [start, end) in seconds.
struct TurnInterval {
  double start = 0.0;
  double end = 0.0;
};

// Columns are looked up by name; column order in the file is irrelevant.
std::vector<RawBehaviorRow> parse_openface_csv(std::istream& is, const std::string& name);
std::vector<RawBehaviorRow> parse_openface_csv(const std::filesystem::path& path);
std::vector<RawSpeechRow> parse_opensmile_csv(std::istream& is, const std::string& name);
std::vector<RawSpeechRow> parse_opensmile_csv(const std::filesystem::path& path);

/// Appends central-difference first and second derivatives (one-sided at
/// the ends). Needs at least 3 rows.
std::vector<SpeechVec> add_derivatives(std::span<const RawSpeechRow> rows);

/// Averages consecutive row pairs; a trailing unpaired row is dropped.
std::vector<SpeechVec> downsample_speech(std::span<const SpeechVec> rows);

/// Frame k (timestamp k / frame_rate) is flagged 1 iff it lies in a turn.
/// Overlapping turns are rejected.
SpeechTrack attach_speaking_flag(std::span<const SpeechVec> speech,
                                 std::span<const TurnInterval> turns,
                                 double frame_rate = kFrameRate);

BehaviorTrack behavior_track(std::span<const RawBehaviorRow> rows);

/// Full acoustic path: derivatives at 50 fps, pairwise averaging to 25 fps,
/// speaking flag.
SpeechTrack speech_track(std::span<const RawSpeechRow> rows50, std::span<const TurnInterval> turns);

/// Truncates the longer track so both have the same number of frames.
void align_lengths(SpeechTrack& speech, BehaviorTrack& behavior);
void align_lengths(SpeechTrack& speech, std::vector<RawBehaviorRow>& behavior);

std::vector<TurnInterval> read_turns(std::istream& is, const std::string& name);
std::vector<TurnInterval> read_turns(const std::filesystem::path& path);
void write_turns(std::ostream& os, std::span<const TurnInterval> turns);

// Canonical 25 fps re-export: "frame,timestamp,<feature names...>".
void write_behavior_csv(std::ostream& os, const BehaviorTrack& track);
void write_speech_csv(std::ostream& os, const SpeechTrack& track);
void write_behavior_csv(const std::filesystem::path& path, const BehaviorTrack& track);
void write_speech_csv(const std::filesystem::path& path, const SpeechTrack& track);
BehaviorTrack read_behavior_csv(const std::filesystem::path& path);
SpeechTrack read_speech_csv(const std::filesystem::path& path);
BehaviorTrack read_behavior_csv(std::istream& is, const std::string& name);
SpeechTrack read_speech_csv(std::istream& is, const std::string& name);

// Writers for the raw extractor formats, used by the synthetic corpus so its
// output travels the same path as real extractor exports.
void write_openface_csv(std::ostream& os, std::span<const RawBehaviorRow> rows);
void write_opensmile_csv(std::ostream& os, std::span<const RawSpeechRow> rows);

}  // namespace facesync
