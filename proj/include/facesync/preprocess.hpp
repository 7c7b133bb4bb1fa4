#pragma once

// Behavior cleaning pipeline (outliers -> bridging -> median smoothing ->
// centering -> listening clamp) and segmentation into fixed-length clips.

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "facesync/domain.hpp"
#include "facesync/ingestion.hpp"

namespace facesync {

struct OutlierPolicy {
  double min_confidence = 0.8;
  double max_rotation_jump = 0.3;  // radians per frame, any head axis
  bool require_success = true;

  void validate() const;
};

inline constexpr std::size_t kClipFrames = 100;  // 4 s at 25 fps

struct ClipPair {
  std::vector<SpeechFrame> speech;
  std::vector<BehaviorFrame> behavior;
  std::string source_id;
  std::size_t start_frame = 0;
};

/// Indices (ascending) of frames that failed tracking, have low confidence,
/// or jump in head rotation relative to the previous kept frame.
std::vector<std::size_t> detect_outliers(std::span<const RawBehaviorRow> rows,
                                         const OutlierPolicy& policy);

/// Linear interpolation across removed frames; gaps at either end take the
/// nearest kept frame.
template <class Frame>
Track<Frame> bridge_transitions(const Track<Frame>& track, std::span<const std::size_t> removed);

/// Sliding median per channel, truncated window at the edges (even-sized
/// windows average the two middle values).
template <class Frame>
Track<Frame> median_smooth(const Track<Frame>& track, std::size_t window = 7);

/// Subtracts the per-track median from head rotation, gaze angle and both
/// gaze direction vectors. AUs are untouched.
BehaviorTrack center_track(const BehaviorTrack& track);

/// Zeroes every behavior channel on frames whose speaking flag is 0.
BehaviorTrack clamp_listening(const BehaviorTrack& behavior, const SpeechTrack& speech);

/// Consecutive windows of `length` frames advanced by `stride` (defaults to
/// `length`, i.e. no overlap). A trailing partial window is dropped.
std::vector<ClipPair> segment(const SpeechTrack& speech, const BehaviorTrack& behavior,
                              std::size_t length = kClipFrames, std::size_t stride = 0);

struct PreprocessOptions {
  OutlierPolicy outliers;
  bool remove_outliers = true;
  bool smooth = true;
  std::size_t median_window = 7;
  bool center = true;
  bool clamp = true;
  std::size_t segment_length = kClipFrames;
  std::size_t segment_stride = kClipFrames;
};

/// Runs the fixed stage order on one aligned pair (equal lengths required).
/// Returns the cleaned behavior track.
BehaviorTrack clean_behavior(std::span<const RawBehaviorRow> rows, const SpeechTrack& speech,
                             const PreprocessOptions& options);

/// Interaction-level train/test split: both roles of an interaction always
/// land in the same subset. Returns interaction -> "train" | "test".
std::map<std::string, std::string> split_interactions(std::vector<std::string> interactions,
                                                      double test_fraction, unsigned long long seed);

// On-disk clip store: manifest.csv, norm_stats.txt and clips/<id>.{speech,behavior}.csv.
struct ClipRecord {
  std::string clip_id;
  std::string source_id;
  std::string interaction;
  std::string corpus;
  std::string split;
  SpeakerRole role = SpeakerRole::first_person;
  ClipPair clip;
};

struct ClipStore {
  std::vector<ClipRecord> clips;
  NormStats stats;

  std::vector<const ClipRecord*> select(std::string_view split) const;
};

void write_clip_store(const std::filesystem::path& dir, const ClipStore& store);
ClipStore read_clip_store(const std::filesystem::path& dir);

}  // namespace facesync
