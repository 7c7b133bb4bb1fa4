#pragma once

// Feature vocabulary shared by every stage: the 28 behavior channels produced
// by the face tracker, the 22 acoustic channels, track containers and the
// min-max normalization that maps both into [0, 1].

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "facesync/error.hpp"

namespace facesync {

inline constexpr std::size_t kBehaviorDim = 28;
inline constexpr std::size_t kSpeechDim = 22;
inline constexpr std::size_t kSpeechBaseDim = 7;
inline constexpr double kFrameRate = 25.0;

// Behavior channel layout: [gaze_0 xyz | gaze_1 xyz | gaze angle xy | head rot xyz | 17 AUs]
inline constexpr std::size_t kGazeOffset = 0;
inline constexpr std::size_t kGazeDim = 8;
inline constexpr std::size_t kHeadOffset = 8;
inline constexpr std::size_t kHeadDim = 3;
inline constexpr std::size_t kAuOffset = 11;
inline constexpr std::size_t kAuDim = 17;
inline constexpr std::size_t kSpeakingIndex = 21;

/// OpenFace column names, in channel order.
const std::array<std::string_view, kBehaviorDim>& behavior_feature_names();
/// eGeMAPS base names of the 7 retained descriptors, in channel order.
const std::array<std::string_view, kSpeechBaseDim>& speech_base_names();
/// Names of all 22 speech channels (base, first and second derivatives, flag).
const std::array<std::string, kSpeechDim>& speech_feature_names();

template <std::size_t N>
class FeatureFrame {
 public:
  static constexpr std::size_t kDim = N;

  FeatureFrame() { values_.fill(0.0); }
  explicit FeatureFrame(const std::array<double, N>& v) : values_(v) {}

  /// Rejects any span whose length is not exactly N.
  static FeatureFrame from(std::span<const double> v) {
    if (v.size() != N)
      throw ShapeError("frame needs " + std::to_string(N) + " values, got " +
                       std::to_string(v.size()));
    FeatureFrame f;
    for (std::size_t i = 0; i < N; ++i) f.values_[i] = v[i];
    return f;
  }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  std::span<const double, N> values() const { return values_; }
  std::span<double, N> values() { return values_; }

  bool operator==(const FeatureFrame&) const = default;

 protected:
  std::array<double, N> values_;
};

class BehaviorFrame : public FeatureFrame<kBehaviorDim> {
 public:
  using FeatureFrame::FeatureFrame;
  BehaviorFrame(const FeatureFrame<kBehaviorDim>& f) : FeatureFrame(f) {}  // NOLINT

  std::span<const double> gaze_dir_left() const { return values().subspan(0, 3); }
  std::span<const double> gaze_dir_right() const { return values().subspan(3, 3); }
  std::span<const double> gaze_angle() const { return values().subspan(6, 2); }
  std::span<const double> head_rotation() const { return values().subspan(kHeadOffset, kHeadDim); }
  std::span<const double> aus() const { return values().subspan(kAuOffset, kAuDim); }
};

class SpeechFrame : public FeatureFrame<kSpeechDim> {
 public:
  using FeatureFrame::FeatureFrame;
  SpeechFrame(const FeatureFrame<kSpeechDim>& f) : FeatureFrame(f) {}  // NOLINT

  std::span<const double> base() const { return values().subspan(0, 7); }
  std::span<const double> delta() const { return values().subspan(7, 7); }
  std::span<const double> delta2() const { return values().subspan(14, 7); }
  bool speaking() const { return values_[kSpeakingIndex] >= 0.5; }
};

enum class SpeakerRole { first_person, second_person };

std::string_view to_string(SpeakerRole r);
SpeakerRole parse_role(std::string_view s);

template <class Frame>
struct Track {
  std::vector<Frame> frames;
  double frame_rate = kFrameRate;
  std::string source_id;
  SpeakerRole role = SpeakerRole::first_person;

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }
  /// Copy with the same metadata and no frames.
  Track like() const { return Track{{}, frame_rate, source_id, role}; }
};

using BehaviorTrack = Track<BehaviorFrame>;
using SpeechTrack = Track<SpeechFrame>;

/// Per-feature extrema of the training split for all 28 + 22 channels.
struct NormStats {
  std::array<double, kBehaviorDim> behavior_min{}, behavior_max{};
  std::array<double, kSpeechDim> speech_min{}, speech_max{};

  bool operator==(const NormStats&) const = default;
};

/// Exact extrema over all frames. Throws DataError on empty input or a
/// non-finite value (the message names the track and frame).
NormStats compute_norm_stats(std::span<const SpeechTrack> speech,
                             std::span<const BehaviorTrack> behavior);

/// (x - min) / (max - min), clamped into [0, 1]; degenerate channels map to 0.
BehaviorTrack normalize(const BehaviorTrack& track, const NormStats& stats);
SpeechTrack normalize(const SpeechTrack& track, const NormStats& stats);

/// Inverse of normalize. Values more than 1e-6 outside [0, 1] are logged and
/// clamped; degenerate channels map to min.
BehaviorTrack denormalize(const BehaviorTrack& track, const NormStats& stats);
SpeechTrack denormalize(const SpeechTrack& track, const NormStats& stats);

// Scalar forms used by the batch paths in training and generation.
double normalize_value(double x, double lo, double hi);
double denormalize_value(double y, double lo, double hi);

/// Text table: one "name min max" line per feature, behavior channels first.
/// Values are written with round-trip precision.
void write_norm_stats(std::ostream& os, const NormStats& stats);
NormStats read_norm_stats(std::istream& is);
void save_norm_stats(const std::string& path, const NormStats& stats);
NormStats load_norm_stats(const std::string& path);

}  // namespace facesync
