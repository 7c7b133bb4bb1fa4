#include "facesync/domain.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

namespace facesync {

const std::array<std::string_view, kBehaviorDim>& behavior_feature_names() {
  static constexpr std::array<std::string_view, kBehaviorDim> names{
      "gaze_0_x", "gaze_0_y", "gaze_0_z", "gaze_1_x", "gaze_1_y", "gaze_1_z",
      "gaze_angle_x", "gaze_angle_y", "pose_Rx", "pose_Ry", "pose_Rz",
      "AU01_r", "AU02_r", "AU04_r", "AU05_r", "AU06_r", "AU07_r", "AU09_r",
      "AU10_r", "AU12_r", "AU14_r", "AU15_r", "AU17_r", "AU20_r", "AU23_r",
      "AU25_r", "AU26_r", "AU45_r"};
  return names;
}

const std::array<std::string_view, kSpeechBaseDim>& speech_base_names() {
  static constexpr std::array<std::string_view, kSpeechBaseDim> names{
      "alphaRatio", "hammarbergIndex", "mfcc1", "mfcc2", "mfcc3",
      "F0semitoneFrom27.5Hz", "logRelF0-H1-H2"};
  return names;
}

const std::array<std::string, kSpeechDim>& speech_feature_names() {
  static const std::array<std::string, kSpeechDim> names = [] {
    std::array<std::string, kSpeechDim> n;
    const auto& base = speech_base_names();
    for (std::size_t i = 0; i < kSpeechBaseDim; ++i) {
      n[i] = std::string(base[i]);
      n[kSpeechBaseDim + i] = std::string(base[i]) + "_d1";
      n[2 * kSpeechBaseDim + i] = std::string(base[i]) + "_d2";
    }
    n[kSpeakingIndex] = "speaking";
    return n;
  }();
  return names;
}

std::string_view to_string(SpeakerRole r) {
  return r == SpeakerRole::first_person ? "first_person" : "second_person";
}

SpeakerRole parse_role(std::string_view s) {
  if (s == "first_person") return SpeakerRole::first_person;
  if (s == "second_person") return SpeakerRole::second_person;
  throw DataError("unknown speaker role '" + std::string(s) + "'");
}

namespace {

template <class Frame, std::size_t N>
void scan(std::span<const Track<Frame>> tracks, std::array<double, N>& lo,
          std::array<double, N>& hi) {
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());
  for (const auto& track : tracks) {
    for (std::size_t t = 0; t < track.frames.size(); ++t) {
      const auto& f = track.frames[t];
      for (std::size_t i = 0; i < N; ++i) {
        const double x = f[i];
        if (!std::isfinite(x))
          throw DataError("non-finite value in track '" + track.source_id + "' at frame " +
                          std::to_string(t) + ", feature " + std::to_string(i));
        lo[i] = std::min(lo[i], x);
        hi[i] = std::max(hi[i], x);
      }
    }
  }
}

template <class Frame, std::size_t N>
Track<Frame> map_track(const Track<Frame>& track, const std::array<double, N>& lo,
                       const std::array<double, N>& hi, double (*fn)(double, double, double)) {
  Track<Frame> out = track.like();
  out.frames.reserve(track.frames.size());
  for (const auto& f : track.frames) {
    Frame g;
    for (std::size_t i = 0; i < N; ++i) g[i] = fn(f[i], lo[i], hi[i]);
    out.frames.push_back(g);
  }
  return out;
}

}  // namespace

NormStats compute_norm_stats(std::span<const SpeechTrack> speech,
                             std::span<const BehaviorTrack> behavior) {
  auto frames = [](auto tracks) {
    std::size_t n = 0;
    for (const auto& t : tracks) n += t.frames.size();
    return n;
  };
  if (frames(speech) == 0 || frames(behavior) == 0) throw DataError("no training data");
  NormStats s;
  scan(speech, s.speech_min, s.speech_max);
  scan(behavior, s.behavior_min, s.behavior_max);
  return s;
}

double normalize_value(double x, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  return std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
}

double denormalize_value(double y, double lo, double hi) {
  if (y < -1e-6 || y > 1.0 + 1e-6)
    spdlog::warn("denormalize: value {} outside [0, 1], clamping", y);
  if (!(hi > lo)) return lo;
  return lo + std::clamp(y, 0.0, 1.0) * (hi - lo);
}

BehaviorTrack normalize(const BehaviorTrack& track, const NormStats& stats) {
  return map_track(track, stats.behavior_min, stats.behavior_max, &normalize_value);
}

SpeechTrack normalize(const SpeechTrack& track, const NormStats& stats) {
  return map_track(track, stats.speech_min, stats.speech_max, &normalize_value);
}

BehaviorTrack denormalize(const BehaviorTrack& track, const NormStats& stats) {
  return map_track(track, stats.behavior_min, stats.behavior_max, &denormalize_value);
}

SpeechTrack denormalize(const SpeechTrack& track, const NormStats& stats) {
  return map_track(track, stats.speech_min, stats.speech_max, &denormalize_value);
}

void write_norm_stats(std::ostream& os, const NormStats& stats) {
  os << std::setprecision(17);
  const auto& bn = behavior_feature_names();
  for (std::size_t i = 0; i < kBehaviorDim; ++i)
    os << bn[i] << ' ' << stats.behavior_min[i] << ' ' << stats.behavior_max[i] << '\n';
  const auto& sn = speech_feature_names();
  for (std::size_t i = 0; i < kSpeechDim; ++i)
    os << sn[i] << ' ' << stats.speech_min[i] << ' ' << stats.speech_max[i] << '\n';
}

NormStats read_norm_stats(std::istream& is) {
  std::map<std::string, std::pair<double, double>, std::less<>> table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name;
    double lo = 0, hi = 0;
    if (!(ls >> name >> lo >> hi))
      throw DataError("norm stats: malformed line " + std::to_string(lineno));
    if (hi < lo) throw DataError("norm stats: max < min for " + name);
    table[name] = {lo, hi};
  }
  auto get = [&](std::string_view name) {
    auto it = table.find(name);
    if (it == table.end()) throw DataError("norm stats: missing feature " + std::string(name));
    return it->second;
  };
  NormStats s;
  const auto& bn = behavior_feature_names();
  for (std::size_t i = 0; i < kBehaviorDim; ++i)
    std::tie(s.behavior_min[i], s.behavior_max[i]) = get(bn[i]);
  const auto& sn = speech_feature_names();
  for (std::size_t i = 0; i < kSpeechDim; ++i)
    std::tie(s.speech_min[i], s.speech_max[i]) = get(sn[i]);
  return s;
}

void save_norm_stats(const std::string& path, const NormStats& stats) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path);
  write_norm_stats(os, stats);
}

NormStats load_norm_stats(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read " + path);
  return read_norm_stats(is);
}

}  // namespace facesync
