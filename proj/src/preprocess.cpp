#include "facesync/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>

#include "facesync/csv.hpp"

namespace facesync {
namespace {

double median_of(std::vector<double>& v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lower + upper) / 2.0;
}

}  // namespace

void OutlierPolicy::validate() const {
  if (!(min_confidence > 0.0 && min_confidence <= 1.0))
    throw Error("outlier policy: min_confidence must be in (0, 1]");
  if (!(max_rotation_jump > 0.0)) throw Error("outlier policy: max_rotation_jump must be positive");
}

std::vector<std::size_t> detect_outliers(std::span<const RawBehaviorRow> rows,
                                         const OutlierPolicy& policy) {
  std::vector<std::size_t> out;
  const RawBehaviorRow* last_kept = nullptr;
  for (std::size_t t = 0; t < rows.size(); ++t) {
    const auto& r = rows[t];
    bool bad = (policy.require_success && !r.success) || r.confidence < policy.min_confidence;
    if (!bad && last_kept) {
      for (std::size_t a = 0; a < kHeadDim; ++a) {
        const double jump = std::abs(r.features[kHeadOffset + a] - last_kept->features[kHeadOffset + a]);
        if (jump > policy.max_rotation_jump) bad = true;
      }
    }
    if (bad)
      out.push_back(t);
    else
      last_kept = &r;
  }
  return out;
}

template <class Frame>
Track<Frame> bridge_transitions(const Track<Frame>& track, std::span<const std::size_t> removed) {
  const std::size_t n = track.size();
  std::vector<bool> gone(n, false);
  for (auto i : removed) {
    if (i >= n) throw Error("bridge_transitions: index " + std::to_string(i) + " out of range");
    gone[i] = true;
  }
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < n; ++i)
    if (!gone[i]) kept.push_back(i);
  if (kept.empty()) throw DataError("track unusable");

  Track<Frame> out = track;
  std::size_t next = 0;  // index into kept of the first kept frame >= t
  for (std::size_t t = 0; t < n; ++t) {
    while (next < kept.size() && kept[next] < t) ++next;
    if (!gone[t]) continue;
    if (next == 0) {
      out.frames[t] = track.frames[kept.front()];
    } else if (next == kept.size()) {
      out.frames[t] = track.frames[kept.back()];
    } else {
      const std::size_t lo = kept[next - 1], hi = kept[next];
      const double w = static_cast<double>(t - lo) / static_cast<double>(hi - lo);
      for (std::size_t f = 0; f < Frame::kDim; ++f)
        out.frames[t][f] = (1.0 - w) * track.frames[lo][f] + w * track.frames[hi][f];
    }
  }
  return out;
}

template <class Frame>
Track<Frame> median_smooth(const Track<Frame>& track, std::size_t window) {
  if (window % 2 == 0) throw Error("median_smooth: window must be odd, got " + std::to_string(window));
  if (window < 3) throw Error("median_smooth: window must be at least 3");
  const std::size_t n = track.size();
  if (n < window)
    throw DataError("median_smooth: track of " + std::to_string(n) + " frames is shorter than the window");
  const std::size_t half = window / 2;
  Track<Frame> out = track;
  std::vector<double> buf;
  buf.reserve(window);
  for (std::size_t f = 0; f < Frame::kDim; ++f) {
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t lo = t >= half ? t - half : 0;
      const std::size_t hi = std::min(n - 1, t + half);
      buf.clear();
      for (std::size_t k = lo; k <= hi; ++k) buf.push_back(track.frames[k][f]);
      out.frames[t][f] = median_of(buf);
    }
  }
  return out;
}

template BehaviorTrack bridge_transitions(const BehaviorTrack&, std::span<const std::size_t>);
template SpeechTrack bridge_transitions(const SpeechTrack&, std::span<const std::size_t>);
template BehaviorTrack median_smooth(const BehaviorTrack&, std::size_t);
template SpeechTrack median_smooth(const SpeechTrack&, std::size_t);

BehaviorTrack center_track(const BehaviorTrack& track) {
  if (track.empty()) throw DataError("center_track: empty track");
  BehaviorTrack out = track;
  std::vector<double> column(track.size());
  // gaze vectors, gaze angle and head rotation occupy channels [0, kAuOffset)
  for (std::size_t f = 0; f < kAuOffset; ++f) {
    for (std::size_t t = 0; t < track.size(); ++t) column[t] = track.frames[t][f];
    const double m = median_of(column);
    for (auto& frame : out.frames) frame[f] -= m;
  }
  return out;
}

BehaviorTrack clamp_listening(const BehaviorTrack& behavior, const SpeechTrack& speech) {
  if (behavior.size() != speech.size())
    throw ShapeError("clamp_listening: behavior has " + std::to_string(behavior.size()) +
                     " frames, speech has " + std::to_string(speech.size()));
  BehaviorTrack out = behavior;
  for (std::size_t t = 0; t < out.size(); ++t)
    if (!speech.frames[t].speaking()) out.frames[t] = BehaviorFrame{};
  return out;
}

std::vector<ClipPair> segment(const SpeechTrack& speech, const BehaviorTrack& behavior,
                              std::size_t length, std::size_t stride) {
  if (length == 0) throw Error("segment: length must be positive");
  if (stride == 0) stride = length;
  if (speech.size() != behavior.size())
    throw ShapeError("segment: speech has " + std::to_string(speech.size()) +
                     " frames, behavior has " + std::to_string(behavior.size()));
  std::vector<ClipPair> clips;
  for (std::size_t start = 0; start + length <= speech.size(); start += stride) {
    ClipPair c;
    c.speech.assign(speech.frames.begin() + static_cast<std::ptrdiff_t>(start),
                    speech.frames.begin() + static_cast<std::ptrdiff_t>(start + length));
    c.behavior.assign(behavior.frames.begin() + static_cast<std::ptrdiff_t>(start),
                      behavior.frames.begin() + static_cast<std::ptrdiff_t>(start + length));
    c.source_id = speech.source_id;
    c.start_frame = start;
    clips.push_back(std::move(c));
  }
  return clips;
}

BehaviorTrack clean_behavior(std::span<const RawBehaviorRow> rows, const SpeechTrack& speech,
                             const PreprocessOptions& options) {
  BehaviorTrack track = behavior_track(rows);
  track.source_id = speech.source_id;
  track.role = speech.role;
  if (options.remove_outliers) {
    options.outliers.validate();
    const auto removed = detect_outliers(rows, options.outliers);
    track = bridge_transitions(track, removed);
  }
  if (options.smooth) track = median_smooth(track, options.median_window);
  if (options.center) track = center_track(track);
  if (options.clamp) track = clamp_listening(track, speech);
  return track;
}

std::map<std::string, std::string> split_interactions(std::vector<std::string> interactions,
                                                      double test_fraction, unsigned long long seed) {
  if (test_fraction < 0.0 || test_fraction > 1.0) throw Error("test_fraction must be in [0, 1]");
  std::sort(interactions.begin(), interactions.end());
  interactions.erase(std::unique(interactions.begin(), interactions.end()), interactions.end());
  std::mt19937_64 rng(seed);
  std::shuffle(interactions.begin(), interactions.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(interactions.size())));
  std::map<std::string, std::string> out;
  for (std::size_t i = 0; i < interactions.size(); ++i)
    out[interactions[i]] = i < n_test ? "test" : "train";
  return out;
}

std::vector<const ClipRecord*> ClipStore::select(std::string_view split) const {
  std::vector<const ClipRecord*> out;
  for (const auto& c : clips)
    if (split.empty() || c.split == split) out.push_back(&c);
  return out;
}

void write_clip_store(const std::filesystem::path& dir, const ClipStore& store) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "clips");
  save_norm_stats((dir / "norm_stats.txt").string(), store.stats);
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest) throw DataError("cannot write " + (dir / "manifest.csv").string());
  manifest << "clip_id,source_id,interaction,corpus,split,role,start_frame\n";
  for (const auto& rec : store.clips) {
    manifest << rec.clip_id << ',' << rec.source_id << ',' << rec.interaction << ',' << rec.corpus
             << ',' << rec.split << ',' << to_string(rec.role) << ',' << rec.clip.start_frame << '\n';
    SpeechTrack s{rec.clip.speech, kFrameRate, rec.source_id, rec.role};
    BehaviorTrack b{rec.clip.behavior, kFrameRate, rec.source_id, rec.role};
    write_speech_csv(dir / "clips" / (rec.clip_id + ".speech.csv"), s);
    write_behavior_csv(dir / "clips" / (rec.clip_id + ".behavior.csv"), b);
  }
}

ClipStore read_clip_store(const std::filesystem::path& dir) {
  ClipStore store;
  store.stats = load_norm_stats((dir / "norm_stats.txt").string());
  const auto table = CsvTable::read_file(dir / "manifest.csv");
  const auto c_id = table.column("clip_id"), c_src = table.column("source_id"),
             c_int = table.column("interaction"), c_corpus = table.column("corpus"),
             c_split = table.column("split"), c_role = table.column("role"),
             c_start = table.column("start_frame");
  for (std::size_t r = 0; r < table.rows(); ++r) {
    ClipRecord rec;
    rec.clip_id = table.cell(r, c_id);
    rec.source_id = table.cell(r, c_src);
    rec.interaction = table.cell(r, c_int);
    rec.corpus = table.cell(r, c_corpus);
    rec.split = table.cell(r, c_split);
    rec.role = parse_role(table.cell(r, c_role));
    rec.clip.source_id = rec.source_id;
    rec.clip.start_frame = static_cast<std::size_t>(table.number(r, c_start));
    rec.clip.speech = read_speech_csv(dir / "clips" / (rec.clip_id + ".speech.csv")).frames;
    rec.clip.behavior = read_behavior_csv(dir / "clips" / (rec.clip_id + ".behavior.csv")).frames;
    if (rec.clip.speech.size() != rec.clip.behavior.size())
      throw DataError("clip " + rec.clip_id + ": speech/behavior length mismatch");
    store.clips.push_back(std::move(rec));
  }
  return store;
}

}  // namespace facesync
