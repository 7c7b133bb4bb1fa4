#include "facesync/ingestion.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>

#include "facesync/csv.hpp"

namespace facesync {
namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());
  return is;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  return os;
}

// eGeMAPS LLD columns carry an "_sma3" or "_sma3nz" smoothing suffix.
std::size_t find_speech_column(const CsvTable& t, std::string_view base) {
  for (const std::string suffix : {"", "_sma3", "_sma3nz"})
    if (auto c = t.find_column(std::string(base) + suffix)) return *c;
  return t.column(base);
}

std::size_t find_time_column(const CsvTable& t) {
  for (std::string_view n : {"timestamp", "frameTime", "start"})
    if (auto c = t.find_column(n)) return *c;
  return t.column("timestamp");
}

template <class Row>
void check_monotonic(const std::vector<Row>& rows, const std::string& name) {
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].timestamp < rows[i - 1].timestamp)
      throw DataError(name + ": timestamp decreases at row " + std::to_string(i));
}

template <class Frame>
void write_track(std::ostream& os, const Track<Frame>& track, const auto& names) {
  os << "frame,timestamp";
  for (const auto& n : names) os << ',' << n;
  os << '\n' << std::setprecision(17);
  for (std::size_t t = 0; t < track.frames.size(); ++t) {
    os << t << ',' << static_cast<double>(t) / track.frame_rate;
    for (double v : track.frames[t].values()) os << ',' << v;
    os << '\n';
  }
}

template <class Frame>
Track<Frame> read_track(std::istream& is, const std::string& name, const auto& names) {
  const auto table = CsvTable::read(is, name);
  std::vector<std::size_t> cols;
  for (const auto& n : names) cols.push_back(table.column(n));
  Track<Frame> track;
  track.source_id = std::filesystem::path(name).stem().stem().string();
  track.frames.reserve(table.rows());
  for (std::size_t r = 0; r < table.rows(); ++r) {
    Frame f;
    for (std::size_t i = 0; i < cols.size(); ++i) f[i] = table.number(r, cols[i]);
    track.frames.push_back(f);
  }
  return track;
}

}  // namespace

std::vector<RawBehaviorRow> parse_openface_csv(std::istream& is, const std::string& name) {
  const auto table = CsvTable::read(is, name);
  const auto ts = table.column("timestamp");
  const auto conf = table.column("confidence");
  const auto succ = table.column("success");
  std::array<std::size_t, kBehaviorDim> cols{};
  const auto& names = behavior_feature_names();
  for (std::size_t i = 0; i < kBehaviorDim; ++i) cols[i] = table.column(names[i]);

  std::vector<RawBehaviorRow> rows;
  rows.reserve(table.rows());
  for (std::size_t r = 0; r < table.rows(); ++r) {
    RawBehaviorRow row;
    row.timestamp = table.number(r, ts);
    row.confidence = table.number(r, conf);
    row.success = table.number(r, succ) >= 0.5;
    for (std::size_t i = 0; i < kBehaviorDim; ++i) row.features[i] = table.number(r, cols[i]);
    rows.push_back(row);
  }
  check_monotonic(rows, name);
  return rows;
}

std::vector<RawBehaviorRow> parse_openface_csv(const std::filesystem::path& path) {
  auto is = open_in(path);
  return parse_openface_csv(is, path.string());
}

std::vector<RawSpeechRow> parse_opensmile_csv(std::istream& is, const std::string& name) {
  const auto table = CsvTable::read(is, name);
  const auto ts = find_time_column(table);
  std::array<std::size_t, kSpeechBaseDim> cols{};
  const auto& names = speech_base_names();
  for (std::size_t i = 0; i < kSpeechBaseDim; ++i) cols[i] = find_speech_column(table, names[i]);

  std::vector<RawSpeechRow> rows;
  rows.reserve(table.rows());
  for (std::size_t r = 0; r < table.rows(); ++r) {
    RawSpeechRow row;
    row.timestamp = table.number(r, ts);
    for (std::size_t i = 0; i < kSpeechBaseDim; ++i) row.features[i] = table.number(r, cols[i]);
    rows.push_back(row);
  }
  check_monotonic(rows, name);
  return rows;
}

std::vector<RawSpeechRow> parse_opensmile_csv(const std::filesystem::path& path) {
  auto is = open_in(path);
  return parse_opensmile_csv(is, path.string());
}

namespace {

// Central difference inside, one-sided at both ends.
std::vector<double> difference(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> d(n);
  d[0] = x[1] - x[0];
  d[n - 1] = x[n - 1] - x[n - 2];
  for (std::size_t t = 1; t + 1 < n; ++t) d[t] = (x[t + 1] - x[t - 1]) / 2.0;
  return d;
}

}  // namespace

std::vector<SpeechVec> add_derivatives(std::span<const RawSpeechRow> rows) {
  if (rows.size() < 3) throw DataError("sequence too short for derivatives");
  const std::size_t n = rows.size();
  std::vector<SpeechVec> out(n);
  std::vector<double> x(n);
  for (std::size_t f = 0; f < kSpeechBaseDim; ++f) {
    for (std::size_t t = 0; t < n; ++t) x[t] = rows[t].features[f];
    const auto d1 = difference(x);
    const auto d2 = difference(d1);
    for (std::size_t t = 0; t < n; ++t) {
      out[t][f] = x[t];
      out[t][kSpeechBaseDim + f] = d1[t];
      out[t][2 * kSpeechBaseDim + f] = d2[t];
    }
  }
  return out;
}

std::vector<SpeechVec> downsample_speech(std::span<const SpeechVec> rows) {
  if (rows.size() < 2) throw DataError("sequence too short to downsample");
  std::vector<SpeechVec> out(rows.size() / 2);
  for (std::size_t k = 0; k < out.size(); ++k)
    for (std::size_t f = 0; f < kSpeechDerivedDim; ++f)
      out[k][f] = (rows[2 * k][f] + rows[2 * k + 1][f]) / 2.0;
  return out;
}

SpeechTrack attach_speaking_flag(std::span<const SpeechVec> speech,
                                 std::span<const TurnInterval> turns, double frame_rate) {
  std::vector<TurnInterval> sorted(turns.begin(), turns.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.start < b.start; });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i].start < sorted[i - 1].end)
      throw DataError("overlapping speaking intervals [" + std::to_string(sorted[i - 1].start) +
                      ", " + std::to_string(sorted[i - 1].end) + ") and [" +
                      std::to_string(sorted[i].start) + ", " + std::to_string(sorted[i].end) + ")");

  SpeechTrack track;
  track.frame_rate = frame_rate;
  track.frames.reserve(speech.size());
  for (std::size_t k = 0; k < speech.size(); ++k) {
    const double t = static_cast<double>(k) / frame_rate;
    const bool speaking = std::any_of(sorted.begin(), sorted.end(),
                                      [t](const auto& iv) { return iv.start <= t && t < iv.end; });
    SpeechFrame f;
    std::copy(speech[k].begin(), speech[k].end(), f.values().begin());
    f[kSpeakingIndex] = speaking ? 1.0 : 0.0;
    track.frames.push_back(f);
  }
  return track;
}

BehaviorTrack behavior_track(std::span<const RawBehaviorRow> rows) {
  BehaviorTrack t;
  t.frames.reserve(rows.size());
  for (const auto& r : rows) t.frames.push_back(r.features);
  return t;
}

SpeechTrack speech_track(std::span<const RawSpeechRow> rows50, std::span<const TurnInterval> turns) {
  const auto with_derivatives = add_derivatives(rows50);
  const auto rows25 = downsample_speech(with_derivatives);
  return attach_speaking_flag(rows25, turns);
}

namespace {
void warn_if_far(std::size_t a, std::size_t b, const std::string& id) {
  const auto diff = a > b ? a - b : b - a;
  if (diff > 1)
    spdlog::warn("track '{}': speech and behavior differ by {} frames, truncating", id, diff);
}
}  // namespace

void align_lengths(SpeechTrack& speech, BehaviorTrack& behavior) {
  warn_if_far(speech.size(), behavior.size(), speech.source_id);
  const auto n = std::min(speech.size(), behavior.size());
  speech.frames.resize(n);
  behavior.frames.resize(n);
}

void align_lengths(SpeechTrack& speech, std::vector<RawBehaviorRow>& behavior) {
  warn_if_far(speech.size(), behavior.size(), speech.source_id);
  const auto n = std::min(speech.size(), behavior.size());
  speech.frames.resize(n);
  behavior.resize(n);
}

std::vector<TurnInterval> read_turns(std::istream& is, const std::string& name) {
  const auto table = CsvTable::read(is, name);
  const auto s = table.column("start");
  const auto e = table.column("end");
  std::vector<TurnInterval> turns;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    TurnInterval iv{table.number(r, s), table.number(r, e)};
    if (iv.end < iv.start) throw DataError(name + ": turn ends before it starts at row " + std::to_string(r));
    turns.push_back(iv);
  }
  return turns;
}

std::vector<TurnInterval> read_turns(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_turns(is, path.string());
}

void write_turns(std::ostream& os, std::span<const TurnInterval> turns) {
  os << "start,end\n" << std::setprecision(17);
  for (const auto& t : turns) os << t.start << ',' << t.end << '\n';
}

void write_behavior_csv(std::ostream& os, const BehaviorTrack& track) {
  write_track(os, track, behavior_feature_names());
}

void write_speech_csv(std::ostream& os, const SpeechTrack& track) {
  write_track(os, track, speech_feature_names());
}

void write_behavior_csv(const std::filesystem::path& path, const BehaviorTrack& track) {
  auto os = open_out(path);
  write_behavior_csv(os, track);
}

void write_speech_csv(const std::filesystem::path& path, const SpeechTrack& track) {
  auto os = open_out(path);
  write_speech_csv(os, track);
}

BehaviorTrack read_behavior_csv(std::istream& is, const std::string& name) {
  return read_track<BehaviorFrame>(is, name, behavior_feature_names());
}

SpeechTrack read_speech_csv(std::istream& is, const std::string& name) {
  return read_track<SpeechFrame>(is, name, speech_feature_names());
}

BehaviorTrack read_behavior_csv(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_behavior_csv(is, path.string());
}

SpeechTrack read_speech_csv(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_speech_csv(is, path.string());
}

void write_openface_csv(std::ostream& os, std::span<const RawBehaviorRow> rows) {
  os << "frame, face_id, timestamp, confidence, success";
  for (auto n : behavior_feature_names()) os << ", " << n;
  os << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    os << i + 1 << ", 0, " << r.timestamp << ", " << r.confidence << ", " << (r.success ? 1 : 0);
    for (double v : r.features.values()) os << ", " << v;
    os << '\n';
  }
}

void write_opensmile_csv(std::ostream& os, std::span<const RawSpeechRow> rows) {
  os << "name,frameTime";
  for (auto n : speech_base_names()) os << ',' << n << (n.starts_with("F0") || n.starts_with("logRel") ? "_sma3nz" : "_sma3");
  os << '\n' << std::setprecision(17);
  for (const auto& r : rows) {
    os << "'unknown'," << r.timestamp;
    for (double v : r.features) os << ',' << v;
    os << '\n';
  }
}

}  // namespace facesync
