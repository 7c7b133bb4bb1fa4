#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "facesync/ingestion.hpp"
#include "support.hpp"

using namespace facesync;

namespace {

std::string openface_header(const std::string& skip = "") {
  std::string h = "frame, face_id, timestamp, confidence, success";
  for (auto n : behavior_feature_names())
    if (n != skip) h += ", " + std::string(n);
  return h + "\n";
}

std::string openface_row(int frame, double ts, double conf, int success, double base, const std::string& skip = "") {
  std::ostringstream os;
  os << frame << ", 0, " << ts << ", " << conf << ", " << success;
  std::size_t i = 0;
  for (auto n : behavior_feature_names()) {
    if (n != skip) os << ", " << base + static_cast<double>(i);
    ++i;
  }
  return os.str() + "\n";
}

std::vector<RawSpeechRow> ramp_rows(std::size_t n, std::size_t feature, double slope) {
  std::vector<RawSpeechRow> rows(n);
  for (std::size_t t = 0; t < n; ++t) {
    rows[t].timestamp = static_cast<double>(t) / 50.0;
    rows[t].features[feature] = slope * static_cast<double>(t);
  }
  return rows;
}

}  // namespace

TEST_CASE("openface parser maps columns by name") {
  std::istringstream is(openface_header() + openface_row(1, 0.0, 0.98, 1, 0.0) +
                        openface_row(2, 0.04, 0.5, 0, 100.0) + openface_row(3, 0.08, 0.9, 1, 200.0));
  const auto rows = parse_openface_csv(is, "fixture");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].confidence == doctest::Approx(0.98));
  CHECK(rows[0].success);
  CHECK_FALSE(rows[1].success);
  CHECK(rows[1].timestamp == doctest::Approx(0.04));
  for (std::size_t c = 0; c < 28; ++c) CHECK(rows[2].features[c] == 200.0 + static_cast<double>(c));
}

TEST_CASE("openface parser reports a missing AU column") {
  std::istringstream is(openface_header("AU45_r") + openface_row(1, 0.0, 1, 1, 0.0, "AU45_r"));
  CHECK_THROWS_WITH_AS(parse_openface_csv(is, "f"), doctest::Contains("missing column AU45_r"), DataError);
}

TEST_CASE("openface parser reports bad numbers with the row") {
  std::string bad = openface_row(2, 0.04, 1, 1, 0.0);
  bad.replace(bad.find(", 0.04,"), 7, ", oops,");
  std::istringstream is(openface_header() + openface_row(1, 0.0, 1, 1, 0.0) + bad);
  CHECK_THROWS_WITH_AS(parse_openface_csv(is, "f"), doctest::Contains("row 1"), DataError);
}

TEST_CASE("250 frames at 25 fps span 10 s") {
  std::string text = openface_header();
  for (int k = 0; k < 250; ++k) text += openface_row(k + 1, k / 25.0, 1, 1, 0.0);
  std::istringstream is(text);
  const auto rows = parse_openface_csv(is, "f");
  REQUIRE(rows.size() == 250);
  CHECK(rows.back().timestamp - rows.front().timestamp == doctest::Approx(249.0 / 25.0));
}

TEST_CASE("opensmile parser keeps the seven features in canonical order") {
  // 20 columns, shuffled, with the openSMILE suffixes
  const std::vector<std::string> cols{"loudness_sma3",       "mfcc3_sma3",          "slope0-500_sma3",
                                      "alphaRatio_sma3",     "F1frequency_sma3nz",  "mfcc1_sma3",
                                      "jitterLocal_sma3nz",  "hammarbergIndex_sma3", "F2frequency_sma3nz",
                                      "logRelF0-H1-H2_sma3nz", "shimmerLocaldB_sma3nz", "HNRdBACF_sma3nz",
                                      "F0semitoneFrom27.5Hz_sma3nz", "mfcc4_sma3", "mfcc2_sma3",
                                      "F3frequency_sma3nz",  "slope500-1500_sma3",  "spectralFlux_sma3",
                                      "Loudness_extra",      "F1bandwidth_sma3nz"};
  REQUIRE(cols.size() == 20);
  std::string text = "name;frameTime";
  for (const auto& c : cols) text += ";" + c;
  text += "\n";
  for (int t = 0; t < 500; ++t) {
    text += "'unknown';" + std::to_string(t / 50.0);
    for (std::size_t c = 0; c < cols.size(); ++c) text += ";" + std::to_string(100 * c + t);
    text += "\n";
  }
  std::istringstream is(text);
  const auto rows = parse_opensmile_csv(is, "f");
  REQUIRE(rows.size() == 500);
  CHECK(rows[0].features.size() == 7);
  const std::size_t where[7] = {3, 7, 5, 14, 1, 12, 9};  // canonical -> position in cols
  for (std::size_t f = 0; f < 7; ++f) CHECK(rows[7].features[f] == 100.0 * where[f] + 7);
  CHECK(rows[10].timestamp == doctest::Approx(0.2));
}

TEST_CASE("derivatives") {
  SUBCASE("constant") {
    std::vector<RawSpeechRow> rows(6);
    for (auto& r : rows) r.features.fill(3.0);
    for (const auto& v : add_derivatives(rows))
      for (std::size_t f = 7; f < 21; ++f) CHECK(v[f] == 0.0);
  }
  SUBCASE("ramp") {
    const auto out = add_derivatives(ramp_rows(8, 2, 1.0));
    REQUIRE(out.size() == 8);
    for (std::size_t t = 0; t < 8; ++t) {
      CHECK(out[t][7 + 2] == doctest::Approx(1.0));
      CHECK(out[t][14 + 2] == doctest::Approx(0.0));
    }
  }
  SUBCASE("random against finite differences") {
    std::mt19937_64 rng(4);
    std::vector<RawSpeechRow> rows(10);
    for (auto& r : rows)
      for (auto& x : r.features) x = testing::uniform(rng, -2, 2);
    auto diff = [](const std::vector<double>& x) {
      const std::size_t n = x.size();
      std::vector<double> d(n);
      d[0] = x[1] - x[0];
      d[n - 1] = x[n - 1] - x[n - 2];
      for (std::size_t t = 1; t + 1 < n; ++t) d[t] = (x[t + 1] - x[t - 1]) / 2.0;
      return d;
    };
    const auto out = add_derivatives(rows);
    for (std::size_t f = 0; f < 7; ++f) {
      std::vector<double> x;
      for (const auto& r : rows) x.push_back(r.features[f]);
      const auto d1 = diff(x), d2 = diff(d1);
      for (std::size_t t = 0; t < 10; ++t) {
        CHECK(out[t][f] == x[t]);
        CHECK(out[t][7 + f] == doctest::Approx(d1[t]).epsilon(1e-12));
        CHECK(out[t][14 + f] == doctest::Approx(d2[t]).epsilon(1e-12));
      }
    }
  }
  CHECK_THROWS_WITH_AS(add_derivatives(ramp_rows(2, 0, 1.0)), "sequence too short for derivatives", DataError);
}

TEST_CASE("downsampling averages pairs") {
  std::vector<SpeechVec> rows(4);
  const double v[4] = {1, 3, 5, 7};
  for (int i = 0; i < 4; ++i) rows[i][0] = v[i];
  const auto out = downsample_speech(rows);
  REQUIRE(out.size() == 2);
  CHECK(out[0][0] == 2.0);
  CHECK(out[1][0] == 6.0);
  rows.resize(5);
  CHECK(downsample_speech(rows).size() == 2);
  std::vector<SpeechVec> constant(6);
  for (auto& r : constant) r.fill(4.0);
  for (const auto& r : downsample_speech(constant)) CHECK(r[20] == 4.0);
  CHECK_THROWS_AS(downsample_speech(std::vector<SpeechVec>(1)), DataError);
}

TEST_CASE("speaking flag follows turn intervals") {
  const std::vector<SpeechVec> speech(100);
  const std::vector<TurnInterval> half{{0.0, 2.0}};
  const auto t = attach_speaking_flag(speech, half);
  REQUIRE(t.size() == 100);
  for (std::size_t k = 0; k < 100; ++k) CHECK(t.frames[k].speaking() == (k < 50));
  for (const auto& f : attach_speaking_flag(speech, {}).frames) CHECK(f[kSpeakingIndex] == 0.0);
  const std::vector<TurnInterval> all{{0.0, 4.0}};
  for (const auto& f : attach_speaking_flag(speech, all).frames) CHECK(f[kSpeakingIndex] == 1.0);
  const std::vector<TurnInterval> overlap{{0.0, 2.0}, {1.5, 3.0}};
  CHECK_THROWS_WITH_AS(attach_speaking_flag(speech, overlap), doctest::Contains("1.5"), DataError);
}

TEST_CASE("speech track has 22 channels at half the input rate") {
  const auto rows = ramp_rows(201, 0, 0.5);
  const std::vector<TurnInterval> turns{{1.0, 3.0}};
  const auto t = speech_track(rows, turns);
  CHECK(t.size() == 100);
  CHECK(t.frame_rate == 25.0);
  CHECK(t.frames[30][0] == doctest::Approx(0.5 * 60.5));
  CHECK(t.frames[24][kSpeakingIndex] == 0.0);
  CHECK(t.frames[25][kSpeakingIndex] == 1.0);
  CHECK(t.frames[74][kSpeakingIndex] == 1.0);
  CHECK(t.frames[75][kSpeakingIndex] == 0.0);
}

TEST_CASE("align truncates the longer stream") {
  SpeechTrack s;
  s.frames.resize(103);
  BehaviorTrack b;
  b.frames.resize(100);
  align_lengths(s, b);
  CHECK(s.size() == 100);
  CHECK(b.size() == 100);
  std::vector<RawBehaviorRow> raw(120);
  s.frames.resize(101);
  align_lengths(s, raw);
  CHECK(raw.size() == 101);
}

TEST_CASE("canonical and raw writers round-trip through the parsers") {
  std::mt19937_64 rng(9);
  std::vector<RawBehaviorRow> raw(30);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i].timestamp = static_cast<double>(i) / 25.0;
    raw[i].confidence = testing::uniform(rng);
    raw[i].success = i % 3 != 0;
    for (std::size_t c = 0; c < 28; ++c) raw[i].features[c] = testing::uniform(rng, -1, 1);
  }
  std::stringstream of;
  write_openface_csv(of, raw);
  const auto back = parse_openface_csv(of, "rt");
  REQUIRE(back.size() == raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    CHECK(back[i].features == raw[i].features);
    CHECK(back[i].success == raw[i].success);
    CHECK(back[i].confidence == raw[i].confidence);
  }

  std::vector<RawSpeechRow> sp(20);
  for (std::size_t i = 0; i < sp.size(); ++i) {
    sp[i].timestamp = static_cast<double>(i) / 50.0;
    for (auto& x : sp[i].features) x = testing::uniform(rng, -3, 3);
  }
  std::stringstream os;
  write_opensmile_csv(os, sp);
  const auto sback = parse_opensmile_csv(os, "rt");
  REQUIRE(sback.size() == sp.size());
  for (std::size_t i = 0; i < sp.size(); ++i) CHECK(sback[i].features == sp[i].features);

  const auto track = speech_track(sp, std::vector<TurnInterval>{{0.0, 0.2}});
  std::stringstream cs;
  write_speech_csv(cs, track);
  const auto tback = read_speech_csv(cs, "rt");
  CHECK(tback.frames == track.frames);

  BehaviorTrack bt = behavior_track(raw);
  std::stringstream bs;
  write_behavior_csv(bs, bt);
  CHECK(read_behavior_csv(bs, "rt").frames == bt.frames);

  std::stringstream ts;
  const std::vector<TurnInterval> turns{{0.5, 1.25}, {2.0, 3.0}};
  write_turns(ts, turns);
  const auto tb = read_turns(ts, "turns");
  REQUIRE(tb.size() == 2);
  CHECK(tb[1].start == 2.0);
  CHECK(tb[0].end == 1.25);
}
