#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "facesync/preprocess.hpp"
#include "support.hpp"

using namespace facesync;

namespace {

BehaviorTrack track_from(const std::vector<double>& ch0) {
  BehaviorTrack t;
  for (double v : ch0) {
    BehaviorFrame f;
    f[0] = v;
    f[kAuOffset] = v;
    t.frames.push_back(f);
  }
  return t;
}

SpeechTrack flags(const std::vector<int>& f) {
  SpeechTrack s;
  for (int v : f) {
    SpeechFrame fr;
    fr[kSpeakingIndex] = v;
    s.frames.push_back(fr);
  }
  return s;
}

std::vector<RawBehaviorRow> clean_rows(std::size_t n) {
  std::vector<RawBehaviorRow> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    rows[i].timestamp = static_cast<double>(i) / 25.0;
    rows[i].confidence = 0.98;
    rows[i].success = true;
    rows[i].features[kHeadOffset] = 0.01 * static_cast<double>(i);
  }
  return rows;
}

// Median of the truncated window around t, by sorting.
double window_median(const std::vector<double>& x, std::size_t t, std::size_t w) {
  const std::size_t h = w / 2;
  const std::size_t lo = t >= h ? t - h : 0;
  const std::size_t hi = std::min(x.size() - 1, t + h);
  std::vector<double> win(x.begin() + static_cast<long>(lo), x.begin() + static_cast<long>(hi) + 1);
  std::sort(win.begin(), win.end());
  const std::size_t n = win.size();
  return n % 2 ? win[n / 2] : 0.5 * (win[n / 2 - 1] + win[n / 2]);
}

}  // namespace

TEST_CASE("outlier detection") {
  auto rows = clean_rows(20);
  const OutlierPolicy policy;
  CHECK(detect_outliers(rows, policy).empty());

  auto failed = rows;
  failed[7].success = false;
  CHECK(detect_outliers(failed, policy) == std::vector<std::size_t>{7});

  auto low = rows;
  low[3].confidence = 0.5;
  CHECK(detect_outliers(low, policy) == std::vector<std::size_t>{3});

  auto spike = rows;
  spike[10].features[kHeadOffset + 1] += 0.5;
  CHECK(detect_outliers(spike, policy) == std::vector<std::size_t>{10});

  OutlierPolicy lenient;
  lenient.require_success = false;
  CHECK(detect_outliers(failed, lenient).empty());
}

TEST_CASE("bridging removed frames") {
  SUBCASE("single frame") {
    auto t = track_from({0, 1, 2, 3, 2, 9, 4, 5});
    const std::vector<std::size_t> removed{5};
    CHECK(bridge_transitions(t, removed).frames[5][0] == doctest::Approx(3.0));
  }
  SUBCASE("three-frame gap") {
    auto t = track_from({0, 7, 7, 7, 4});
    const std::vector<std::size_t> removed{1, 2, 3};
    const auto b = bridge_transitions(t, removed);
    CHECK(b.frames[1][0] == doctest::Approx(1.0));
    CHECK(b.frames[2][0] == doctest::Approx(2.0));
    CHECK(b.frames[3][0] == doctest::Approx(3.0));
    CHECK(b.size() == 5);
  }
  SUBCASE("edges extend the nearest kept frame") {
    auto t = track_from({9, 2, 3, 8});
    const std::vector<std::size_t> removed{0, 3};
    const auto b = bridge_transitions(t, removed);
    CHECK(b.frames[0] == t.frames[1]);
    CHECK(b.frames[3] == t.frames[2]);
  }
  SUBCASE("everything removed") {
    auto t = track_from({1, 2});
    const std::vector<std::size_t> removed{0, 1};
    CHECK_THROWS_WITH_AS(bridge_transitions(t, removed), doctest::Contains("track unusable"), DataError);
  }
}

TEST_CASE("median smoothing") {
  const auto constant = track_from(std::vector<double>(20, 1.5));
  CHECK(median_smooth(constant).frames == constant.frames);

  std::vector<double> impulse(21, 0.0);
  impulse[10] = 10.0;
  CHECK(median_smooth(track_from(impulse)).frames[10][0] == 0.0);

  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> x(50);
    for (auto& v : x) v = testing::uniform(rng, -1, 1);
    const auto m = median_smooth(track_from(x), 7);
    REQUIRE(m.size() == 50);
    for (std::size_t t = 0; t < 50; ++t) CHECK(m.frames[t][0] == window_median(x, t, 7));
  }

  CHECK_THROWS_AS(median_smooth(constant, 6), Error);
  CHECK_THROWS_AS(median_smooth(constant, 1), Error);
  CHECK_THROWS_AS(median_smooth(track_from({1, 2, 3}), 7), Error);
}

TEST_CASE("centering subtracts the per-track median from pose channels") {
  BehaviorTrack t;
  std::mt19937_64 rng(2);
  for (int i = 0; i < 31; ++i) {
    BehaviorFrame f;
    for (std::size_t c = 0; c < 28; ++c) f[c] = testing::uniform(rng, -1, 1);
    t.frames.push_back(f);
  }
  const auto c = center_track(t);
  for (std::size_t ch = 0; ch < kAuOffset; ++ch) {
    std::vector<double> v;
    for (const auto& f : c.frames) v.push_back(f[ch]);
    std::nth_element(v.begin(), v.begin() + 15, v.end());
    CHECK(v[15] == doctest::Approx(0.0).epsilon(1e-12));
  }
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t ch = kAuOffset; ch < 28; ++ch) CHECK(c.frames[i][ch] == t.frames[i][ch]);

  BehaviorTrack fixed;
  for (int i = 0; i < 5; ++i) {
    BehaviorFrame f;
    f[kHeadOffset] = 0.2;
    fixed.frames.push_back(f);
  }
  for (const auto& f : center_track(fixed).frames) CHECK(f[kHeadOffset] == 0.0);
}

TEST_CASE("listening frames clamp to the zero vector") {
  std::mt19937_64 rng(1);
  BehaviorTrack b;
  for (int i = 0; i < 10; ++i) {
    BehaviorFrame f;
    for (std::size_t c = 0; c < 28; ++c) f[c] = testing::uniform(rng, 0.1, 1);
    b.frames.push_back(f);
  }
  const auto alt = clamp_listening(b, flags({1, 0, 1, 0, 1, 0, 1, 0, 1, 0}));
  for (std::size_t i = 0; i < 10; ++i)
    CHECK((alt.frames[i] == BehaviorFrame{}) == (i % 2 == 1));
  for (const auto& f : clamp_listening(b, flags(std::vector<int>(10, 0))).frames) CHECK(f == BehaviorFrame{});
  CHECK(clamp_listening(b, flags(std::vector<int>(10, 1))).frames == b.frames);
  CHECK_THROWS_AS(clamp_listening(b, flags({1, 0})), ShapeError);
}

TEST_CASE("segmentation counts") {
  auto make = [](std::size_t n) {
    SpeechTrack s;
    s.frames.resize(n);
    BehaviorTrack b;
    b.frames.resize(n);
    for (std::size_t i = 0; i < n; ++i) b.frames[i][0] = static_cast<double>(i);
    return std::pair(s, b);
  };
  auto [s250, b250] = make(250);
  const auto clips = segment(s250, b250);
  REQUIRE(clips.size() == 2);
  CHECK(clips[0].start_frame == 0);
  CHECK(clips[1].start_frame == 100);
  CHECK(clips[1].behavior.front()[0] == 100.0);
  CHECK(clips[1].behavior.back()[0] == 199.0);
  CHECK(clips[1].speech.size() == 100);
  auto [s100, b100] = make(100);
  CHECK(segment(s100, b100).size() == 1);
  auto [s99, b99] = make(99);
  CHECK(segment(s99, b99).empty());
  CHECK(segment(s250, b250, 100, 50).size() == 4);
}

TEST_CASE("clean_behavior runs the stages in order") {
  auto rows = clean_rows(40);
  for (std::size_t i = 0; i < 40; ++i) rows[i].features[kAuOffset] = 2.0;
  rows[12].success = false;
  rows[12].features[kAuOffset] = 50.0;
  std::vector<int> f(40, 1);
  for (std::size_t i = 30; i < 40; ++i) f[i] = 0;
  const auto speech = flags(f);
  const auto out = clean_behavior(rows, speech, PreprocessOptions{});
  REQUIRE(out.size() == 40);
  CHECK(out.frames[12][kAuOffset] == doctest::Approx(2.0));
  for (std::size_t i = 30; i < 40; ++i) CHECK(out.frames[i] == BehaviorFrame{});
}

TEST_CASE("interaction split keeps roles together") {
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) {
    ids.push_back("int" + std::to_string(i));
    ids.push_back("int" + std::to_string(i));
  }
  const auto split = split_interactions(ids, 0.2, 7);
  CHECK(split.size() == 10);
  int test = 0;
  for (const auto& [k, v] : split) test += v == "test";
  CHECK(test == 2);
  CHECK(split == split_interactions(ids, 0.2, 7));
  CHECK_THROWS(split_interactions(ids, 1.5, 7));
}

TEST_CASE("clip store round trip") {
  testing::TempDir dir("store");
  ClipStore store;
  std::mt19937_64 rng(3);
  for (int k = 0; k < 3; ++k) {
    ClipRecord r;
    r.clip_id = "c" + std::to_string(k);
    r.source_id = "src";
    r.interaction = "i0";
    r.corpus = "synth";
    r.split = k == 2 ? "test" : "train";
    r.role = SpeakerRole::second_person;
    r.clip.start_frame = 100 * k;
    r.clip.source_id = "src";
    r.clip.speech.resize(kClipFrames);
    r.clip.behavior.resize(kClipFrames);
    for (auto& f : r.clip.behavior) f[3] = testing::uniform(rng);
    for (auto& f : r.clip.speech) f[1] = testing::uniform(rng);
    store.clips.push_back(r);
  }
  store.stats.behavior_max.fill(1.0);
  write_clip_store(dir.path(), store);
  const auto back = read_clip_store(dir.path());
  REQUIRE(back.clips.size() == 3);
  CHECK(back.stats == store.stats);
  CHECK(back.select("train").size() == 2);
  CHECK(back.clips[2].split == "test");
  CHECK(back.clips[1].clip.start_frame == 100);
  CHECK(back.clips[1].role == SpeakerRole::second_person);
  CHECK(back.clips[0].clip.behavior == store.clips[0].clip.behavior);
  CHECK(back.clips[0].clip.speech == store.clips[0].clip.speech);
}
