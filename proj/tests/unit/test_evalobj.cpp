#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <sstream>

#include "facesync/evalobj.hpp"
#include "support.hpp"

using namespace facesync;

namespace {

// Minimum over every monotone alignment path, enumerated explicitly.
double enumerate_paths(const std::vector<double>& a, const std::vector<double>& b) {
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double acc) {
    acc += std::abs(a[i] - b[j]);
    if (i + 1 == a.size() && j + 1 == b.size()) {
      best = std::min(best, acc);
      return;
    }
    if (i + 1 < a.size()) walk(i + 1, j, acc);
    if (j + 1 < b.size()) walk(i, j + 1, acc);
    if (i + 1 < a.size() && j + 1 < b.size()) walk(i + 1, j + 1, acc);
  };
  walk(0, 0, 0.0);
  return best;
}

std::vector<double> random_seq(std::mt19937_64& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = testing::uniform(rng, -2, 2);
  return v;
}

BehaviorTrack random_track(std::mt19937_64& rng, std::size_t n) {
  BehaviorTrack t;
  t.frames.resize(n);
  for (auto& f : t.frames)
    for (std::size_t c = 0; c < kBehaviorDim; ++c) f[c] = testing::uniform(rng);
  return t;
}

BehaviorTrack one_channel(std::size_t channel, std::size_t n, const std::function<double(double)>& q) {
  BehaviorTrack t;
  t.frames.resize(n);
  for (std::size_t k = 0; k < n; ++k) t.frames[k][channel] = q(static_cast<double>(k) / kFrameRate);
  return t;
}

}  // namespace

TEST_CASE("dtw examples") {
  const std::vector<double> a{0, 0}, b{1, 1};
  CHECK(dtw_distance(a, b) == 2.0);
  CHECK(dtw_distance(a, a) == 0.0);
  const std::vector<double> x{1, 2, 3}, stretched{1, 1, 2, 2, 3, 3};
  CHECK(dtw_distance(x, stretched) == 0.0);
  CHECK_THROWS_AS(dtw_distance({}, b), DataError);
}

TEST_CASE("dtw equals exhaustive path enumeration") {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 200; ++rep) {
    const auto a = random_seq(rng, 1 + rng() % 8);
    const auto b = random_seq(rng, 1 + rng() % 8);
    const double d = dtw_distance(a, b);
    CHECK(d == enumerate_paths(a, b));
    CHECK(d == dtw_distance(b, a));
    CHECK(d >= 0.0);
  }
}

TEST_CASE("multichannel dtw averages per-feature distances") {
  std::mt19937_64 rng(2);
  const auto a = random_track(rng, 10), b = random_track(rng, 12);
  std::vector<double> fa, fb;
  for (const auto& f : a.frames) fa.insert(fa.end(), f.values().begin(), f.values().end());
  for (const auto& f : b.frames) fb.insert(fb.end(), f.values().begin(), f.values().end());
  double sum = 0;
  for (std::size_t c = 0; c < kBehaviorDim; ++c) {
    std::vector<double> ca, cb;
    for (const auto& f : a.frames) ca.push_back(f[c]);
    for (const auto& f : b.frames) cb.push_back(f[c]);
    const double d = dtw_distance(ca, cb);
    CHECK(dtw_per_channel(fa, kBehaviorDim, fb, kBehaviorDim)[c] == d);
    sum += d;
  }
  CHECK(dtw_track(a, b) == doctest::Approx(sum / kBehaviorDim).epsilon(1e-12));
  CHECK(dtw_track(a, a) == 0.0);

  auto c = a;
  for (auto& f : c.frames) f[4] += 1.0;
  CHECK(dtw_track(a, c) == doctest::Approx(10.0 / kBehaviorDim));
  CHECK_THROWS_AS(dtw_multichannel(fa, 28, fb, 27), ShapeError);
}

TEST_CASE("motion statistics on polynomials") {
  std::vector<double> quad, cube, flat(30, 0.7), flat3(30, 0.3);
  for (int t = 0; t < 30; ++t) {
    const double s = t / kFrameRate;
    quad.push_back(s * s);
    cube.push_back(s * s * s);
  }
  CHECK(motion_stats(flat, kFrameRate) == std::pair(0.0, 0.0));
  CHECK(motion_stats(flat3, kFrameRate) == std::pair(0.0, 0.0));
  CHECK(motion_stats(quad, kFrameRate).first == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(motion_stats(quad, kFrameRate).second == doctest::Approx(0.0).scale(1e-6));
  CHECK(motion_stats(cube, kFrameRate).second == doctest::Approx(6.0).epsilon(1e-9));
  CHECK_THROWS_AS(motion_stats(std::span(quad).first(3), kFrameRate), DataError);
}

TEST_CASE("track motion averages the eye and head channels only") {
  auto sq = [](double s) { return s * s; };
  for (std::size_t ch : kMotionChannels) {
    const auto m = motion_stats(one_channel(ch, 20, sq));
    CHECK(m.acceleration == doctest::Approx(2.0 / 9.0).epsilon(1e-9));
  }
  for (std::size_t ch : {6ul, 7ul, kAuOffset, kAuOffset + 5}) {
    const auto m = motion_stats(one_channel(ch, 20, sq));
    CHECK(m.acceleration == 0.0);
    CHECK(m.jerk == 0.0);
  }
}

TEST_CASE("motion statistics scale with |c|") {
  std::mt19937_64 rng(3);
  const auto t = random_track(rng, 40);
  const auto base = motion_stats(t);
  for (double c : {-3.0, 0.5, 2.0}) {
    auto s = t;
    for (auto& f : s.frames) f[kHeadOffset] *= c;
    const auto m = motion_stats(s);
    CHECK(m.channel_acceleration[6] == doctest::Approx(std::abs(c) * base.channel_acceleration[6]));
    CHECK(m.channel_jerk[6] == doctest::Approx(std::abs(c) * base.channel_jerk[6]));
    CHECK(m.channel_jerk[7] == base.channel_jerk[7]);
  }
}

TEST_CASE("smoothing lowers jerk") {
  std::mt19937_64 rng(4);
  const auto t = random_track(rng, 100);
  auto smooth = t;
  for (std::size_t k = 1; k + 1 < t.size(); ++k)
    for (std::size_t c = 0; c < kBehaviorDim; ++c)
      smooth.frames[k][c] = (t.frames[k - 1][c] + t.frames[k][c] + t.frames[k + 1][c]) / 3.0;
  CHECK(motion_stats(smooth).jerk < motion_stats(t).jerk);
}

TEST_CASE("summary statistics") {
  const std::vector<double> v{10, 20};
  const auto s = summarize(v);
  CHECK(s.mean == 15.0);
  CHECK(s.std == doctest::Approx(std::sqrt(50.0)));
  CHECK(summarize(std::vector<double>{4}).std == 0.0);
}

TEST_CASE("report over conditions") {
  std::mt19937_64 rng(5);
  TrackSet truth{{"c1", random_track(rng, 20)}, {"c2", random_track(rng, 20)}};
  TrackSet noisy;
  for (const auto& [id, t] : truth) noisy[id] = random_track(rng, 20);
  const auto report = build_report({{"m1", truth}, {"m2", noisy}}, truth);
  CHECK(report.ground_truth.name == "GTS");
  REQUIRE(report.conditions.size() == 2);
  CHECK(report.conditions[0].name == "m1");
  CHECK(report.conditions[0].dtw.mean == 0.0);
  CHECK(report.conditions[0].acceleration.mean == report.ground_truth.acceleration.mean);
  CHECK(report.conditions[0].jerk.std == report.ground_truth.jerk.std);
  CHECK(report.clip_ids == std::vector<std::string>{"c1", "c2"});
  const double d1 = dtw_track(noisy["c1"], truth["c1"]), d2 = dtw_track(noisy["c2"], truth["c2"]);
  CHECK(report.conditions[1].dtw.mean == doctest::Approx((d1 + d2) / 2));
  CHECK(report.conditions[1].clip_dtw.at("c2") == d2);

  std::ostringstream os;
  write_report_csv(os, report);
  std::istringstream is(os.str());
  std::string header, row;
  std::getline(is, header);
  CHECK(header == "metric,GTS_mean,GTS_std,m1_mean,m1_std,m2_mean,m2_std");
  std::vector<std::string> metrics;
  while (std::getline(is, row)) metrics.push_back(row.substr(0, row.find(',')));
  CHECK(metrics == std::vector<std::string>{"DTW", "Acc.", "Jerk"});
  const auto text = format_report_table(report);
  CHECK(text.find("m2") != std::string::npos);
  CHECK(text.find("GTS") != std::string::npos);
}

TEST_CASE("report rejects mismatched clip sets") {
  std::mt19937_64 rng(6);
  TrackSet truth{{"c1", random_track(rng, 10)}, {"c2", random_track(rng, 10)}};
  TrackSet partial{{"c1", truth["c1"]}, {"c9", truth["c2"]}};
  CHECK_THROWS_WITH_AS(build_report({{"m1", partial}}, truth), doctest::Contains("c2"), DataError);
  CHECK_THROWS_WITH_AS(build_report({{"m1", partial}}, truth), doctest::Contains("c9"), DataError);
}
