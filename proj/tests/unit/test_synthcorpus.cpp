#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "facesync/synthcorpus.hpp"
#include "support.hpp"

using namespace facesync;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  const auto n = static_cast<long double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  const long double cov = sxy - sx * sy / n;
  return static_cast<double>(cov / std::sqrt((sxx - sx * sx / n) * (syy - sy * sy / n)));
}

SynthConfig small(std::uint64_t seed = 5) {
  SynthConfig c;
  c.seed = seed;
  c.n_tracks = 4;
  c.duration_s = 30.0;
  return c;
}

}  // namespace

TEST_CASE("same seed writes byte-identical corpora") {
  testing::TempDir a("synth_a"), b("synth_b");
  write_corpus(a.path(), small(), generate_corpus(small()));
  write_corpus(b.path(), small(), generate_corpus(small()));
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(a.path())) {
    const auto name = e.path().filename();
    CHECK(slurp(e.path()) == slurp(b.path() / name));
    ++files;
  }
  CHECK(files == 4 * 3 + 1);
  CHECK(read_corpus_manifest(a.path()).size() == 4);

  const auto other = generate_corpus(small(6));
  CHECK(other[0].speech50[10].features != generate_corpus(small())[0].speech50[10].features);
}

TEST_CASE("expressiveness zero silences behavior") {
  auto cfg = small();
  cfg.expressiveness = 0.0;
  for (const auto& t : generate_corpus(cfg))
    for (const auto& f : t.behavior().frames) CHECK(f == BehaviorFrame{});
}

TEST_CASE("head pitch follows the pitch contour two frames late") {
  for (const auto& t : generate_corpus(small())) {
    const auto s = t.speech();
    const auto b = t.behavior();
    std::vector<double> pitch, head;
    for (std::size_t k = kSynthLag; k < std::min(s.size(), b.size()); ++k) {
      if (!s.frames[k].speaking() || !s.frames[k - kSynthLag].speaking()) continue;
      pitch.push_back(s.frames[k - kSynthLag][kPitchChannel]);
      head.push_back(b.frames[k][kHeadPitchChannel]);
    }
    REQUIRE(pitch.size() > 100);
    CHECK(pearson(pitch, head) > 0.9);
  }
}

TEST_CASE("speaking flag matches the turn schedule") {
  const auto tracks = generate_corpus(small());
  REQUIRE(tracks.size() == 4);
  for (const auto& t : tracks) {
    const auto s = t.speech();
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double ts = static_cast<double>(k) / kFrameRate;
      bool in = false;
      for (const auto& turn : t.turns) in = in || (ts >= turn.start && ts < turn.end);
      CHECK(s.frames[k].speaking() == in);
    }
  }
  // Partners alternate: exactly one speaks at each frame.
  const auto s0 = tracks[0].speech(), s1 = tracks[1].speech();
  CHECK(tracks[0].interaction == tracks[1].interaction);
  for (std::size_t k = 0; k < std::min(s0.size(), s1.size()); ++k)
    CHECK(s0.frames[k].speaking() != s1.frames[k].speaking());
}

TEST_CASE("values stay in plausible ranges and listening is neutral") {
  for (const auto& t : generate_corpus(small(9))) {
    const auto s = t.speech();
    const auto b = t.behavior();
    for (std::size_t k = 0; k < b.size(); ++k) {
      const auto& f = b.frames[k];
      for (double v : f.aus()) CHECK((v >= 0.0 && v <= 5.0));
      for (double v : f.head_rotation()) CHECK((v >= -0.5 && v <= 0.5));
      if (k < s.size() && !s.frames[k].speaking()) CHECK(f == BehaviorFrame{});
    }
  }
}

TEST_CASE("invalid configs are rejected") {
  auto c = small();
  c.expressiveness = 1.5;
  CHECK_THROWS_AS(generate_corpus(c), Error);
  c = small();
  c.n_tracks = 0;
  CHECK_THROWS_AS(generate_corpus(c), Error);
  c = small();
  c.coupling_gain = 0;
  CHECK_THROWS_AS(generate_corpus(c), Error);
}
