#include "facesync/evalobj.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace facesync {

double dtw_distance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DataError("dtw: empty sequence");
  const std::size_t m = b.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = inf;
    for (std::size_t j = 1; j <= m; ++j)
      cur[j] = std::abs(a[i - 1] - b[j - 1]) + std::min({prev[j - 1], prev[j], cur[j - 1]});
    std::swap(prev, cur);
  }
  return prev[m];
}

std::vector<double> dtw_per_channel(std::span<const double> a, std::size_t a_dim, std::span<const double> b,
                                    std::size_t b_dim) {
  if (a_dim != b_dim)
    throw ShapeError("dtw: feature dimensions differ (" + std::to_string(a_dim) + " vs " + std::to_string(b_dim) +
                     ")");
  if (a_dim == 0 || a.size() % a_dim != 0 || b.size() % b_dim != 0)
    throw ShapeError("dtw: data is not a whole number of frames");
  const std::size_t na = a.size() / a_dim, nb = b.size() / b_dim;
  std::vector<double> out(a_dim), ca(na), cb(nb);
  for (std::size_t c = 0; c < a_dim; ++c) {
    for (std::size_t t = 0; t < na; ++t) ca[t] = a[t * a_dim + c];
    for (std::size_t t = 0; t < nb; ++t) cb[t] = b[t * b_dim + c];
    out[c] = dtw_distance(ca, cb);
  }
  return out;
}

double dtw_multichannel(std::span<const double> a, std::size_t a_dim, std::span<const double> b,
                        std::size_t b_dim) {
  const auto per = dtw_per_channel(a, a_dim, b, b_dim);
  double s = 0.0;
  for (double v : per) s += v;
  return s / static_cast<double>(per.size());
}

namespace {
std::vector<double> flatten(const BehaviorTrack& t) {
  std::vector<double> v;
  v.reserve(t.frames.size() * kBehaviorDim);
  for (const auto& f : t.frames) v.insert(v.end(), f.values().begin(), f.values().end());
  return v;
}
}  // namespace

double dtw_track(const BehaviorTrack& a, const BehaviorTrack& b) {
  return dtw_multichannel(flatten(a), kBehaviorDim, flatten(b), kBehaviorDim);
}

std::pair<double, double> motion_stats(std::span<const double> q, double fps) {
  const std::size_t n = q.size();
  if (n < 4) throw DataError("motion stats: track too short (" + std::to_string(n) + " frames, need 4)");
  if (!(fps > 0.0)) throw DataError("motion stats: frame rate must be positive");
  // Repeated first differences: exact zeros for constant stretches.
  std::vector<double> d1(n - 1), d2(n - 2);
  for (std::size_t t = 0; t + 1 < n; ++t) d1[t] = q[t + 1] - q[t];
  for (std::size_t t = 0; t + 2 < n; ++t) d2[t] = d1[t + 1] - d1[t];
  double acc = 0.0, jerk = 0.0;
  for (double v : d2) acc += std::abs(v);
  for (std::size_t t = 0; t + 3 < n; ++t) jerk += std::abs(d2[t + 1] - d2[t]);
  return {acc * fps * fps / static_cast<double>(n - 2), jerk * fps * fps * fps / static_cast<double>(n - 3)};
}

MotionStats motion_stats(const BehaviorTrack& track) {
  const std::size_t n = track.frames.size();
  if (n < 4) throw DataError("motion stats: track too short (" + std::to_string(n) + " frames, need 4)");
  MotionStats s;
  std::vector<double> q(n);
  for (std::size_t k = 0; k < kMotionChannels.size(); ++k) {
    for (std::size_t t = 0; t < n; ++t) q[t] = track.frames[t][kMotionChannels[k]];
    const auto [a, j] = motion_stats(q, track.frame_rate);
    s.channel_acceleration[k] = a;
    s.channel_jerk[k] = j;
    s.acceleration += a / kMotionChannels.size();
    s.jerk += j / kMotionChannels.size();
  }
  return s;
}

Summary summarize(std::span<const double> v) {
  if (v.empty()) throw DataError("summary of an empty sample");
  Summary s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

namespace {

ConditionMetrics evaluate(const std::string& name, const TrackSet& tracks, const TrackSet& truth) {
  ConditionMetrics m;
  m.name = name;
  std::vector<double> dtw, acc, jerk;
  for (const auto& [id, gt] : truth) {
    const auto& tr = tracks.at(id);
    const double d = dtw_track(tr, gt);
    m.clip_dtw[id] = d;
    dtw.push_back(d);
    const auto ms = motion_stats(tr);
    acc.push_back(ms.acceleration);
    jerk.push_back(ms.jerk);
  }
  m.dtw = summarize(dtw);
  m.acceleration = summarize(acc);
  m.jerk = summarize(jerk);
  return m;
}

}  // namespace

MetricReport build_report(const std::vector<std::pair<std::string, TrackSet>>& conditions,
                          const TrackSet& ground_truth) {
  if (ground_truth.empty()) throw DataError("report: no ground-truth clips");
  for (const auto& [name, tracks] : conditions) {
    std::vector<std::string> missing, extra;
    for (const auto& kv : ground_truth)
      if (!tracks.count(kv.first)) missing.push_back(kv.first);
    for (const auto& kv : tracks)
      if (!ground_truth.count(kv.first)) extra.push_back(kv.first);
    if (!missing.empty() || !extra.empty()) {
      std::string msg = "report: condition " + name + " does not match the ground-truth clips;";
      if (!missing.empty()) {
        msg += " missing:";
        for (const auto& id : missing) msg += " " + id;
      }
      if (!extra.empty()) {
        msg += " unexpected:";
        for (const auto& id : extra) msg += " " + id;
      }
      throw DataError(msg);
    }
  }
  MetricReport r;
  for (const auto& kv : ground_truth) r.clip_ids.push_back(kv.first);
  r.ground_truth = evaluate("GTS", ground_truth, ground_truth);
  for (const auto& [name, tracks] : conditions) r.conditions.push_back(evaluate(name, tracks, ground_truth));
  return r;
}

namespace {
std::string num(double v, const char* fmt = "%.6f") {
  char buf[48];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}
}  // namespace

void write_report_csv(std::ostream& os, const MetricReport& report) {
  std::vector<const ConditionMetrics*> cols{&report.ground_truth};
  for (const auto& c : report.conditions) cols.push_back(&c);
  os << "metric";
  for (const auto* c : cols) os << ',' << c->name << "_mean," << c->name << "_std";
  os << '\n';
  auto row = [&](const char* metric, Summary ConditionMetrics::*field) {
    os << metric;
    for (const auto* c : cols) os << ',' << num((c->*field).mean) << ',' << num((c->*field).std);
    os << '\n';
  };
  row("DTW", &ConditionMetrics::dtw);
  row("Acc.", &ConditionMetrics::acceleration);
  row("Jerk", &ConditionMetrics::jerk);
}

std::string format_report_table(const MetricReport& report) {
  std::ostringstream os;
  auto header = [&](const std::vector<const ConditionMetrics*>& cols) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-6s", "");
    os << buf;
    for (const auto* c : cols) {
      std::snprintf(buf, sizeof buf, " %21s", c->name.c_str());
      os << buf;
    }
    os << '\n';
    std::snprintf(buf, sizeof buf, "%-6s", "");
    os << buf;
    for (std::size_t i = 0; i < cols.size(); ++i) {
      std::snprintf(buf, sizeof buf, " %10s %10s", "mean", "std");
      os << buf;
    }
    os << '\n';
  };
  auto row = [&](const char* metric, const std::vector<const ConditionMetrics*>& cols,
                 Summary ConditionMetrics::*field) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-6s", metric);
    os << buf;
    for (const auto* c : cols) {
      std::snprintf(buf, sizeof buf, " %10.2f %10.2f", (c->*field).mean, (c->*field).std);
      os << buf;
    }
    os << '\n';
  };

  std::vector<const ConditionMetrics*> generated;
  for (const auto& c : report.conditions) generated.push_back(&c);
  std::vector<const ConditionMetrics*> all{&report.ground_truth};
  all.insert(all.end(), generated.begin(), generated.end());

  os << "Distance to GTS (" << report.clip_ids.size() << " clips)\n";
  if (!generated.empty()) {
    header(generated);
    row("DTW", generated, &ConditionMetrics::dtw);
  }
  os << "\nAcceleration and jerk\n";
  header(all);
  row("Acc.", all, &ConditionMetrics::acceleration);
  row("Jerk", all, &ConditionMetrics::jerk);
  return os.str();
}

}  // namespace facesync
