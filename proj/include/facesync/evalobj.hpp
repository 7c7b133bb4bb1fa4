#pragma once

// Objective metrics: per-feature DTW against ground truth, average
// acceleration and jerk of the eye and head channels, and comparison
// reports over named conditions.

#include <array>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "facesync/domain.hpp"

namespace facesync {

/// Minimal cumulative |a_i - b_j| over monotone alignments with match,
/// insertion and deletion steps.
double dtw_distance(std::span<const double> a, std::span<const double> b);

/// Row-major frames x dim matrices; DTW per column, then the column mean.
double dtw_multichannel(std::span<const double> a, std::size_t a_dim, std::span<const double> b,
                        std::size_t b_dim);
std::vector<double> dtw_per_channel(std::span<const double> a, std::size_t a_dim, std::span<const double> b,
                                    std::size_t b_dim);

double dtw_track(const BehaviorTrack& a, const BehaviorTrack& b);

inline constexpr std::array<std::size_t, 9> kMotionChannels{0, 1, 2, 3, 4, 5, kHeadOffset, kHeadOffset + 1,
                                                            kHeadOffset + 2};

struct MotionStats {
  double acceleration = 0.0;
  double jerk = 0.0;
  std::array<double, 9> channel_acceleration{};
  std::array<double, 9> channel_jerk{};
};

/// Acceleration by central second difference (times fps^2) on interior
/// frames, jerk by forward third difference (times fps^3); mean absolute
/// value over time per channel, then averaged over both gaze direction
/// vectors and head rotation. Needs at least 4 frames.
MotionStats motion_stats(const BehaviorTrack& track);

/// The same on one scalar channel sampled at `fps`.
std::pair<double, double> motion_stats(std::span<const double> q, double fps);

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
};

Summary summarize(std::span<const double> v);

struct ConditionMetrics {
  std::string name;
  Summary dtw, acceleration, jerk;
  std::map<std::string, double> clip_dtw;
};

struct MetricReport {
  ConditionMetrics ground_truth;  // named "GTS"; its DTW is the self-distance 0
  std::vector<ConditionMetrics> conditions;
  std::vector<std::string> clip_ids;
};

using TrackSet = std::map<std::string, BehaviorTrack>;  // clip id -> track

/// Every condition must cover exactly the ground-truth clip ids.
MetricReport build_report(const std::vector<std::pair<std::string, TrackSet>>& conditions,
                          const TrackSet& ground_truth);

/// Wide delimited layout: metric,GTS_mean,GTS_std,<cond>_mean,<cond>_std,...
void write_report_csv(std::ostream& os, const MetricReport& report);
/// Plain-text tables: DTW over the conditions, then acceleration and jerk
/// over GTS and the conditions.
std::string format_report_table(const MetricReport& report);

}  // namespace facesync
