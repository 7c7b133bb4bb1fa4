#pragma once

// Perceptual rating study: session randomization, forward-only page
// submission, an append-only NDJSON record store, descriptive statistics and
// a one-way repeated-measures ANOVA with paired follow-up comparisons.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "facesync/error.hpp"

namespace httplib {
class Server;
}

namespace facesync {

enum class Criterion { believability, coordination };

std::string to_string(Criterion c);
Criterion parse_criterion(std::string_view s);

inline constexpr int kScaleMin = 0;
inline constexpr int kScaleMax = 100;

struct StudyConfig {
  std::vector<std::string> sequences{"seq1", "seq2", "seq3", "seq4"};
  std::vector<std::string> conditions{"GTS", "m1", "m2", "m3"};
  std::string believability_question = "How human-like do the behaviors appear?";
  std::string coordination_question =
      "How well does the agent's behavior match the speech (rhythm and intonation)?";
  /// URI template; {sequence}, {condition} and {criterion} are substituted.
  std::string video_pattern = "/videos/{sequence}_{condition}_{criterion}.mp4";
  /// Explicit URIs keyed "sequence/condition/criterion"; they win over the pattern.
  std::map<std::string, std::string> videos;

  void validate() const;
  std::string video_uri(const std::string& sequence, const std::string& condition, Criterion c) const;
  std::size_t page_count() const { return 2 * sequences.size(); }
  std::size_t ratings_per_session() const { return page_count() * conditions.size(); }
};

struct RatingRecord {
  std::string participant_id;
  Criterion criterion = Criterion::believability;
  std::string sequence_id;
  std::string condition;
  int score = 0;
  std::size_t page_index = 0;
  std::size_t position = 0;  // on-screen slot the video was shown in
  std::int64_t timestamp_ms = 0;

  bool operator==(const RatingRecord&) const = default;
};

std::string to_ndjson_line(const RatingRecord& r);
RatingRecord parse_ndjson_line(std::string_view line);

struct StudyPage {
  Criterion criterion = Criterion::believability;
  std::string sequence_id;
  std::vector<std::string> condition_order;  // on-screen order

  bool muted() const { return criterion == Criterion::believability; }
};

struct SessionState {
  std::string participant_id;
  std::vector<StudyPage> pages;
  std::size_t page_index = 0;
  bool completed = false;
};

/// All believability pages first, then all coordination pages; sequence
/// order shuffled within each block and condition order shuffled per page.
SessionState create_session(const StudyConfig& config, std::mt19937_64& rng, std::string participant_id);

struct PageRating {
  std::string condition;
  int score = 0;
};

class StudyRejection : public Error {
 public:
  using Error::Error;
};

/// Thread-safe append-only store of rating records, one JSON object per line.
class RecordStore {
 public:
  explicit RecordStore(std::filesystem::path path);
  /// Writes all records in one append; either every line lands or none.
  void append(std::span<const RatingRecord> records);
  std::vector<RatingRecord> load() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
};

std::vector<RatingRecord> load_records(const std::filesystem::path& path);

/// Validates and persists one page of ratings, then advances the session.
/// Throws StudyRejection: "navigation locked" for a page already submitted,
/// otherwise a reason naming the missing, duplicate, unknown or out-of-range
/// rating. The session is unchanged on rejection.
std::vector<RatingRecord> submit_page(SessionState& session, std::size_t page_index,
                                      std::span<const PageRating> ratings, RecordStore& store,
                                      std::int64_t timestamp_ms);

// ------------------------------------------------------------- analysis

/// Keeps only participants with exactly `expected` records.
std::vector<RatingRecord> complete_sessions(std::span<const RatingRecord> records, std::size_t expected);

struct CellStats {
  Criterion criterion = Criterion::believability;
  std::string condition;
  std::size_t participants = 0;
  double mean = 0.0;
  double std = 0.0;
  bool empty = false;
};

/// Per-participant scores are first averaged over sequences, then the
/// sample mean and standard deviation are taken across participants.
std::vector<CellStats> descriptive_stats(std::span<const RatingRecord> records,
                                         std::span<const std::string> conditions);

struct PairwiseComparison {
  std::string a, b;
  double mean_difference = 0.0;  // mean(b - a)
  double t = 0.0;
  std::size_t df = 0;
  double p = 1.0;
  std::string significance;  // "**" p < .01, "*" p < .05, "ns"
};

struct AnovaResult {
  Criterion criterion = Criterion::believability;
  std::size_t participants = 0;
  double ss_conditions = 0.0, ss_subjects = 0.0, ss_error = 0.0, ss_total = 0.0;
  std::size_t df_conditions = 0, df_error = 0;
  double f = 0.0;
  double p = 1.0;
  std::vector<PairwiseComparison> pairwise;
  std::string note;
};

/// Participant x condition matrix of sequence-averaged scores. Throws
/// DataError listing every missing (participant, condition) cell.
std::vector<std::vector<double>> score_matrix(std::span<const RatingRecord> records, Criterion criterion,
                                              std::span<const std::string> conditions,
                                              std::vector<std::string>* participants = nullptr);

AnovaResult rm_anova(std::span<const RatingRecord> records, Criterion criterion,
                     std::span<const std::string> conditions);

/// Two-sided paired t-test on the differences b - a. Zero variance with a
/// nonzero mean difference is an exact difference: p = 0.
PairwiseComparison paired_comparison(std::span<const double> a, std::span<const double> b);

std::string significance_mark(double p);

struct StudyReport {
  std::vector<CellStats> cells;
  std::vector<AnovaResult> anova;
  std::size_t participants = 0;
  std::size_t excluded_participants = 0;
};

StudyReport analyze(std::span<const RatingRecord> records, const StudyConfig& config,
                    bool include_incomplete = false);
std::string format_report(const StudyReport& report, const StudyConfig& config);
std::string report_json(const StudyReport& report);

// -------------------------------------------------------------- service

struct ServiceResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// Request handling independent of the HTTP transport. Each session is
/// updated under its own lock; the store serializes appends.
class StudyService {
 public:
  StudyService(StudyConfig config, std::filesystem::path store_path, std::uint64_t seed);

  ServiceResponse create_session(const std::string& body);
  ServiceResponse current_page(const std::string& participant_id);
  ServiceResponse submit(const std::string& participant_id, std::size_t page_index, const std::string& body);
  ServiceResponse export_records();
  ServiceResponse report();

  /// Routes under /api plus an optional static mount at /videos.
  void bind(httplib::Server& server, const std::optional<std::filesystem::path>& video_dir = {});

  const StudyConfig& config() const { return config_; }

 private:
  struct Slot {
    std::mutex mutex;
    SessionState state;
  };
  std::shared_ptr<Slot> find(const std::string& participant_id);
  std::int64_t now_ms() const;

  StudyConfig config_;
  RecordStore store_;
  std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::mt19937_64 rng_;
};

}  // namespace facesync
