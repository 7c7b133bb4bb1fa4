#pragma once

// Stage runners behind the command-line tool. Each takes the run
// configuration plus explicit paths and writes its outputs to disk.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "facesync/config.hpp"
#include "facesync/evalobj.hpp"
#include "facesync/netarch.hpp"
#include "facesync/preprocess.hpp"
#include "facesync/study.hpp"
#include "facesync/synthcorpus.hpp"
#include "facesync/training.hpp"

namespace facesync {

struct RunPaths {
  std::vector<std::filesystem::path> corpus_dirs{"corpus"};
  std::filesystem::path tracks_dir = "tracks";
  std::filesystem::path clips_dir = "clips";
  std::filesystem::path checkpoints_dir = "checkpoints";
  std::filesystem::path reports_dir = "reports";
  std::filesystem::path records_store = "study/records.ndjson";
  std::filesystem::path videos_dir;
};

struct RunConfig {
  SynthConfig synth;
  PreprocessOptions preprocess;
  ArchConfig arch;
  TrainConfig train;
  StudyConfig study;
  RunPaths paths;
  std::uint64_t seed = 1;
  double test_fraction = 0.2;
  /// Evaluation conditions: name -> checkpoint. "GTS" needs no checkpoint.
  std::map<std::string, std::string> conditions;
  /// Restrict evaluation to test clips of this corpus (empty: all).
  std::string evaluate_corpus;
};

void to_json(json& j, const RunPaths& p);
void from_json(const json& j, RunPaths& p);
void to_json(json& j, const RunConfig& c);
void from_json(const json& j, RunConfig& c);

/// Relative paths in the file are resolved against the file's directory.
RunConfig load_run_config(const std::filesystem::path& path);

/// Copy of the clip with every frame min-max normalized.
ClipPair normalize_clip(const ClipPair& clip, const NormStats& stats);

struct SynthSummary {
  std::size_t tracks = 0;
};
SynthSummary run_synth(const SynthConfig& config, const std::filesystem::path& out_dir);

struct IngestSummary {
  std::size_t tracks = 0;
  std::size_t frames = 0;
};
/// Raw extractor exports listed in each corpus manifest -> canonical 25 fps tracks.
IngestSummary run_ingest(const std::vector<std::filesystem::path>& corpus_dirs, const std::filesystem::path& out_dir);

struct PreprocessSummary {
  std::size_t train_clips = 0;
  std::size_t test_clips = 0;
};
/// Cleans and segments every track, splits each corpus by interaction and
/// computes normalization statistics over the training clips.
PreprocessSummary run_preprocess(const std::vector<std::filesystem::path>& corpus_dirs,
                                 const PreprocessOptions& options, double test_fraction, std::uint64_t seed,
                                 const std::filesystem::path& clips_dir);

struct TrainSummary {
  std::vector<LossRecord> losses;
  std::filesystem::path final_checkpoint;
};
TrainSummary run_train(const ArchConfig& arch, const TrainConfig& config, const std::filesystem::path& clips_dir,
                       const std::filesystem::path& checkpoint_dir);

/// Speech CSV in the canonical 25 fps layout -> denormalized behavior CSV of equal length.
std::size_t run_generate(const std::filesystem::path& checkpoint, const std::filesystem::path& speech_csv,
                         const std::filesystem::path& out_csv, std::uint64_t seed);

struct EvaluateSummary {
  MetricReport report;
  std::filesystem::path csv, table;
};
EvaluateSummary run_evaluate(const std::filesystem::path& clips_dir,
                             const std::map<std::string, std::string>& conditions, const std::string& corpus,
                             std::uint64_t seed, const std::filesystem::path& reports_dir);

}  // namespace facesync
