#include "facesync/pipeline.hpp"

#include <fstream>
#include <set>

#include <spdlog/spdlog.h>

namespace facesync {

namespace fs = std::filesystem;

void to_json(json& j, const RunPaths& p) {
  std::vector<std::string> corpora;
  for (const auto& d : p.corpus_dirs) corpora.push_back(d.string());
  j = json{{"corpus_dirs", corpora},
           {"tracks_dir", p.tracks_dir.string()},
           {"clips_dir", p.clips_dir.string()},
           {"checkpoints_dir", p.checkpoints_dir.string()},
           {"reports_dir", p.reports_dir.string()},
           {"records_store", p.records_store.string()},
           {"videos_dir", p.videos_dir.string()}};
}

void from_json(const json& j, RunPaths& p) {
  check_keys(j,
             {"corpus_dirs", "tracks_dir", "clips_dir", "checkpoints_dir", "reports_dir", "records_store",
              "videos_dir"},
             "paths");
  auto str = [&](const char* key, fs::path& out) {
    if (j.contains(key)) out = j.at(key).get<std::string>();
  };
  if (j.contains("corpus_dirs")) {
    p.corpus_dirs.clear();
    for (const auto& d : j.at("corpus_dirs")) p.corpus_dirs.emplace_back(d.get<std::string>());
  }
  str("tracks_dir", p.tracks_dir);
  str("clips_dir", p.clips_dir);
  str("checkpoints_dir", p.checkpoints_dir);
  str("reports_dir", p.reports_dir);
  str("records_store", p.records_store);
  str("videos_dir", p.videos_dir);
}

void to_json(json& j, const RunConfig& c) {
  j = json{{"synth", c.synth},
           {"preprocess", c.preprocess},
           {"arch", c.arch},
           {"train", c.train},
           {"study", c.study},
           {"paths", c.paths},
           {"seed", c.seed},
           {"test_fraction", c.test_fraction},
           {"conditions", c.conditions},
           {"evaluate_corpus", c.evaluate_corpus}};
}

void from_json(const json& j, RunConfig& c) {
  check_keys(j,
             {"synth", "preprocess", "arch", "train", "study", "paths", "seed", "test_fraction", "conditions",
              "evaluate_corpus"},
             "config");
  try {
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    c.synth.seed = c.seed;
    c.train.seed = c.seed;
    if (j.contains("synth")) j.at("synth").get_to(c.synth);
    if (j.contains("preprocess")) j.at("preprocess").get_to(c.preprocess);
    if (j.contains("arch")) j.at("arch").get_to(c.arch);
    if (j.contains("train")) j.at("train").get_to(c.train);
    if (j.contains("study")) j.at("study").get_to(c.study);
    if (j.contains("paths")) j.at("paths").get_to(c.paths);
    if (j.contains("test_fraction")) c.test_fraction = j.at("test_fraction").get<double>();
    if (j.contains("conditions")) c.conditions = j.at("conditions").get<std::map<std::string, std::string>>();
    if (j.contains("evaluate_corpus")) c.evaluate_corpus = j.at("evaluate_corpus").get<std::string>();
  } catch (const json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  }
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  RunConfig c = j.get<RunConfig>();
  const fs::path base = path.parent_path();
  auto resolve = [&](fs::path& p) {
    if (!p.empty() && p.is_relative()) p = base / p;
  };
  for (auto& d : c.paths.corpus_dirs) resolve(d);
  resolve(c.paths.tracks_dir);
  resolve(c.paths.clips_dir);
  resolve(c.paths.checkpoints_dir);
  resolve(c.paths.reports_dir);
  resolve(c.paths.records_store);
  resolve(c.paths.videos_dir);
  for (auto& [name, ckpt] : c.conditions) {
    fs::path p = ckpt;
    resolve(p);
    if (!ckpt.empty()) ckpt = p.string();
  }
  c.synth.validate();
  c.preprocess.outliers.validate();
  c.arch.validate();
  c.train.validate();
  c.study.validate();
  if (c.test_fraction < 0.0 || c.test_fraction >= 1.0) throw DataError("config: test_fraction must lie in [0, 1)");
  return c;
}

ClipPair normalize_clip(const ClipPair& clip, const NormStats& stats) {
  ClipPair out = clip;
  out.speech = normalize(SpeechTrack{clip.speech, kFrameRate, clip.source_id, {}}, stats).frames;
  out.behavior = normalize(BehaviorTrack{clip.behavior, kFrameRate, clip.source_id, {}}, stats).frames;
  return out;
}

namespace {

void require_dir(const fs::path& dir, const std::string& what) {
  if (!fs::is_directory(dir)) throw DataError(what + " directory not found: " + dir.string());
}

void require_file(const fs::path& file, const std::string& what) {
  if (!fs::is_regular_file(file)) throw DataError(what + " not found: " + file.string());
}

struct LoadedTrack {
  CorpusEntry entry;
  std::vector<RawBehaviorRow> behavior;
  SpeechTrack speech;
};

LoadedTrack load_track(const fs::path& dir, const CorpusEntry& e) {
  LoadedTrack t{e, parse_openface_csv(dir / (e.source_id + ".openface.csv")), {}};
  const auto speech = parse_opensmile_csv(dir / (e.source_id + ".egemaps.csv"));
  const auto turns = read_turns(dir / (e.source_id + ".turns.csv"));
  t.speech = speech_track(speech, turns);
  t.speech.source_id = e.source_id;
  t.speech.role = e.role;
  align_lengths(t.speech, t.behavior);
  return t;
}

}  // namespace

SynthSummary run_synth(const SynthConfig& config, const fs::path& out_dir) {
  const auto tracks = generate_corpus(config);
  write_corpus(out_dir, config, tracks);
  return {tracks.size()};
}

IngestSummary run_ingest(const std::vector<fs::path>& corpus_dirs, const fs::path& out_dir) {
  IngestSummary s;
  fs::create_directories(out_dir);
  for (const auto& dir : corpus_dirs) {
    require_dir(dir, "corpus");
    for (const auto& e : read_corpus_manifest(dir)) {
      const auto t = load_track(dir, e);
      BehaviorTrack b = behavior_track(t.behavior);
      b.source_id = e.source_id;
      b.role = e.role;
      write_speech_csv(out_dir / (e.source_id + ".speech.csv"), t.speech);
      write_behavior_csv(out_dir / (e.source_id + ".behavior.csv"), b);
      ++s.tracks;
      s.frames += t.speech.size();
    }
  }
  return s;
}

PreprocessSummary run_preprocess(const std::vector<fs::path>& corpus_dirs, const PreprocessOptions& options,
                                 double test_fraction, std::uint64_t seed, const fs::path& clips_dir) {
  if (corpus_dirs.empty()) throw DataError("no corpus directories given");
  ClipStore store;
  std::set<std::string> ids;
  for (const auto& dir : corpus_dirs) {
    require_dir(dir, "corpus");
    const auto entries = read_corpus_manifest(dir);
    std::vector<std::string> interactions;
    for (const auto& e : entries) interactions.push_back(e.interaction);
    const auto split = split_interactions(interactions, test_fraction, seed);
    for (const auto& e : entries) {
      const auto t = load_track(dir, e);
      const BehaviorTrack behavior = clean_behavior(t.behavior, t.speech, options);
      for (auto& clip : segment(t.speech, behavior, options.segment_length, options.segment_stride)) {
        ClipRecord rec;
        rec.clip_id = e.corpus + "_" + e.source_id + "_" + std::to_string(clip.start_frame);
        if (!ids.insert(rec.clip_id).second) throw DataError("duplicate clip id " + rec.clip_id);
        rec.source_id = e.source_id;
        rec.interaction = e.interaction;
        rec.corpus = e.corpus;
        rec.split = split.at(e.interaction);
        rec.role = e.role;
        rec.clip = std::move(clip);
        store.clips.push_back(std::move(rec));
      }
    }
  }
  std::vector<SpeechTrack> speech;
  std::vector<BehaviorTrack> behavior;
  PreprocessSummary s;
  for (const auto& rec : store.clips) {
    if (rec.split != "train") {
      ++s.test_clips;
      continue;
    }
    ++s.train_clips;
    speech.push_back({rec.clip.speech, kFrameRate, rec.clip_id, rec.role});
    behavior.push_back({rec.clip.behavior, kFrameRate, rec.clip_id, rec.role});
  }
  if (speech.empty()) throw DataError("preprocess produced no training clips");
  store.stats = compute_norm_stats(speech, behavior);
  write_clip_store(clips_dir, store);
  return s;
}

TrainSummary run_train(const ArchConfig& arch, const TrainConfig& config, const fs::path& clips_dir,
                       const fs::path& checkpoint_dir) {
  require_dir(clips_dir, "clip store");
  const ClipStore store = read_clip_store(clips_dir);
  std::vector<ClipPair> clips;
  for (const auto* rec : store.select("train")) clips.push_back(normalize_clip(rec->clip, store.stats));
  Trainer trainer(arch, config, store.stats, std::move(clips));
  TrainOutputs out;
  out.loss_log = checkpoint_dir / "loss_log.csv";
  out.checkpoint_dir = checkpoint_dir;
  TrainSummary s;
  s.losses = trainer.run(out);
  s.final_checkpoint = checkpoint_dir / "final.ckpt";
  return s;
}

namespace {

BehaviorTrack generate_track(Generator& gen, const NormStats& stats, const SpeechTrack& physical,
                             std::mt19937_64& rng) {
  const SpeechTrack norm = normalize(physical, stats);
  BehaviorTrack out{generate_behavior(gen, norm.frames, rng), kFrameRate, physical.source_id, physical.role};
  return denormalize(out, stats);
}

}  // namespace

std::size_t run_generate(const fs::path& checkpoint, const fs::path& speech_csv, const fs::path& out_csv,
                         std::uint64_t seed) {
  require_file(checkpoint, "checkpoint");
  require_file(speech_csv, "speech file");
  const CheckpointData data = read_checkpoint(checkpoint);
  auto gen = restore_generator(data);
  const SpeechTrack speech = read_speech_csv(speech_csv);
  if (speech.empty()) throw DataError(speech_csv.string() + ": no speech frames");
  std::mt19937_64 rng(seed);
  const BehaviorTrack out = generate_track(*gen, data.stats, speech, rng);
  if (out_csv.has_parent_path()) fs::create_directories(out_csv.parent_path());
  write_behavior_csv(out_csv, out);
  return out.size();
}

EvaluateSummary run_evaluate(const fs::path& clips_dir, const std::map<std::string, std::string>& conditions,
                             const std::string& corpus, std::uint64_t seed, const fs::path& reports_dir) {
  require_dir(clips_dir, "clip store");
  const ClipStore store = read_clip_store(clips_dir);
  TrackSet truth;
  std::map<std::string, SpeechTrack> speech;
  for (const auto* rec : store.select("test")) {
    if (!corpus.empty() && rec->corpus != corpus) continue;
    truth[rec->clip_id] = BehaviorTrack{rec->clip.behavior, kFrameRate, rec->clip_id, rec->role};
    speech[rec->clip_id] = SpeechTrack{rec->clip.speech, kFrameRate, rec->clip_id, rec->role};
  }
  if (truth.empty())
    throw DataError("no test clips" + (corpus.empty() ? std::string() : " for corpus " + corpus) + " in " +
                    clips_dir.string());

  std::vector<std::pair<std::string, TrackSet>> generated;
  for (const auto& [name, ckpt] : conditions) {
    if (name == "GTS") continue;
    if (ckpt.empty()) throw DataError("condition " + name + " has no checkpoint");
    require_file(ckpt, "checkpoint for condition " + name);
    const CheckpointData data = read_checkpoint(ckpt);
    auto gen = restore_generator(data);
    std::mt19937_64 rng(seed);
    TrackSet tracks;
    for (const auto& [id, s] : speech) tracks[id] = generate_track(*gen, data.stats, s, rng);
    generated.emplace_back(name, std::move(tracks));
    spdlog::info("evaluated condition {} on {} clips", name, speech.size());
  }

  EvaluateSummary s;
  s.report = build_report(generated, truth);
  fs::create_directories(reports_dir);
  s.csv = reports_dir / "objective_report.csv";
  s.table = reports_dir / "objective_report.txt";
  std::ofstream csv(s.csv);
  write_report_csv(csv, s.report);
  std::ofstream txt(s.table);
  txt << format_report_table(s.report);
  if (!csv || !txt) throw DataError("cannot write reports to " + reports_dir.string());
  return s;
}

}  // namespace facesync
