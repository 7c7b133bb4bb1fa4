// facesync: command-line entry point for every pipeline stage.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "facesync/pipeline.hpp"

namespace fs = std::filesystem;
using namespace facesync;

namespace {

void setup_logging() {
  spdlog::set_level(spdlog::level::info);
  if (const char* lvl = std::getenv("FACESYNC_LOG")) spdlog::set_level(spdlog::level::from_str(lvl));
}

template <class F>
int stage(const std::string& name, F&& f) {
  try {
    f();
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "facesync " << name << ": " << e.what() << '\n';
    return 1;
  }
}

httplib::Server* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Speech-driven facial behavior generation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Seed overriding the configuration");
  app.add_option("--out", out, "Output directory for the stage");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  std::optional<std::size_t> n_tracks;
  std::optional<double> expressiveness;
  std::string corpus_name;
  synth->add_option("--tracks", n_tracks, "Number of tracks");
  synth->add_option("--expressiveness", expressiveness, "Behavior amplitude scale");
  synth->add_option("--corpus-name", corpus_name, "Corpus tag written to the manifest");

  auto* ingest = app.add_subcommand("ingest", "Convert extractor exports to canonical tracks");
  std::vector<std::string> corpus_dirs;
  ingest->add_option("--corpus", corpus_dirs, "Corpus directories (manifest.csv + raw exports)");

  auto* preprocess = app.add_subcommand("preprocess", "Clean, segment, split and normalize into a clip store");
  preprocess->add_option("--corpus", corpus_dirs, "Corpus directories");

  auto* train = app.add_subcommand("train", "Train generator and discriminator on a clip store");
  std::string clips_dir;
  std::optional<std::size_t> epochs;
  std::optional<double> mismatch;
  train->add_option("--clips", clips_dir, "Clip store directory");
  train->add_option("--epochs", epochs, "Epoch count");
  train->add_option("--mismatch-fraction", mismatch, "Share of fake critic inputs that are mismatch pairs");

  auto* generate = app.add_subcommand("generate", "Generate behavior for a speech track");
  std::string checkpoint, speech_csv, output;
  generate->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  generate->add_option("--speech", speech_csv, "Speech CSV (canonical 25 fps layout)")->required();
  generate->add_option("--output", output, "Output behavior CSV (default: <out>/<speech name>.behavior.csv)");

  auto* evaluate = app.add_subcommand("evaluate", "Objective metrics of generated behavior against test clips");
  std::vector<std::string> conditions;
  std::string eval_corpus;
  evaluate->add_option("--clips", clips_dir, "Clip store directory");
  evaluate->add_option("--condition", conditions, "NAME=CHECKPOINT (repeatable; GTS needs no checkpoint)");
  evaluate->add_option("--corpus", eval_corpus, "Only test clips of this corpus");

  auto* study = app.add_subcommand("study", "Perceptual study service and analysis");
  study->require_subcommand(1);
  study->fallthrough();
  auto* serve = study->add_subcommand("serve", "Run the rating service");
  std::string host = "127.0.0.1", videos, records;
  int port = 8080;
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port");
  serve->add_option("--videos", videos, "Directory served under /videos");
  serve->add_option("--records", records, "NDJSON record store");
  auto* analyze = study->add_subcommand("analyze", "Descriptive statistics and repeated-measures ANOVA");
  bool include_incomplete = false;
  analyze->add_option("--records", records, "NDJSON record store");
  analyze->add_flag("--include-incomplete", include_incomplete, "Keep participants with unfinished sessions");

  CLI11_PARSE(app, argc, argv);

  RunConfig cfg;
  if (!config_path.empty()) {
    const int rc = stage("config", [&] { cfg = load_run_config(config_path); });
    if (rc) return rc;
  }
  if (seed) {
    cfg.seed = *seed;
    cfg.synth.seed = *seed;
    cfg.train.seed = *seed;
  }
  std::vector<fs::path> corpora(corpus_dirs.begin(), corpus_dirs.end());
  if (corpora.empty()) corpora = cfg.paths.corpus_dirs;
  auto out_or = [&](const fs::path& dflt) { return out.empty() ? dflt : fs::path(out); };

  if (*synth) {
    return stage("synth", [&] {
      if (n_tracks) cfg.synth.n_tracks = *n_tracks;
      if (expressiveness) cfg.synth.expressiveness = *expressiveness;
      if (!corpus_name.empty()) cfg.synth.corpus = corpus_name;
      cfg.synth.validate();
      const fs::path dir = out_or(corpora.front());
      const auto s = run_synth(cfg.synth, dir);
      std::cout << "synth: " << s.tracks << " tracks (corpus " << cfg.synth.corpus << ") -> " << dir.string()
                << '\n';
    });
  }
  if (*ingest) {
    return stage("ingest", [&] {
      const fs::path dir = out_or(cfg.paths.tracks_dir);
      const auto s = run_ingest(corpora, dir);
      std::cout << "ingest: " << s.tracks << " tracks, " << s.frames << " frames -> " << dir.string() << '\n';
    });
  }
  if (*preprocess) {
    return stage("preprocess", [&] {
      const fs::path dir = out_or(cfg.paths.clips_dir);
      const auto s = run_preprocess(corpora, cfg.preprocess, cfg.test_fraction, cfg.seed, dir);
      std::cout << "preprocess: " << s.train_clips << " train clips, " << s.test_clips << " test clips -> "
                << dir.string() << '\n';
    });
  }
  if (*train) {
    return stage("train", [&] {
      if (epochs) cfg.train.epochs = *epochs;
      if (mismatch) cfg.train.mismatch_fraction = *mismatch;
      const fs::path dir = out_or(cfg.paths.checkpoints_dir);
      const auto s = run_train(cfg.arch, cfg.train, clips_dir.empty() ? cfg.paths.clips_dir : fs::path(clips_dir), dir);
      const LossRecord* last_d = nullptr;
      const LossRecord* last_g = nullptr;
      for (const auto& r : s.losses) (r.discriminator ? last_d : last_g) = &r;
      std::cout << "train: " << s.losses.size() << " steps";
      if (last_d) std::cout << ", L_D " << last_d->critic;
      if (last_g) std::cout << ", L_G " << last_g->l_g;
      std::cout << " -> " << s.final_checkpoint.string() << '\n';
    });
  }
  if (*generate) {
    return stage("generate", [&] {
      fs::path target = output;
      if (target.empty())
        target = out_or(".") / (fs::path(speech_csv).stem().string() + ".behavior.csv");
      const auto n = run_generate(checkpoint, speech_csv, target, cfg.seed);
      std::cout << "generate: " << n << " frames -> " << target.string() << '\n';
    });
  }
  if (*evaluate) {
    return stage("evaluate", [&] {
      auto conds = cfg.conditions;
      if (!conditions.empty()) {
        conds.clear();
        for (const auto& c : conditions) {
          const auto eq = c.find('=');
          if (eq == std::string::npos) conds[c] = "";
          else conds[c.substr(0, eq)] = c.substr(eq + 1);
        }
      }
      const fs::path dir = out_or(cfg.paths.reports_dir);
      const auto s = run_evaluate(clips_dir.empty() ? cfg.paths.clips_dir : fs::path(clips_dir), conds,
                                  eval_corpus.empty() ? cfg.evaluate_corpus : eval_corpus, cfg.seed, dir);
      std::cout << format_report_table(s.report) << "evaluate: report -> " << s.csv.string() << '\n';
    });
  }
  if (*serve) {
    return stage("study serve", [&] {
      const fs::path store = records.empty() ? cfg.paths.records_store : fs::path(records);
      StudyService service(cfg.study, store, cfg.seed);
      httplib::Server server;
      std::optional<fs::path> video_dir;
      if (!videos.empty()) video_dir = videos;
      else if (!cfg.paths.videos_dir.empty()) video_dir = cfg.paths.videos_dir;
      service.bind(server, video_dir);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      spdlog::info("study service on http://{}:{} (records: {})", host, port, store.string());
      if (!server.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
      std::cout << "study serve: stopped\n";
    });
  }
  if (*analyze) {
    return stage("study analyze", [&] {
      const fs::path store = records.empty() ? cfg.paths.records_store : fs::path(records);
      if (!fs::exists(store)) throw DataError("record store not found: " + store.string());
      const auto report = facesync::analyze(load_records(store), cfg.study, include_incomplete);
      const fs::path dir = out_or(cfg.paths.reports_dir);
      fs::create_directories(dir);
      const std::string text = format_report(report, cfg.study);
      std::ofstream(dir / "study_report.txt") << text;
      std::ofstream(dir / "study_report.json") << report_json(report) << '\n';
      std::cout << text << "study analyze: report -> " << (dir / "study_report.txt").string() << '\n';
    });
  }
  return 0;
}
