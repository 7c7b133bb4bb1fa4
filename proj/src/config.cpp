#include "facesync/config.hpp"

#include "facesync/netarch.hpp"
#include "facesync/preprocess.hpp"
#include "facesync/study.hpp"
#include "facesync/synthcorpus.hpp"
#include "facesync/training.hpp"

namespace facesync {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& section) {
  if (!j.is_object()) throw DataError(section + ": expected an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed) known = known || item.key() == k;
    if (!known) throw DataError(section + ": unknown key '" + item.key() + "'");
  }
}

namespace {

template <class T>
void get(const json& j, const char* key, T& out, const std::string& section) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    it->get_to(out);
  } catch (const json::exception& e) {
    throw DataError(section + "." + key + ": " + e.what());
  }
}

}  // namespace

void to_json(json& j, const ArchConfig& c) {
  j = json{{"clip_length", c.clip_length},
           {"encoder_channels", c.encoder_channels},
           {"decoder_channels", c.decoder_channels},
           {"kernel_size", c.kernel_size},
           {"dropout", c.dropout},
           {"pool_factor", c.pool_factor},
           {"upsample_factor", c.upsample_factor},
           {"noise_length", c.noise_length},
           {"noise_channels", c.noise_channels},
           {"head_channels", c.head_channels},
           {"disc_embed_channels", c.disc_embed_channels},
           {"disc_channels", c.disc_channels},
           {"disc_sigmoid", c.disc_sigmoid}};
}

void from_json(const json& j, ArchConfig& c) {
  const std::string s = "arch";
  check_keys(j,
             {"clip_length", "encoder_channels", "decoder_channels", "kernel_size", "dropout", "pool_factor",
              "upsample_factor", "noise_length", "noise_channels", "head_channels", "disc_embed_channels",
              "disc_channels", "disc_sigmoid"},
             s);
  get(j, "clip_length", c.clip_length, s);
  get(j, "encoder_channels", c.encoder_channels, s);
  get(j, "decoder_channels", c.decoder_channels, s);
  get(j, "kernel_size", c.kernel_size, s);
  get(j, "dropout", c.dropout, s);
  get(j, "pool_factor", c.pool_factor, s);
  get(j, "upsample_factor", c.upsample_factor, s);
  get(j, "noise_length", c.noise_length, s);
  get(j, "noise_channels", c.noise_channels, s);
  get(j, "head_channels", c.head_channels, s);
  get(j, "disc_embed_channels", c.disc_embed_channels, s);
  get(j, "disc_channels", c.disc_channels, s);
  get(j, "disc_sigmoid", c.disc_sigmoid, s);
}

void to_json(json& j, const SynthConfig& c) {
  j = json{{"seed", c.seed},
           {"n_tracks", c.n_tracks},
           {"duration_s", c.duration_s},
           {"turn_length_s", c.turn_length_s},
           {"coupling_gain", c.coupling_gain},
           {"expressiveness", c.expressiveness},
           {"corpus", c.corpus}};
}

void from_json(const json& j, SynthConfig& c) {
  const std::string s = "synth";
  check_keys(j, {"seed", "n_tracks", "duration_s", "turn_length_s", "coupling_gain", "expressiveness", "corpus"},
             s);
  get(j, "seed", c.seed, s);
  get(j, "n_tracks", c.n_tracks, s);
  get(j, "duration_s", c.duration_s, s);
  get(j, "turn_length_s", c.turn_length_s, s);
  get(j, "coupling_gain", c.coupling_gain, s);
  get(j, "expressiveness", c.expressiveness, s);
  get(j, "corpus", c.corpus, s);
}

void to_json(json& j, const OutlierPolicy& c) {
  j = json{{"min_confidence", c.min_confidence},
           {"max_rotation_jump", c.max_rotation_jump},
           {"require_success", c.require_success}};
}

void from_json(const json& j, OutlierPolicy& c) {
  const std::string s = "outliers";
  check_keys(j, {"min_confidence", "max_rotation_jump", "require_success"}, s);
  get(j, "min_confidence", c.min_confidence, s);
  get(j, "max_rotation_jump", c.max_rotation_jump, s);
  get(j, "require_success", c.require_success, s);
}

void to_json(json& j, const PreprocessOptions& c) {
  j = json{{"outliers", c.outliers},           {"remove_outliers", c.remove_outliers},
           {"smooth", c.smooth},               {"median_window", c.median_window},
           {"center", c.center},               {"clamp", c.clamp},
           {"segment_length", c.segment_length}, {"segment_stride", c.segment_stride}};
}

void from_json(const json& j, PreprocessOptions& c) {
  const std::string s = "preprocess";
  check_keys(j,
             {"outliers", "remove_outliers", "smooth", "median_window", "center", "clamp", "segment_length",
              "segment_stride"},
             s);
  get(j, "outliers", c.outliers, s);
  get(j, "remove_outliers", c.remove_outliers, s);
  get(j, "smooth", c.smooth, s);
  get(j, "median_window", c.median_window, s);
  get(j, "center", c.center, s);
  get(j, "clamp", c.clamp, s);
  get(j, "segment_length", c.segment_length, s);
  get(j, "segment_stride", c.segment_stride, s);
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"lr_generator", c.lr_generator},
           {"lr_discriminator", c.lr_discriminator},
           {"batch_size", c.batch_size},
           {"lambda_gp", c.lambda_gp},
           {"adv_weight", c.adv_weight},
           {"n_critic", c.n_critic},
           {"epochs", c.epochs},
           {"checkpoint_interval", c.checkpoint_interval},
           {"seed", c.seed},
           {"mismatch_fraction", c.mismatch_fraction},
           {"adam_beta1", c.adam_beta1},
           {"adam_beta2", c.adam_beta2},
           {"speaking_threshold", c.speaking_threshold},
           {"gp_interpolate_mismatch", c.gp_interpolate_mismatch}};
}

void from_json(const json& j, TrainConfig& c) {
  const std::string s = "train";
  check_keys(j,
             {"lr_generator", "lr_discriminator", "batch_size", "lambda_gp", "adv_weight", "n_critic", "epochs",
              "checkpoint_interval", "seed", "mismatch_fraction", "adam_beta1", "adam_beta2",
              "speaking_threshold", "gp_interpolate_mismatch"},
             s);
  get(j, "lr_generator", c.lr_generator, s);
  get(j, "lr_discriminator", c.lr_discriminator, s);
  get(j, "batch_size", c.batch_size, s);
  get(j, "lambda_gp", c.lambda_gp, s);
  get(j, "adv_weight", c.adv_weight, s);
  get(j, "n_critic", c.n_critic, s);
  get(j, "epochs", c.epochs, s);
  get(j, "checkpoint_interval", c.checkpoint_interval, s);
  get(j, "seed", c.seed, s);
  get(j, "mismatch_fraction", c.mismatch_fraction, s);
  get(j, "adam_beta1", c.adam_beta1, s);
  get(j, "adam_beta2", c.adam_beta2, s);
  get(j, "speaking_threshold", c.speaking_threshold, s);
  get(j, "gp_interpolate_mismatch", c.gp_interpolate_mismatch, s);
}

void to_json(json& j, const StudyConfig& c) {
  j = json{{"sequences", c.sequences},
           {"conditions", c.conditions},
           {"believability_question", c.believability_question},
           {"coordination_question", c.coordination_question},
           {"video_pattern", c.video_pattern},
           {"videos", c.videos}};
}

void from_json(const json& j, StudyConfig& c) {
  const std::string s = "study";
  check_keys(j,
             {"sequences", "conditions", "believability_question", "coordination_question", "video_pattern",
              "videos"},
             s);
  get(j, "sequences", c.sequences, s);
  get(j, "conditions", c.conditions, s);
  get(j, "believability_question", c.believability_question, s);
  get(j, "coordination_question", c.coordination_question, s);
  get(j, "video_pattern", c.video_pattern, s);
  get(j, "videos", c.videos, s);
}

}  // namespace facesync
